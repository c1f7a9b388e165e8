#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace selfnorm {

// Argument outside the mathematical domain of a function (x < 0, beta outside (1,2), ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// One or more invalid or missing fields; every offending field is listed.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : std::invalid_argument(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out;
        for (const auto& s : issues) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

// A statistic needs a conditional moment the model does not have (e.g. an infinite variance).
class UnsupportedStatistic : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Problem size beyond what an exact routine can enumerate.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Input data that makes a statistic undefined (zero sample variance, all-zero design).
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace selfnorm
