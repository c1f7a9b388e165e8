#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

namespace selfnorm {

// Two-sided Clopper-Pearson interval for `hits` successes out of `trials` at
// confidence level gamma.
struct BinomialInterval {
    double lo;
    double hi;
};

BinomialInterval clopper_pearson(std::uint64_t hits, std::uint64_t trials, double gamma);

// Pairwise (cascade) summation; the result depends only on the values and
// their order, never on how they were produced.
double pairwise_sum(std::span<const double> values);

struct MeanAndError {
    double mean;
    double std_error;
};

MeanAndError mean_and_error(std::span<const double> values);

// Runs body(i) for i in [0, count) on `jobs` threads with static contiguous
// chunks. body must only write to slots owned by index i.
template <class Body>
void parallel_for(std::size_t count, unsigned jobs, Body&& body) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    const std::size_t chunk = (count + jobs - 1) / jobs;
    for (unsigned j = 0; j < jobs; ++j) {
        const std::size_t begin = j * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([begin, end, &body] {
            for (std::size_t i = begin; i < end; ++i) body(i);
        });
    }
}

}  // namespace selfnorm
