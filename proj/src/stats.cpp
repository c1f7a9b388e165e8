#include "selfnorm/stats.hpp"

#include <cmath>

#include <boost/math/distributions/beta.hpp>

#include "selfnorm/errors.hpp"

namespace selfnorm {

BinomialInterval clopper_pearson(std::uint64_t hits, std::uint64_t trials, double gamma) {
    if (trials == 0) throw DomainError("clopper_pearson: trials must be >= 1");
    if (hits > trials) throw DomainError("clopper_pearson: hits exceed trials");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("clopper_pearson: gamma must lie in (0, 1)");
    const double alpha = 1.0 - gamma;
    const double k = static_cast<double>(hits);
    const double n = static_cast<double>(trials);
    BinomialInterval ci{0.0, 1.0};
    if (hits > 0) {
        ci.lo = boost::math::quantile(boost::math::beta_distribution<double>(k, n - k + 1.0), alpha / 2.0);
    }
    if (hits < trials) {
        ci.hi = boost::math::quantile(boost::math::beta_distribution<double>(k + 1.0, n - k), 1.0 - alpha / 2.0);
    }
    return ci;
}

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kLeaf = 32;
    if (values.size() <= kLeaf) {
        double s = 0.0;
        for (const double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanAndError mean_and_error(std::span<const double> values) {
    if (values.empty()) throw DomainError("mean_and_error: no values");
    const double n = static_cast<double>(values.size());
    const double mean = pairwise_sum(values) / n;
    if (values.size() == 1) return {mean, 0.0};
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

}  // namespace selfnorm
