#include "selfnorm/processes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "selfnorm/errors.hpp"
#include "selfnorm/rng.hpp"

namespace selfnorm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double normal_cdf(double c) { return 0.5 * std::erfc(-c / std::numbers::sqrt2); }
double normal_pdf(double c) { return std::exp(-0.5 * c * c) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

DifferenceModel DifferenceModel::rademacher() { return DifferenceModel(Rademacher{}); }

DifferenceModel DifferenceModel::scaled_two_point(double p_up, double up, double down) {
    std::vector<std::string> issues;
    if (!(p_up > 0.0 && p_up < 1.0)) issues.emplace_back("scaled_two_point: p_up must lie in (0, 1)");
    if (!(up > 0.0)) issues.emplace_back("scaled_two_point: up must be > 0");
    if (!(down < 0.0)) issues.emplace_back("scaled_two_point: down must be < 0");
    if (issues.empty()) {
        const double mean = p_up * up + (1.0 - p_up) * down;
        if (std::abs(mean) > 1e-12 * std::max(up, -down)) {
            issues.emplace_back("scaled_two_point: p_up * up + (1 - p_up) * down must be 0, got " +
                                std::to_string(mean));
        }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return DifferenceModel(ScaledTwoPoint{p_up, up, down});
}

DifferenceModel DifferenceModel::bounded_above(double y_cap, CappedBase base) {
    if (!(y_cap > 0.0) || !std::isfinite(y_cap)) {
        throw ValidationError({"bounded_above: y_cap must be a positive finite number"});
    }
    return DifferenceModel(BoundedAbove{y_cap, base});
}

DifferenceModel DifferenceModel::centered_pareto(double beta_tail, double scale) {
    std::vector<std::string> issues;
    if (!(beta_tail > 1.0) || !std::isfinite(beta_tail)) {
        issues.emplace_back("centered_pareto: beta_tail must be > 1 (finite mean)");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) issues.emplace_back("centered_pareto: scale must be > 0");
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return DifferenceModel(CenteredPareto{beta_tail, scale});
}

DifferenceModel DifferenceModel::gaussian(double sd) {
    if (!(sd > 0.0) || !std::isfinite(sd)) throw ValidationError({"gaussian: sd must be > 0"});
    return DifferenceModel(Gaussian{sd});
}

DifferenceModel DifferenceModel::symmetric_mixture(std::vector<double> weights, std::vector<double> scales) {
    std::vector<std::string> issues;
    if (weights.empty() || weights.size() != scales.size()) {
        issues.emplace_back("symmetric_mixture: weights and scales must be nonempty and of equal length");
    } else {
        if (std::any_of(weights.begin(), weights.end(), [](double w) { return !(w >= 0.0); })) {
            issues.emplace_back("symmetric_mixture: weights must be >= 0");
        }
        if (std::abs(std::accumulate(weights.begin(), weights.end(), 0.0) - 1.0) > 1e-12) {
            issues.emplace_back("symmetric_mixture: weights must sum to 1");
        }
        if (std::any_of(scales.begin(), scales.end(), [](double s) { return !(s > 0.0) || !std::isfinite(s); })) {
            issues.emplace_back("symmetric_mixture: scales must be > 0");
        }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return DifferenceModel(SymmetricMixture{std::move(weights), std::move(scales)});
}

std::string DifferenceModel::name() const {
    return std::visit(overloaded{
                          [](const Rademacher&) { return std::string("rademacher"); },
                          [](const ScaledTwoPoint&) { return std::string("scaled_two_point"); },
                          [](const BoundedAbove&) { return std::string("bounded_above"); },
                          [](const CenteredPareto&) { return std::string("centered_pareto"); },
                          [](const Gaussian&) { return std::string("gaussian"); },
                          [](const SymmetricMixture&) { return std::string("conditionally_symmetric_mixture"); },
                      },
                      family_);
}

Preconditions DifferenceModel::preconditions() const {
    return std::visit(
        overloaded{
            [](const Rademacher&) { return Preconditions{true, true, true, 1.0, 1.0, kInf}; },
            [](const ScaledTwoPoint& m) {
                const bool sym = m.p_up == 0.5 && m.up == -m.down;
                return Preconditions{true, sym, m.up >= -m.down, m.up, std::max(m.up, -m.down), kInf};
            },
            [](const BoundedAbove& m) {
                if (m.base == CappedBase::uniform) return Preconditions{true, true, true, m.y_cap, m.y_cap, kInf};
                return Preconditions{true, false, false, m.y_cap, std::nullopt, kInf};
            },
            [](const CenteredPareto& m) {
                return Preconditions{m.beta_tail > 2.0, true, true, std::nullopt, std::nullopt, m.beta_tail};
            },
            [](const Gaussian&) { return Preconditions{true, true, true, std::nullopt, std::nullopt, kInf}; },
            [](const SymmetricMixture& m) {
                const double top = *std::max_element(m.scales.begin(), m.scales.end());
                return Preconditions{true, true, true, top, top, kInf};
            },
        },
        family_);
}

double DifferenceModel::sample(std::uint64_t w0, std::uint64_t w1) const {
    return std::visit(
        overloaded{
            [&](const Rademacher&) { return (w0 >> 63) ? 1.0 : -1.0; },
            [&](const ScaledTwoPoint& m) { return to_unit(w0) < m.p_up ? m.up : m.down; },
            [&](const BoundedAbove& m) {
                const double u = to_unit(w0);
                if (m.base == CappedBase::uniform) return m.y_cap * (2.0 * u - 1.0);
                return m.y_cap * (1.0 + std::log(u));
            },
            [&](const CenteredPareto& m) {
                const double mag = m.scale * std::pow(to_unit(w0), -1.0 / m.beta_tail);
                return (w1 >> 63) ? mag : -mag;
            },
            [&](const Gaussian& m) {
                const double r = std::sqrt(-2.0 * std::log(to_unit(w0)));
                return m.sd * r * std::cos(2.0 * std::numbers::pi * to_unit(w1));
            },
            [&](const SymmetricMixture& m) {
                const double u = to_unit(w0);
                double acc = 0.0;
                std::size_t k = 0;
                for (; k + 1 < m.weights.size(); ++k) {
                    acc += m.weights[k];
                    if (u < acc) break;
                }
                return (w1 >> 63) ? m.scales[k] : -m.scales[k];
            },
        },
        family_);
}

std::optional<double> DifferenceModel::second_moment() const {
    return std::visit(overloaded{
                          [](const Rademacher&) -> std::optional<double> { return 1.0; },
                          [](const ScaledTwoPoint& m) -> std::optional<double> {
                              return m.p_up * m.up * m.up + (1.0 - m.p_up) * m.down * m.down;
                          },
                          [](const BoundedAbove& m) -> std::optional<double> {
                              const double y2 = m.y_cap * m.y_cap;
                              return m.base == CappedBase::uniform ? y2 / 3.0 : y2;
                          },
                          [](const CenteredPareto& m) -> std::optional<double> {
                              if (m.beta_tail <= 2.0) return std::nullopt;
                              return m.scale * m.scale * m.beta_tail / (m.beta_tail - 2.0);
                          },
                          [](const Gaussian& m) -> std::optional<double> { return m.sd * m.sd; },
                          [](const SymmetricMixture& m) -> std::optional<double> {
                              double s = 0.0;
                              for (std::size_t k = 0; k < m.weights.size(); ++k) s += m.weights[k] * m.scales[k] * m.scales[k];
                              return s;
                          },
                      },
                      family_);
}

std::optional<double> DifferenceModel::second_moment_below(double y) const {
    return std::visit(
        overloaded{
            [&](const Rademacher&) -> std::optional<double> {
                return 0.5 * ((-1.0 <= y) ? 1.0 : 0.0) + 0.5 * ((1.0 <= y) ? 1.0 : 0.0);
            },
            [&](const ScaledTwoPoint& m) -> std::optional<double> {
                double s = 0.0;
                if (m.up <= y) s += m.p_up * m.up * m.up;
                if (m.down <= y) s += (1.0 - m.p_up) * m.down * m.down;
                return s;
            },
            [&](const BoundedAbove& m) -> std::optional<double> {
                const double c = m.y_cap;
                if (m.base == CappedBase::uniform) {
                    if (y <= -c) return 0.0;
                    const double top = std::min(y, c);
                    return (top * top * top + c * c * c) / (6.0 * c);
                }
                // xi <= y  <=>  E >= 1 - y/c; integral_{e0}^inf (1-e)^2 e^{-e} de = e^{-e0} (e0^2 + 1).
                const double e0 = std::max(0.0, 1.0 - y / c);
                return c * c * std::exp(-e0) * (e0 * e0 + 1.0);
            },
            [&](const CenteredPareto& m) -> std::optional<double> {
                // The left tail alone carries E[xi^2 1{xi < 0}] = inf unless beta_tail > 2.
                if (m.beta_tail <= 2.0) return std::nullopt;
                const double al = m.beta_tail;
                const double s = m.scale;
                const double half = 0.5 * s * s * al / (al - 2.0);
                double upper = 0.0;
                if (y > s) upper = 0.5 * al * std::pow(s, al) * (std::pow(y, 2.0 - al) - std::pow(s, 2.0 - al)) / (2.0 - al);
                if (y < -s) {
                    // only the part of the left tail below y
                    return 0.5 * al * std::pow(s, al) * std::pow(-y, 2.0 - al) / (al - 2.0);
                }
                return half + upper;
            },
            [&](const Gaussian& m) -> std::optional<double> {
                const double c = y / m.sd;
                return m.sd * m.sd * (normal_cdf(c) - c * normal_pdf(c));
            },
            [&](const SymmetricMixture& m) -> std::optional<double> {
                double s = 0.0;
                for (std::size_t k = 0; k < m.weights.size(); ++k) {
                    const double sc = m.scales[k];
                    const double mass = ((-sc <= y) ? 0.5 : 0.0) + ((sc <= y) ? 0.5 : 0.0);
                    s += m.weights[k] * sc * sc * mass;
                }
                return s;
            },
        },
        family_);
}

std::optional<double> DifferenceModel::neg_second_moment() const {
    return std::visit(overloaded{
                          [](const Rademacher&) -> std::optional<double> { return 0.5; },
                          [](const ScaledTwoPoint& m) -> std::optional<double> {
                              return (1.0 - m.p_up) * m.down * m.down;
                          },
                          [](const BoundedAbove& m) -> std::optional<double> {
                              const double y2 = m.y_cap * m.y_cap;
                              if (m.base == CappedBase::uniform) return y2 / 6.0;
                              return 2.0 * y2 / std::numbers::e;
                          },
                          [](const CenteredPareto& m) -> std::optional<double> {
                              if (m.beta_tail <= 2.0) return std::nullopt;
                              return 0.5 * m.scale * m.scale * m.beta_tail / (m.beta_tail - 2.0);
                          },
                          [](const Gaussian& m) -> std::optional<double> { return 0.5 * m.sd * m.sd; },
                          [](const SymmetricMixture& m) -> std::optional<double> {
                              double s = 0.0;
                              for (std::size_t k = 0; k < m.weights.size(); ++k) s += m.weights[k] * m.scales[k] * m.scales[k];
                              return 0.5 * s;
                          },
                      },
                      family_);
}

std::optional<double> DifferenceModel::neg_beta_moment(double beta) const {
    if (!(beta > 0.0)) throw DomainError("neg_beta_moment: beta must be > 0");
    return std::visit(
        overloaded{
            [&](const Rademacher&) -> std::optional<double> { return 0.5; },
            [&](const ScaledTwoPoint& m) -> std::optional<double> {
                return (1.0 - m.p_up) * std::pow(-m.down, beta);
            },
            [&](const BoundedAbove& m) -> std::optional<double> {
                const double yb = std::pow(m.y_cap, beta);
                if (m.base == CappedBase::uniform) return yb / (2.0 * (beta + 1.0));
                // integral_1^inf (e-1)^beta e^{-e} de = Gamma(beta+1) / e
                return yb * std::tgamma(beta + 1.0) / std::numbers::e;
            },
            [&](const CenteredPareto& m) -> std::optional<double> {
                if (beta >= m.beta_tail) return std::nullopt;
                return 0.5 * std::pow(m.scale, beta) * m.beta_tail / (m.beta_tail - beta);
            },
            [&](const Gaussian& m) -> std::optional<double> {
                return std::pow(m.sd, beta) * std::pow(2.0, 0.5 * beta) * std::tgamma(0.5 * (beta + 1.0)) /
                       (2.0 * std::sqrt(std::numbers::pi));
            },
            [&](const SymmetricMixture& m) -> std::optional<double> {
                double s = 0.0;
                for (std::size_t k = 0; k < m.weights.size(); ++k) s += m.weights[k] * std::pow(m.scales[k], beta);
                return 0.5 * s;
            },
        },
        family_);
}

std::optional<double> DifferenceModel::truncated_mean_closed_form(double a) const {
    return std::visit(overloaded{
                          [&](const ScaledTwoPoint& m) -> std::optional<double> {
                              return m.p_up * std::min(m.up, a) - (1.0 - m.p_up) * std::min(-m.down, a);
                          },
                          [&](const BoundedAbove& m) -> std::optional<double> {
                              if (m.base == CappedBase::uniform) return 0.0;
                              return std::nullopt;
                          },
                          // remaining families are symmetric
                          [](const auto&) -> std::optional<double> { return 0.0; },
                      },
                      family_);
}

std::optional<double> DifferenceModel::density(double u) const {
    return std::visit(overloaded{
                          [&](const BoundedAbove& m) -> std::optional<double> {
                              const double c = m.y_cap;
                              if (m.base == CappedBase::uniform) return std::abs(u) <= c ? 0.5 / c : 0.0;
                              return u <= c ? std::exp(u / c - 1.0) / c : 0.0;
                          },
                          [&](const CenteredPareto& m) -> std::optional<double> {
                              const double t = std::abs(u);
                              if (t < m.scale) return 0.0;
                              return 0.5 * m.beta_tail * std::pow(m.scale, m.beta_tail) * std::pow(t, -m.beta_tail - 1.0);
                          },
                          [&](const Gaussian& m) -> std::optional<double> { return normal_pdf(u / m.sd) / m.sd; },
                          [](const auto&) -> std::optional<double> { return std::nullopt; },
                      },
                      family_);
}

void sample_into(const DifferenceModel& model, ReplicateId seed, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto w = block(seed.master_seed, seed.replicate, i);
        out[i] = model.sample(w[0], w[1]);
    }
}

Path sample_path(const DifferenceModel& model, std::size_t n, ReplicateId seed) {
    if (n == 0) throw DomainError("sample_path: n must be >= 1");
    Path path{std::vector<double>(n), model, seed};
    sample_into(model, seed, path.xs);
    return path;
}

StatsCalculator::StatsCalculator(const DifferenceModel& model, StatsRequest request)
    : request_(request),
      m2_(model.second_moment()),
      m2_below_(model.second_moment_below(request.y)),
      neg2_(model.neg_second_moment()) {
    if (!(request_.y >= 0.0)) throw DomainError("path_stats: y must be >= 0");
    if (!(request_.a >= 0.0)) throw DomainError("path_stats: a must be >= 0");
    if (request_.beta) {
        const double beta = *request_.beta;
        if (!(beta > 1.0 && beta < 2.0)) throw DomainError("path_stats: beta must lie in (1, 2)");
        neg_beta_ = model.neg_beta_moment(beta);
        if (!neg_beta_) {
            throw UnsupportedStatistic("G_n(beta) needs E[(xi^-)^beta] < inf; " + model.name() +
                                       " has no finite moment of order " + std::to_string(beta));
        }
    }
}

PathStats StatsCalculator::operator()(std::span<const double> xs) const {
    PathStats st;
    const double y = request_.y;
    const double a = request_.a;
    double pos_beta = 0.0;
    for (const double v : xs) {
        const double v2 = v * v;
        st.s_n += v;
        st.sq_var += v2;
        if (v > y) {
            st.sq_var_above += v2;
        } else {
            st.sq_var_below += v2;
        }
        if (v > 0.0) {
            st.pos_sq += v2;
            if (request_.beta) pos_beta += std::pow(v, *request_.beta);
        }
        if (std::abs(v) > a) st.abs_above_a += v2;
    }
    const double n = static_cast<double>(xs.size());
    if (m2_) {
        st.cond_var = n * *m2_;
        st.h_n = st.abs_above_a + *st.cond_var;
    }
    if (m2_below_) {
        st.cond_var_below = n * *m2_below_;
        st.b_n = st.sq_var_above + *st.cond_var_below;
    }
    if (neg2_) st.neg_cond = n * *neg2_;
    if (request_.beta) {
        st.pos_beta = pos_beta;
        st.neg_cond_beta = n * *neg_beta_;
        st.g_n = pos_beta + *st.neg_cond_beta;
    }
    return st;
}

PathStats path_stats(const Path& path, const StatsRequest& request) {
    return StatsCalculator(path.model, request)(path.xs);
}

double truncated_mean(const DifferenceModel& model, double a) {
    if (!(a > 0.0)) throw DomainError("truncated_mean: a must be > 0");
    if (auto closed = model.truncated_mean_closed_form(a)) return *closed;

    using boost::math::quadrature::gauss_kronrod;
    const auto f = [&](double u) { return *model.density(u); };
    const auto upper = model.preconditions().upper_bound;
    const double top = upper ? *upper : kInf;
    double total = 0.0;
    total += -a * gauss_kronrod<double, 61>::integrate(f, -kInf, -a, 15, 1e-13);
    const double mid_hi = std::min(a, top);
    if (mid_hi > -a) {
        total += gauss_kronrod<double, 61>::integrate([&](double u) { return u * f(u); }, -a, mid_hi, 15, 1e-13);
    }
    if (top > a) total += a * gauss_kronrod<double, 61>::integrate(f, a, top, 15, 1e-13);
    return total;
}

HeavyOnLeftVerdict heavy_on_left_verdict(const DifferenceModel& model, std::span<const double> a_grid) {
    if (a_grid.empty()) throw DomainError("heavy_on_left_verdict: empty grid");
    HeavyOnLeftVerdict v{true, a_grid.front(), -kInf};
    for (const double a : a_grid) {
        const double m = truncated_mean(model, a);
        if (m > v.worst_value) {
            v.worst_value = m;
            v.worst_a = a;
        }
    }
    v.pass = v.worst_value <= 1e-12;
    return v;
}

}  // namespace selfnorm
