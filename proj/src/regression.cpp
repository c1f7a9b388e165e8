#include <algorithm>
#include <cmath>

#include "selfnorm/applications.hpp"
#include "selfnorm/bounds.hpp"
#include "selfnorm/errors.hpp"
#include "selfnorm/rng.hpp"

namespace selfnorm {

double RegressionConfig::sigma() const {
    const auto m2 = eps.second_moment();
    if (!m2) throw ValidationError({"regression noise must have finite variance"});
    return std::sqrt(*m2);
}

double RegressionConfig::y() const {
    const auto ub = eps.preconditions().upper_bound;
    if (!ub) throw ValidationError({"regression noise must be bounded above"});
    return std::max(*ub, 0.0);
}

void RegressionConfig::validate() const {
    std::vector<std::string> issues;
    if (n < 1) issues.push_back("n must be >= 1");
    if (phi.kind == RegressorModel::Kind::constant && !(std::abs(phi.value) <= 1.0)) {
        issues.push_back("constant regressor must satisfy |phi| <= 1");
    }
    if (phi.kind == RegressorModel::Kind::constant && phi.value == 0.0) {
        issues.push_back("constant regressor must be nonzero");
    }
    if (!eps.preconditions().upper_bound) issues.push_back("noise " + eps.name() + " is not bounded above");
    const auto m2 = eps.second_moment();
    if (!m2) {
        issues.push_back("noise " + eps.name() + " has infinite variance");
    } else if (std::sqrt(*m2) < 1e-3) {
        issues.push_back("noise standard deviation must be >= 1e-3");
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

RegressionRun make_regression_run(double theta, std::vector<double> phi, std::vector<double> eps) {
    if (phi.size() != eps.size()) throw DomainError("make_regression_run: phi and eps lengths differ");
    RegressionRun run;
    run.theta = theta;
    run.obs.resize(phi.size());
    for (std::size_t k = 0; k < phi.size(); ++k) run.obs[k] = theta * phi[k] + eps[k];
    run.phi = std::move(phi);
    run.eps = std::move(eps);
    return run;
}

RegressionRun simulate_regression(const RegressionConfig& cfg, ReplicateId seed) {
    std::vector<double> phi(cfg.n), eps(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const auto wp = block(seed.master_seed, seed.replicate, 2 * i);
        const auto we = block(seed.master_seed, seed.replicate, 2 * i + 1);
        phi[i] = cfg.phi.kind == RegressorModel::Kind::uniform ? 2.0 * to_unit(wp[0]) - 1.0 : cfg.phi.value;
        eps[i] = cfg.eps.sample(we[0], we[1]);
    }
    return make_regression_run(cfg.theta, std::move(phi), std::move(eps));
}

double ls_estimate(const RegressionRun& run) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < run.phi.size(); ++k) {
        num += run.phi[k] * run.obs[k];
        den += run.phi[k] * run.phi[k];
    }
    if (!(den > 0.0)) throw DegenerateError("ls_estimate: all regressors are zero");
    return num / den;
}

double exact_regression_tail(std::size_t n, double sigma, double x, std::optional<double> window_lo,
                             std::optional<double> window_hi, bool self_normalized) {
    if (n == 0) throw DomainError("exact_regression_tail: n must be >= 1");
    if (n > kMaxExactN) throw SizeError("exact_regression_tail: n must be <= " + std::to_string(kMaxExactN));
    const double root = std::sqrt(static_cast<double>(n));
    if ((window_lo && root < *window_lo) || (window_hi && root > *window_hi)) return 0.0;
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t hits = 0;
    std::vector<double> phi(n, 1.0), eps(n);
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        for (std::size_t i = 0; i < n; ++i) eps[i] = ((mask >> i) & 1u) ? sigma : -sigma;
        const auto run = make_regression_run(0.0, phi, eps);
        const double err = std::abs(ls_estimate(run)) * (self_normalized ? root : 1.0);
        if (err >= x) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

namespace {

struct Replicate {
    double err;   // |theta_hat - theta|
    double sphi;  // sum phi^2
};

// |eps| constant and symmetric: eps = +-sigma with equal probability.
bool is_pm_sigma(const DifferenceModel& eps) {
    const auto pre = eps.preconditions();
    const auto m2 = eps.second_moment();
    if (!pre.conditionally_symmetric || !pre.abs_bound || !m2) return false;
    return std::abs(*pre.abs_bound * *pre.abs_bound - *m2) <= 1e-12 * *m2;
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    return v[k];
}

std::vector<Replicate> run_replicates(const RegressionConfig& cfg, std::uint64_t n_rep, std::uint64_t seed,
                                      unsigned jobs) {
    std::vector<Replicate> out(n_rep);
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::uint64_t>(std::max(1u, jobs), n_rep));
    const std::size_t per = (n_rep + chunks - 1) / chunks;
    parallel_for(chunks, jobs, [&](std::size_t c) {
        const std::size_t end = std::min<std::size_t>(n_rep, (c + 1) * per);
        for (std::size_t r = c * per; r < end; ++r) {
            const auto run = simulate_regression(cfg, ReplicateId{seed, r});
            double sphi = 0.0;
            for (const double p : run.phi) sphi += p * p;
            out[r].sphi = sphi;
            out[r].err = sphi > 0.0 ? std::abs(ls_estimate(run) - run.theta) : 0.0;
        }
    });
    return out;
}

}  // namespace

std::vector<RegressionPoint> verify_regression(RegressionTheorem thm, const RegressionConfig& cfg,
                                               const RegressionGrid& grid, const McConfig& mc) {
    cfg.validate();
    if (grid.x.empty()) throw ValidationError({"regression x grid is empty"});
    if (thm == RegressionTheorem::thm33 && grid.M.empty()) throw ValidationError({"regression M grid is empty"});
    if (mc.n_rep < 100) throw DomainError("verify_regression: n_rep must be >= 100");
    const double sigma = cfg.sigma();
    const double y = cfg.y();
    const bool exact_ok = is_pm_sigma(cfg.eps) && cfg.phi.kind == RegressorModel::Kind::constant &&
                          cfg.phi.value == 1.0 && cfg.n <= kMaxExactN;

    const auto reps = run_replicates(cfg, mc.n_rep, mc.master_seed, mc.jobs);
    std::vector<RegressionPoint> out;

    if (thm == RegressionTheorem::thm32) {
        std::vector<double> w(reps.size(), 1.0 / static_cast<double>(reps.size())), nrm(reps.size());
        for (std::size_t r = 0; r < reps.size(); ++r) nrm[r] = reps[r].sphi;
        for (const double x : grid.x) {
            if (!(x >= 0.0)) throw DomainError("verify_regression: x must be >= 0");
            std::uint64_t hits = 0;
            for (const auto& rep : reps) {
                if (rep.err >= x) ++hits;
            }
            const double rate = x * x / (2.0 * (sigma * sigma + x * y / 3.0));
            const ExpectationObjective obj(rate, w, nrm, std::vector<char>(reps.size(), 1), true);
            const auto opt = obj.minimize(false);
            const double bound = 2.0 * opt.value;
            RegressionPoint pt{thm, x, 0.0, 0.0, bound, opt.p_star, {}, std::nullopt};
            pt.verdict = domination_check(make_estimate(hits, mc.n_rep, mc.gamma), bound);
            if (exact_ok) pt.exact = exact_regression_tail(cfg.n, sigma, x);
            out.push_back(pt);
        }
        return out;
    }

    double b = 0.0;
    if (grid.b) {
        b = *grid.b;
    } else {
        McConfig pilot = mc;
        pilot.n_rep = std::min<std::uint64_t>(mc.n_rep, 20000);
        const auto p = run_replicates(cfg, pilot.n_rep, derive_seed(mc.master_seed, 0x70696c6f74ull), mc.jobs);
        std::vector<double> roots(p.size());
        for (std::size_t r = 0; r < p.size(); ++r) roots[r] = std::sqrt(p[r].sphi);
        b = percentile(std::move(roots), 0.10);
    }
    if (!(b > 0.0)) throw DomainError("verify_regression: b must be > 0");
    for (const double x : grid.x) {
        for (const double M : grid.M) {
            std::uint64_t hits = 0;
            for (const auto& rep : reps) {
                const double root = std::sqrt(rep.sphi);
                if (root >= b && root <= b * M && rep.err * root >= x) ++hits;
            }
            RateInputs in;
            in.x = x;
            in.y = y;
            in.b = b;
            in.M = M;
            in.sigma = sigma;
            const double bound = evaluate_bound(BoundSpec(BoundKind::thm33_regression, in));
            RegressionPoint pt{thm, x, b, M, bound, 0.0, {}, std::nullopt};
            pt.verdict = domination_check(make_estimate(hits, mc.n_rep, mc.gamma), bound);
            if (exact_ok) pt.exact = exact_regression_tail(cfg.n, sigma, x, b, b * M, true);
            out.push_back(pt);
        }
    }
    return out;
}

}  // namespace selfnorm
