#include <cmath>
#include <limits>

#include "selfnorm/applications.hpp"
#include "selfnorm/bounds.hpp"
#include "selfnorm/errors.hpp"
#include "selfnorm/rng.hpp"

namespace selfnorm {

namespace {

struct Moments {
    double mean;
    double ss;  // sum of squared deviations
};

Moments moments(std::span<const double> sample) {
    const double n = static_cast<double>(sample.size());
    const double mean = pairwise_sum(sample) / n;
    double ss = 0.0;
    for (const double v : sample) ss += (v - mean) * (v - mean);
    return {mean, ss};
}

// T_n with the zero-variance case sent to +-inf (or 0 for an all-zero sample).
double t_or_inf(std::span<const double> sample) {
    const auto m = moments(sample);
    const double n = static_cast<double>(sample.size());
    if (m.ss > 0.0) return std::sqrt(n) * m.mean / std::sqrt(m.ss / (n - 1.0));
    if (m.mean > 0.0) return std::numeric_limits<double>::infinity();
    if (m.mean < 0.0) return -std::numeric_limits<double>::infinity();
    return 0.0;
}

}  // namespace

double t_statistic(std::span<const double> sample) {
    if (sample.size() < 2) throw DomainError("t_statistic: need n >= 2");
    const auto m = moments(sample);
    if (!(m.ss > 0.0)) throw DegenerateError("t_statistic: zero sample variance");
    const double n = static_cast<double>(sample.size());
    return std::sqrt(n) * m.mean / std::sqrt(m.ss / (n - 1.0));
}

double t_ratio_level(double x, std::size_t n) {
    const double nn = static_cast<double>(n);
    return x * std::sqrt(nn / (nn + x * x - 1.0));
}

TEventPair t_event_equivalence(std::span<const double> sample, double x) {
    const std::size_t n = sample.size();
    if (n < 2) throw DomainError("t_event_equivalence: need n >= 2");
    if (!(x > 0.0)) throw DomainError("t_event_equivalence: x must be > 0");
    if (!(x < std::sqrt(static_cast<double>(n)))) {
        throw DomainError("t_event_equivalence: x must be < sqrt(n)");
    }
    double s = 0.0, q = 0.0;
    for (const double v : sample) {
        s += v;
        q += v * v;
    }
    if (!(q > 0.0)) throw DegenerateError("t_event_equivalence: [S]_n = 0");
    const double t = t_statistic(sample);
    return {t >= x, s / std::sqrt(q) >= t_ratio_level(x, n)};
}

EquivalenceSweep t_equivalence_sweep(std::size_t n, std::span<const double> x_grid, std::uint64_t samples,
                                     std::uint64_t seed, unsigned jobs) {
    if (n < 2) throw DomainError("t_equivalence_sweep: need n >= 2");
    std::vector<std::uint32_t> disagree(samples, 0), hits(samples, 0);
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::uint64_t>(jobs, samples));
    const std::size_t per = samples == 0 ? 0 : (samples + chunks - 1) / chunks;
    parallel_for(chunks, jobs, [&](std::size_t c) {
        std::vector<double> xs(n);
        const std::size_t end = std::min<std::size_t>(samples, (c + 1) * per);
        for (std::size_t r = c * per; r < end; ++r) {
            CounterStream rng(seed, r);
            for (auto& v : xs) v = rng.normal();
            for (const double x : x_grid) {
                const auto ev = t_event_equivalence(xs, x);
                if (ev.t_event != ev.ratio_event) ++disagree[r];
                if (ev.t_event) ++hits[r];
            }
        }
    });
    EquivalenceSweep out;
    out.samples = samples;
    out.checks = samples * x_grid.size();
    for (std::uint64_t r = 0; r < samples; ++r) {
        out.disagreements += disagree[r];
        out.t_hits += hits[r];
    }
    return out;
}

std::vector<TStatPoint> verify_tstat(const DifferenceModel& model, std::size_t n, std::span<const double> x_grid,
                                     std::span<const double> M_grid, double b, const McConfig& cfg) {
    if (n < 2) throw DomainError("verify_tstat: need n >= 2");
    if (!(b > 0.0)) throw DomainError("verify_tstat: b must be > 0");
    if (cfg.n_rep < 100) throw DomainError("verify_tstat: n_rep must be >= 100");
    std::vector<double> a_grid;
    for (int k = -30; k <= 30; ++k) a_grid.push_back(std::pow(10.0, k / 10.0));
    const auto hol = heavy_on_left_verdict(model, a_grid);
    if (!hol.pass) throw ValidationError({"model " + model.name() + " is not heavy on left"});

    std::vector<double> tval(cfg.n_rep), root(cfg.n_rep);
    for_each_replicate(model, n, cfg, [&](std::size_t r, std::span<const double> xs) {
        double q = 0.0;
        for (const double v : xs) q += v * v;
        tval[r] = t_or_inf(xs);
        root[r] = std::sqrt(q);
    });

    std::vector<TStatPoint> out;
    for (const double x : x_grid) {
        for (const double M : M_grid) {
            std::uint64_t hits = 0;
            for (std::size_t r = 0; r < cfg.n_rep; ++r) {
                if (tval[r] >= x && root[r] >= b && root[r] <= b * M) ++hits;
            }
            RateInputs in;
            in.x = x;
            in.M = M;
            in.n = static_cast<long>(n);
            const double bound = evaluate_bound(BoundSpec(BoundKind::thm31_tstat, in));
            const auto est = make_estimate(hits, cfg.n_rep, cfg.gamma);
            out.push_back({x, b, M, bound, domination_check(est, bound)});
        }
    }
    return out;
}

}  // namespace selfnorm
