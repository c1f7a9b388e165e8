#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>

#include "selfnorm/applications.hpp"
#include "selfnorm/bounds.hpp"
#include "selfnorm/errors.hpp"
#include "selfnorm/rng.hpp"

namespace selfnorm {

namespace {

constexpr std::size_t kMaxHeldKarp = 16;

double dist(const PointSet& pts, std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < pts.d; ++k) {
        const double t = pts.coords[i * pts.d + k] - pts.coords[j * pts.d + k];
        s += t * t;
    }
    return std::sqrt(s);
}

void check_points(const PointSet& pts) {
    if (pts.d == 0 || pts.coords.size() % pts.d != 0) throw DomainError("point set has inconsistent dimension");
    if (pts.size() < 2) throw DomainError("tour needs at least 2 points");
}

}  // namespace

PointSet uniform_points(std::size_t n, std::size_t d, std::uint64_t seed, std::uint64_t replicate) {
    if (d == 0) throw DomainError("uniform_points: d must be >= 1");
    PointSet pts;
    pts.d = d;
    pts.coords.resize(n * d);
    CounterStream rng(seed, replicate);
    for (auto& c : pts.coords) c = rng.uniform();
    return pts;
}

double held_karp_tour(const PointSet& pts) {
    check_points(pts);
    const std::size_t n = pts.size();
    if (n > kMaxHeldKarp) throw SizeError("held_karp_tour: n must be <= " + std::to_string(kMaxHeldKarp));
    if (n == 2) return 2.0 * dist(pts, 0, 1);
    const std::size_t m = n - 1;  // cities 1..n-1, city 0 is the fixed start
    std::array<double, kMaxHeldKarp * kMaxHeldKarp> w{};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) w[i * n + j] = dist(pts, i, j);
    constexpr double kInf = std::numeric_limits<double>::infinity();
    const std::uint32_t full = (std::uint32_t{1} << m) - 1;
    thread_local std::vector<double> dp;
    dp.assign((std::size_t{full} + 1) * m, kInf);
    for (std::size_t j = 0; j < m; ++j) dp[(std::size_t{1} << j) * m + j] = w[j + 1];
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        if (std::has_single_bit(mask)) continue;
        for (std::uint32_t ks = mask; ks; ks &= ks - 1) {
            const int k = std::countr_zero(ks);
            const std::uint32_t prev = mask ^ (std::uint32_t{1} << k);
            const double* row = &dp[std::size_t{prev} * m];
            double best = kInf;
            for (std::uint32_t js = prev; js; js &= js - 1) {
                const int j = std::countr_zero(js);
                const double cand = row[j] + w[(j + 1) * n + k + 1];
                if (cand < best) best = cand;
            }
            dp[std::size_t{mask} * m + k] = best;
        }
    }
    double best = kInf;
    for (std::size_t j = 0; j < m; ++j) best = std::min(best, dp[std::size_t{full} * m + j] + w[(j + 1) * n]);
    return best;
}

double two_opt_tour(const PointSet& pts) {
    check_points(pts);
    const std::size_t n = pts.size();
    std::vector<std::size_t> tour{0};
    std::vector<char> used(n, 0);
    used[0] = 1;
    for (std::size_t step = 1; step < n; ++step) {
        const std::size_t last = tour.back();
        std::size_t pick = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) continue;
            const double dj = dist(pts, last, j);
            if (dj < best) {
                best = dj;
                pick = j;
            }
        }
        used[pick] = 1;
        tour.push_back(pick);
    }
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t i = 0; i + 1 < n && !improved; ++i) {
            for (std::size_t j = i + 2; j < n && !improved; ++j) {
                if (i == 0 && j == n - 1) continue;
                const std::size_t a = tour[i], b = tour[i + 1], c = tour[j], d = tour[(j + 1) % n];
                const double delta = dist(pts, a, c) + dist(pts, b, d) - dist(pts, a, b) - dist(pts, c, d);
                if (delta < -1e-12) {
                    std::reverse(tour.begin() + static_cast<std::ptrdiff_t>(i + 1),
                                 tour.begin() + static_cast<std::ptrdiff_t>(j + 1));
                    improved = true;
                }
            }
        }
    }
    double len = 0.0;
    for (std::size_t i = 0; i < n; ++i) len += dist(pts, tour[i], tour[(i + 1) % n]);
    return len;
}

TourResult tsp_tour_length(const PointSet& pts) {
    check_points(pts);
    if (pts.size() <= kMaxExactTour) return {held_karp_tour(pts), true};
    return {two_opt_tour(pts), false};
}

MartingaleDiffs tsp_martingale_diffs(const PointSet& pts, std::size_t inner_rep, std::uint64_t seed, unsigned jobs) {
    check_points(pts);
    const std::size_t n = pts.size();
    const std::size_t d = pts.d;
    if (n > kMaxExactTour) {
        throw SizeError("tsp_martingale_diffs: n must be <= " + std::to_string(kMaxExactTour));
    }
    if (inner_rep < 1000) throw DomainError("tsp_martingale_diffs: inner_rep must be >= 1000");
    MartingaleDiffs out;
    out.tour = held_karp_tour(pts);
    out.cond_mean.resize(n + 1);
    out.cond_mean_se.resize(n + 1);
    std::vector<double> lens(inner_rep);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t sub = derive_seed(seed, i);
        const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(std::max(1u, jobs), inner_rep));
        const std::size_t per = (inner_rep + chunks - 1) / chunks;
        parallel_for(chunks, jobs, [&](std::size_t c) {
            PointSet work = pts;
            const std::size_t end = std::min(inner_rep, (c + 1) * per);
            for (std::size_t k = c * per; k < end; ++k) {
                CounterStream rng(sub, k);
                for (std::size_t j = i * d; j < n * d; ++j) work.coords[j] = rng.uniform();
                lens[k] = held_karp_tour(work);
            }
        });
        const auto me = mean_and_error(lens);
        out.cond_mean[i] = me.mean;
        out.cond_mean_se[i] = me.std_error;
    }
    out.cond_mean[n] = out.tour;
    out.cond_mean_se[n] = 0.0;
    out.diffs.resize(n);
    out.diffs_se.resize(n);
    for (std::size_t i = 1; i <= n; ++i) {
        out.diffs[i - 1] = out.cond_mean[i] - out.cond_mean[i - 1];
        out.diffs_se[i - 1] = std::hypot(out.cond_mean_se[i], out.cond_mean_se[i - 1]);
    }
    return out;
}

MeanAndError tsp_mean_tour(std::size_t n, std::size_t d, std::size_t reps, std::uint64_t seed, unsigned jobs) {
    if (reps == 0) throw DomainError("tsp_mean_tour: reps must be >= 1");
    std::vector<double> lens(reps);
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(std::max(1u, jobs), reps));
    const std::size_t per = (reps + chunks - 1) / chunks;
    parallel_for(chunks, jobs, [&](std::size_t c) {
        const std::size_t end = std::min(reps, (c + 1) * per);
        for (std::size_t r = c * per; r < end; ++r) lens[r] = tsp_tour_length(uniform_points(n, d, seed, r)).length;
    });
    return mean_and_error(lens);
}

TspVerification verify_tsp(const TspConfig& cfg) {
    if (cfg.n < 2 || cfg.n > kMaxExactTour) {
        throw ValidationError({"tsp n must lie in [2, " + std::to_string(kMaxExactTour) + "]"});
    }
    if (cfg.d < 2) throw ValidationError({"tsp dimension d must be >= 2"});
    if (cfg.instances < 1) throw ValidationError({"tsp instances must be >= 1"});
    if (cfg.t_grid.empty()) throw ValidationError({"tsp t grid is empty"});
    const std::size_t n = cfg.n;
    TspVerification out;
    out.n = n;
    out.d = cfg.d;
    out.instances = cfg.instances;
    const auto mean = tsp_mean_tour(n, cfg.d, cfg.mean_rep, derive_seed(cfg.seed, 1), cfg.jobs);
    out.mean_tour = mean.mean;
    out.mean_tour_se = mean.std_error;

    std::vector<MartingaleDiffs> diffs(cfg.instances);
    const std::uint64_t inst_seed = derive_seed(cfg.seed, 2);
    const std::uint64_t inner_seed = derive_seed(cfg.seed, 3);
    parallel_for(cfg.instances, cfg.jobs, [&](std::size_t r) {
        diffs[r] = tsp_martingale_diffs(uniform_points(n, cfg.d, inst_seed, r), cfg.inner_rep,
                                        derive_seed(inner_seed, r), 1);
    });

    std::vector<double> num(cfg.instances), den(cfg.instances);
    out.negative_fraction.assign(n, 0.0);
    double min_den = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < cfg.instances; ++r) {
        const auto& md = diffs[r];
        double q = 0.0;
        for (const double v : md.diffs) q += v * v;
        den[r] = std::sqrt(q);
        num[r] = md.tour - mean.mean;
        min_den = std::min(min_den, den[r]);
        const double sum = pairwise_sum(md.diffs);
        const double tol = 3.0 * std::hypot(md.cond_mean_se[0], mean.std_error);
        if (std::abs(sum - num[r]) <= tol) ++out.reconciled;
        for (std::size_t i = 0; i < n; ++i) {
            if (md.diffs[i] < 0.0) out.negative_fraction[i] += 1.0;
        }
    }
    for (auto& f : out.negative_fraction) f /= static_cast<double>(cfg.instances);

    const double nn = static_cast<double>(n);
    const double dd = static_cast<double>(cfg.d);
    out.c1 = cfg.c1 ? *cfg.c1 : min_den / std::sqrt(nn);
    out.window_lo = out.c1 * std::pow(nn, 0.5 - 1.0 / dd);
    out.window_hi = out.c1 * std::sqrt(nn);
    for (std::size_t r = 0; r < cfg.instances; ++r) {
        if (den[r] >= out.window_lo && den[r] <= out.window_hi) ++out.in_window;
    }
    for (const double t : cfg.t_grid) {
        std::uint64_t hits = 0;
        for (std::size_t r = 0; r < cfg.instances; ++r) {
            if (den[r] > 0.0 && den[r] >= out.window_lo && den[r] <= out.window_hi && num[r] >= t * den[r]) ++hits;
        }
        RateInputs in;
        in.t = t;
        in.n = static_cast<long>(n);
        in.d = static_cast<long>(cfg.d);
        const double bound = evaluate_bound(BoundSpec(BoundKind::thm34_tsp, in));
        const auto est = make_estimate(hits, cfg.instances, cfg.gamma);
        out.points.push_back({t, bound, domination_check(est, bound), out.in_window == 0});
    }
    return out;
}

void write_points_csv(const PointSet& pts, const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "w"), &std::fclose);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t k = 0; k < pts.d; ++k) std::fprintf(f.get(), k ? ",x%zu" : "x%zu", k);
    std::fputc('\n', f.get());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t k = 0; k < pts.d; ++k) {
            std::fprintf(f.get(), k ? ",%.17g" : "%.17g", pts.coords[i * pts.d + k]);
        }
        std::fputc('\n', f.get());
    }
}

}  // namespace selfnorm
