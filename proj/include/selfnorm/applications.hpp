#pragma once

// Applications of the self-normalized bounds: Student's t-statistic, least
// squares in a stochastic regression, and the random-point TSP.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfnorm/montecarlo.hpp"
#include "selfnorm/processes.hpp"
#include "selfnorm/stats.hpp"

namespace selfnorm {

// ---------------------------------------------------------------------------
// Student's t

double t_statistic(std::span<const double> sample);

// x sqrt(n / (n + x^2 - 1)): the level at which {T_n >= x} equals
// {S_n / sqrt([S]_n) >= level}.
double t_ratio_level(double x, std::size_t n);

struct TEventPair {
    bool t_event;      // T_n >= x
    bool ratio_event;  // S_n / sqrt([S]_n) >= t_ratio_level(x, n)
};

// Requires x < sqrt(n); the two indicators are equal by monotonicity.
TEventPair t_event_equivalence(std::span<const double> sample, double x);

struct EquivalenceSweep {
    std::uint64_t samples = 0;
    std::uint64_t checks = 0;
    std::uint64_t disagreements = 0;
    std::uint64_t t_hits = 0;
};

// Gaussian samples of size n; every x in x_grid checked on every sample.
EquivalenceSweep t_equivalence_sweep(std::size_t n, std::span<const double> x_grid, std::uint64_t samples,
                                     std::uint64_t seed, unsigned jobs = 1);

struct TStatPoint {
    double x;
    double b;
    double M;
    double bound;
    DominationVerdict verdict;
};

// P(T_n >= x, b <= sqrt([S]_n) <= bM) against the t-statistic bound. The model
// must be heavy on left.
std::vector<TStatPoint> verify_tstat(const DifferenceModel& model, std::size_t n, std::span<const double> x_grid,
                                     std::span<const double> M_grid, double b, const McConfig& cfg);

// ---------------------------------------------------------------------------
// Stochastic linear regression X_{k} = theta phi_{k-1} + eps_k

struct RegressorModel {
    enum class Kind { uniform, constant } kind = Kind::uniform;
    double value = 1.0;  // constant regressor, |value| <= 1

    static RegressorModel uniform_pm1() { return {Kind::uniform, 0.0}; }
    static RegressorModel constant(double v) { return {Kind::constant, v}; }
};

struct RegressionConfig {
    double theta = 0.0;
    RegressorModel phi;
    DifferenceModel eps = DifferenceModel::rademacher();
    std::size_t n = 50;

    // sigma^2 = E[eps^2] and the upper bound y of eps, from the noise model.
    double sigma() const;
    double y() const;
    void validate() const;
};

struct RegressionRun {
    double theta = 0.0;
    std::vector<double> phi;  // phi_0 .. phi_{n-1}
    std::vector<double> eps;  // eps_1 .. eps_n
    std::vector<double> obs;  // X_1 .. X_n
};

RegressionRun make_regression_run(double theta, std::vector<double> phi, std::vector<double> eps);
RegressionRun simulate_regression(const RegressionConfig& cfg, ReplicateId seed);

// sum phi_{k-1} X_k / sum phi_{k-1}^2
double ls_estimate(const RegressionRun& run);

enum class RegressionTheorem { thm32, thm33 };

struct RegressionPoint {
    RegressionTheorem theorem;
    double x;
    double b;  // thm33 only
    double M;  // thm33 only
    double bound;
    double p_star;  // thm32 only
    DominationVerdict verdict;
    std::optional<double> exact;
};

struct RegressionGrid {
    std::vector<double> x;
    std::vector<double> M{1.0, 2.0, 4.0};
    std::optional<double> b;  // default: 10th percentile of sqrt(sum phi^2) from a pilot run
};

std::vector<RegressionPoint> verify_regression(RegressionTheorem thm, const RegressionConfig& cfg,
                                               const RegressionGrid& grid, const McConfig& mc);

// phi == 1 and eps = +-sigma: exact tail probabilities by enumerating the 2^n
// noise signs through ls_estimate.
double exact_regression_tail(std::size_t n, double sigma, double x, std::optional<double> window_lo = std::nullopt,
                             std::optional<double> window_hi = std::nullopt, bool self_normalized = false);

// ---------------------------------------------------------------------------
// Stochastic TSP on uniform points in [0, 1]^d

struct PointSet {
    std::size_t d = 2;
    std::vector<double> coords;  // row-major, n rows of d

    std::size_t size() const { return d == 0 ? 0 : coords.size() / d; }
};

PointSet uniform_points(std::size_t n, std::size_t d, std::uint64_t seed, std::uint64_t replicate);

inline constexpr std::size_t kMaxExactTour = 12;

struct TourResult {
    double length;
    bool exact;  // Held-Karp; false means nearest-neighbour + 2-opt
};

double held_karp_tour(const PointSet& pts);
double two_opt_tour(const PointSet& pts);
TourResult tsp_tour_length(const PointSet& pts);

struct MartingaleDiffs {
    double tour = 0.0;                  // T_n
    std::vector<double> cond_mean;      // E^[T_n | F_i], i = 0..n
    std::vector<double> cond_mean_se;
    std::vector<double> diffs;          // d_1..d_n
    std::vector<double> diffs_se;
};

// Inner Monte Carlo over X_{i+1..n} with exact tours; needs n <= 12 and inner_rep >= 1000.
MartingaleDiffs tsp_martingale_diffs(const PointSet& pts, std::size_t inner_rep, std::uint64_t seed,
                                     unsigned jobs = 1);

// Mean tour length over `reps` independent instances.
MeanAndError tsp_mean_tour(std::size_t n, std::size_t d, std::size_t reps, std::uint64_t seed, unsigned jobs = 1);

struct TspPoint {
    double t;
    double bound;
    DominationVerdict verdict;
    bool empty_window;
};

struct TspVerification {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t instances = 0;
    double mean_tour = 0.0;
    double mean_tour_se = 0.0;
    double c1 = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::size_t in_window = 0;
    std::size_t reconciled = 0;            // instances with |sum d - (T - E^T)| <= 3 combined SE
    std::vector<double> negative_fraction; // per index i, fraction of instances with d_i < 0
    std::vector<TspPoint> points;
};

struct TspConfig {
    std::size_t n = 10;
    std::size_t d = 2;
    std::vector<double> t_grid{0.1, 1.0, 2.0, 3.0, 4.0};
    std::size_t instances = 200;
    std::size_t inner_rep = 2000;
    std::size_t mean_rep = 50000;
    double gamma = 0.99;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::optional<double> c1;  // default: smallest constant with a nonempty window
};

TspVerification verify_tsp(const TspConfig& cfg);

void write_points_csv(const PointSet& pts, const std::string& path);

}  // namespace selfnorm
