#pragma once

// Martingale-difference models and the bracket processes built from a path.
//
// Differences are i.i.d. within a path under the natural filtration, so every
// conditional moment E[g(xi_i) | F_{i-1}] is the model's unconditional moment
// and is taken from its closed form, never from sample averages.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace selfnorm {

struct Rademacher {};

// up with probability p_up, down otherwise; p_up * up + (1 - p_up) * down = 0.
struct ScaledTwoPoint {
    double p_up;
    double up;
    double down;
};

enum class CappedBase {
    reflected_exponential,  // y_cap * (1 - E), E ~ Exp(1): unbounded below
    uniform,                // Uniform[-y_cap, y_cap]
};

struct BoundedAbove {
    double y_cap;
    CappedBase base;
};

// Symmetric two-sided Pareto: P(|xi| > t) = (scale / t)^beta_tail for t >= scale.
// E|xi|^beta < inf exactly when beta < beta_tail.
struct CenteredPareto {
    double beta_tail;
    double scale;
};

struct Gaussian {
    double sd;
};

// +-scales[k] with probability weights[k] / 2 each.
struct SymmetricMixture {
    std::vector<double> weights;
    std::vector<double> scales;
};

// Hypotheses a family satisfies, as used by the theorems.
struct Preconditions {
    bool square_integrable;
    bool conditionally_symmetric;
    bool heavy_on_left;
    std::optional<double> upper_bound;  // sup of the support
    std::optional<double> abs_bound;    // sup |xi|
    double beta_moment_limit;           // E|xi|^beta < inf for beta < this (inf when all moments exist)
};

class DifferenceModel {
public:
    using Family = std::variant<Rademacher, ScaledTwoPoint, BoundedAbove, CenteredPareto, Gaussian, SymmetricMixture>;

    static DifferenceModel rademacher();
    static DifferenceModel scaled_two_point(double p_up, double up, double down);
    static DifferenceModel bounded_above(double y_cap, CappedBase base);
    static DifferenceModel centered_pareto(double beta_tail, double scale = 1.0);
    static DifferenceModel gaussian(double sd);
    static DifferenceModel symmetric_mixture(std::vector<double> weights, std::vector<double> scales);

    const Family& family() const noexcept { return family_; }
    std::string name() const;
    Preconditions preconditions() const;

    // One draw from two independent 64-bit words.
    double sample(std::uint64_t w0, std::uint64_t w1) const;

    // Closed-form moments; empty when infinite.
    std::optional<double> second_moment() const;                 // E[xi^2]
    std::optional<double> second_moment_below(double y) const;   // E[xi^2 1{xi <= y}]
    std::optional<double> neg_second_moment() const;             // E[(xi^-)^2]
    std::optional<double> neg_beta_moment(double beta) const;    // E[(xi^-)^beta]
    std::optional<double> truncated_mean_closed_form(double a) const;

    // Density for families without a closed-form truncated mean.
    std::optional<double> density(double u) const;

private:
    explicit DifferenceModel(Family f) : family_(std::move(f)) {}
    Family family_;
};

struct ReplicateId {
    std::uint64_t master_seed = 0;
    std::uint64_t replicate = 0;
};

struct Path {
    std::vector<double> xs;
    DifferenceModel model;
    ReplicateId seed;
};

// Deterministic in (model, n, seed): step i of replicate r uses the Philox
// block addressed by (master_seed, r, i).
Path sample_path(const DifferenceModel& model, std::size_t n, ReplicateId seed);
void sample_into(const DifferenceModel& model, ReplicateId seed, std::span<double> out);

struct StatsRequest {
    double y = 0.0;                 // truncation level for [S]_n(y), <S>_n(y), B_n(y)
    double a = 0.0;                 // level for H_n^a
    std::optional<double> beta;     // compute G_n(beta) when set
};

// Bracket processes of one path. Fields that need an infinite conditional
// moment are empty.
struct PathStats {
    double s_n = 0.0;
    double sq_var = 0.0;          // [S]_n
    double sq_var_above = 0.0;    // [S]_n(y) = sum xi^2 1{xi > y}
    double sq_var_below = 0.0;    // sum xi^2 1{xi <= y}
    double pos_sq = 0.0;          // [S]_n^+
    double abs_above_a = 0.0;     // sum xi^2 1{|xi| > a}
    std::optional<double> cond_var;        // <S>_n
    std::optional<double> cond_var_below;  // <S>_n(y)
    std::optional<double> b_n;             // B_n(y)
    std::optional<double> h_n;             // H_n^a
    std::optional<double> neg_cond;        // <S>_n^-
    std::optional<double> pos_beta;        // [S]_n^+(beta)
    std::optional<double> neg_cond_beta;   // <S>_n^-(beta)
    std::optional<double> g_n;             // G_n(beta)
};

// Precomputes the model's conditional moments for a request so that many
// paths can be summarised cheaply.
class StatsCalculator {
public:
    // Throws UnsupportedStatistic when beta is requested but E[(xi^-)^beta] is infinite.
    StatsCalculator(const DifferenceModel& model, StatsRequest request);

    PathStats operator()(std::span<const double> xs) const;
    const StatsRequest& request() const noexcept { return request_; }

private:
    StatsRequest request_;
    std::optional<double> m2_;
    std::optional<double> m2_below_;
    std::optional<double> neg2_;
    std::optional<double> neg_beta_;
};

PathStats path_stats(const Path& path, const StatsRequest& request);

// E[min(|X|, a) sign(X)]: closed form when the family has one, otherwise
// adaptive Gauss-Kronrod quadrature against the density.
double truncated_mean(const DifferenceModel& model, double a);

struct HeavyOnLeftVerdict {
    bool pass;
    double worst_a;
    double worst_value;  // largest truncated mean over the grid
};

HeavyOnLeftVerdict heavy_on_left_verdict(const DifferenceModel& model, std::span<const double> a_grid);

}  // namespace selfnorm
