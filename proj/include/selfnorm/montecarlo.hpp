#pragma once

// Empirical side of the inequalities: tail-event estimates with exact binomial
// intervals, expectation-type bounds optimised over the Hoelder exponent p,
// supermartingale mean checks, and a brute-force oracle over Rademacher signs.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfnorm/processes.hpp"

namespace selfnorm {

// Statistics a tail event can normalise by or window on.
enum class Stat {
    unit,           // 1 (plain S_n >= x)
    b_n,            // B_n(y)
    sqrt_b_n,
    sq_var,         // [S]_n
    sqrt_sq_var,
    cond_var,       // <S>_n
    sqrt_cond_var,
    h_n,            // H_n^a
    g_n,            // G_n(beta)
    g_n_root,       // G_n(beta)^{1/beta}
};

std::string_view to_string(Stat s);

// Value of a statistic; throws UnsupportedStatistic when the path summary
// lacks it (infinite conditional moment, or beta not requested).
double stat_value(const PathStats& st, Stat s, std::optional<double> beta = std::nullopt);

struct Window {
    Stat stat;
    double lo;  // inclusive
    double hi;  // inclusive
};

// {S_n >= x (offset + scale N)} (or > when strict) intersected with an optional window lo <= W <= hi.
// A ratio event with a zero normaliser is false.
struct TailEvent {
    Stat normalizer = Stat::unit;
    double x = 0.0;
    double offset = 0.0;
    double scale = 1.0;
    std::optional<Window> window;
    double y = 0.0;               // truncation level for B_n(y)
    double a = 0.0;               // level for H_n^a
    std::optional<double> beta;   // for G_n(beta)
    bool strict = false;          // S_n > rhs instead of S_n >= rhs

    bool operator()(const PathStats& st) const;
    StatsRequest request() const { return StatsRequest{y, a, beta}; }
};

struct MCEstimate {
    std::uint64_t n_rep = 0;
    std::uint64_t hits = 0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
    double gamma = 0.99;
};

MCEstimate make_estimate(std::uint64_t hits, std::uint64_t n_rep, double gamma);

struct McConfig {
    std::uint64_t n_rep = 100000;
    double gamma = 0.99;
    std::uint64_t master_seed = 0;
    unsigned jobs = 1;
};

MCEstimate estimate_tail(const DifferenceModel& model, std::size_t n, const TailEvent& event, const McConfig& cfg);

// Several events on the same replicate paths. Events may use different
// StatsRequests; each distinct request is summarised once per path.
std::vector<MCEstimate> estimate_tails(const DifferenceModel& model, std::size_t n, std::span<const TailEvent> events,
                                       const McConfig& cfg);

// Calls body(r, xs) for replicates r in [0, cfg.n_rep), each path drawn from
// ReplicateId{cfg.master_seed, r}; chunked over cfg.jobs threads.
void for_each_replicate(const DifferenceModel& model, std::size_t n, const McConfig& cfg,
                        const std::function<void(std::size_t, std::span<const double>)>& body);

// Every replicate path summarised under one request, in replicate order.
std::vector<PathStats> simulate_stats(const DifferenceModel& model, std::size_t n, const StatsRequest& request,
                                      const McConfig& cfg);

struct ExactProbability {
    std::uint64_t hits;
    std::uint64_t total;  // 2^n
    double value() const { return static_cast<double>(hits) / static_cast<double>(total); }
};

inline constexpr std::size_t kMaxExactN = 20;

// Enumerates all 2^n Rademacher sign sequences (n <= 20) with exact
// conditional moments E[xi^2 | F] = 1, E[(xi^-)^2 | F] = 1/2.
ExactProbability exact_tail_rademacher(std::size_t n, const TailEvent& event);

// Calls visit(stats) for each of the 2^n sign sequences, in bitmask order.
void enumerate_rademacher(std::size_t n, const StatsRequest& request, const std::function<void(const PathStats&)>& visit);

// E[g(PathStats)] over the 2^n equally likely sign sequences.
double exact_mean_rademacher(std::size_t n, const StatsRequest& request,
                             const std::function<double(const PathStats&)>& g);

// Which rate/normaliser pair an expectation bound uses.
enum class RateKind {
    bracket,  // f(x, y) with B_n(y)
    beta,     // (beta - 1)(x/beta)^{beta/(beta-1)} with G_n(beta)
};

// Weighted sample of (normaliser, event indicator) pairs. The p-objective is
//   V(p) = (sum_i w_i exp(-(p-1) rate N_i) 1_i)^{1/p}
// and all evaluations reuse the same sample (common random numbers).
class ExpectationObjective {
public:
    ExpectationObjective(double rate, std::vector<double> weights, std::vector<double> normalizers,
                         std::vector<char> indicators, bool equal_weights);

    double rate() const noexcept { return rate_; }

    struct Value {
        double value;
        double std_error;  // delta-method, 0 for exact (weighted) samples
    };

    Value evaluate(double p, bool use_indicator) const;

    struct Optimum {
        double p_star;
        double value;
        double std_error;
    };

    // Golden-section search on ln(p-1) over [ln 1e-3, ln(p_max - 1)], 60 iterations.
    Optimum minimize(bool use_indicator, double p_max = 51.0) const;

private:
    double rate_;
    std::vector<double> weights_;
    std::vector<double> normalizers_;
    std::vector<char> indicators_;
    bool equal_weights_;
};

struct ExpectationSetup {
    RateKind kind = RateKind::bracket;
    double x = 0.0;
    double y_or_beta = 0.0;  // y for bracket, beta for beta
};

// Rate f(x, y) or the beta rate, and the event {S_n >= x N}.
double setup_rate(const ExpectationSetup& setup);
StatsRequest setup_request(const ExpectationSetup& setup);
TailEvent setup_event(const ExpectationSetup& setup);

ExpectationObjective sample_objective(const DifferenceModel& model, std::size_t n, const ExpectationSetup& setup,
                                      const McConfig& cfg);
ExpectationObjective exact_objective_rademacher(std::size_t n, const ExpectationSetup& setup);

ExpectationObjective::Value expectation_bound(const DifferenceModel& model, std::size_t n,
                                              const ExpectationSetup& setup, double p, bool indicator,
                                              const McConfig& cfg);
ExpectationObjective::Optimum optimize_over_p(const DifferenceModel& model, std::size_t n,
                                              const ExpectationSetup& setup, bool indicator, const McConfig& cfg);

enum class VerdictStatus { pass, violation_evidence, vacuous };

std::string_view to_string(VerdictStatus s);

struct DominationVerdict {
    double bound_value = 0.0;
    MCEstimate estimate;
    VerdictStatus status = VerdictStatus::pass;
    double margin = 0.0;  // bound_value - ci_lo
};

DominationVerdict domination_check(const MCEstimate& estimate, double bound);

enum class Supermartingale {
    U,  // exp{lambda S_n - ((e^{lambda y} - 1 - lambda y)/y^2) B_n(y)}
    V,  // exp{lambda S_n - lambda^beta G_n(beta)}
};

struct MeanCheck {
    double mean = 0.0;
    double std_error = 0.0;
    double sample_max = 0.0;
    std::uint64_t n_rep = 0;
    VerdictStatus status = VerdictStatus::pass;  // pass iff mean - 3 SE <= 1
};

// Coefficient (e^{lambda y} - 1 - lambda y) / y^2, lambda^2 / 2 at y = 0.
double u_coefficient(double lambda, double y);

double supermartingale_value(Supermartingale kind, const PathStats& st, double lambda, double y_or_beta);

MeanCheck supermartingale_check(Supermartingale kind, const DifferenceModel& model, std::size_t n, double lambda,
                                double y_or_beta, const McConfig& cfg);

double exact_supermartingale_mean_rademacher(Supermartingale kind, std::size_t n, double lambda, double y_or_beta);

}  // namespace selfnorm
