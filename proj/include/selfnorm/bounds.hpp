#pragma once

// Closed-form rate functions and tail bounds for (self-normalized) martingales.
//
// Everything here is a pure function of its arguments. Bounds above 1 are
// returned as computed; use clamp_probability() when a probability is wanted
// for display.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace selfnorm {

// psi(x) = (2/x^2) * integral_0^x ln(1+u) du, evaluated in closed form.
// psi(0) = 1; psi is decreasing with values in (0, 1].
double psi(double x);

// Rate f(x, y) = [xy(ln(xy+1) - 1) + ln(xy+1)] / y^2, with f(x, 0) = x^2/2.
// Equals x^2 psi(xy) / 2.
double f_rate(double x, double y);

// Minimiser over lambda >= 0 of (e^{lambda y} - 1 - lambda y)/y^2 - lambda x.
double optimal_lambda(double x, double y);

// Maximiser over lambda > 0 of lambda x - lambda^beta, for beta in (1, 2).
double optimal_lambda_beta(double x, double beta);

// Exponent coefficient c(x, beta) = (beta - 1) (x/beta)^{beta/(beta-1)} so that
// the beta-moment bounds decay like exp(-c G_n(beta)).
double beta_rate(double x, double beta);

double clamp_probability(double value);

enum class BoundKind {
    bernstein,
    freedman,
    dvz,
    dlp_point,
    dlp_pang,
    bercu_touati,
    thm21_point,
    thm22_peeling,
    cor22_peeling,
    thm25_peeling,
    delyon,
    thm23_exponent,
    thm24_peeling,
    thm31_tstat,
    thm33_regression,
    thm34_tsp,
    azuma_tsp,
};

std::string_view to_string(BoundKind kind);
std::optional<BoundKind> parse_bound_kind(std::string_view name);
const std::vector<BoundKind>& all_bound_kinds();

// Parameters shared by the bound catalogue. A field left empty is "absent";
// which fields a kind reads is fixed by required_fields().
struct RateInputs {
    std::optional<double> x;      // deviation level, >= 0
    std::optional<double> y;      // truncation / upper-bound level, >= 0
    std::optional<double> z;      // variance-process level, > 0
    std::optional<double> b;      // peeling base scale, > 0
    std::optional<double> M;      // peeling range ratio, >= 1
    std::optional<double> beta;   // moment order, in (1, 2)
    std::optional<long> n;        // sample size, >= 1
    std::optional<double> sigma;  // noise standard deviation, > 0
    std::optional<double> t;      // TSP deviation level, > 0
    std::optional<long> d;        // TSP dimension, >= 2
    std::optional<double> a_bnd;  // |xi| bound (Bernstein/Freedman/DvZ) or Bercu-Touati offset, >= 0
    std::optional<double> L;      // variance cap, > 0
    std::optional<double> q;      // Hoelder exponent, >= 1
    std::optional<double> var;    // var(S_n) for Bernstein, >= 0
    std::optional<double> C;      // Azuma constant, > 0

    // Range problems for the fields that are present.
    std::vector<std::string> range_issues() const;
};

class BoundSpec {
public:
    // Throws ValidationError naming every missing or out-of-range field.
    BoundSpec(BoundKind kind, RateInputs params);

    BoundKind kind() const noexcept { return kind_; }
    const RateInputs& params() const noexcept { return params_; }

private:
    BoundKind kind_;
    RateInputs params_;
};

// Field names read by a kind, e.g. {"x", "L", "a_bnd"} for freedman.
const std::vector<std::string>& required_fields(BoundKind kind);

// Right-hand side of the inequality named by spec.kind(). For thm23_exponent
// this is the decay coefficient beta_rate(x, beta), not a probability.
double evaluate_bound(const BoundSpec& spec);

// thm24_peeling with the slice count taken from the actual geometric ratio
// a = 1 + (beta-1)/(1+x): (1 + ceil(log_a M)) exp(-(x/beta)^{beta/(beta-1)} (1 - 1/beta)).
double thm24_peeling_conservative(double x, double beta, double M);

}  // namespace selfnorm
