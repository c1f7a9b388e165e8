#include "selfnorm/bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <utility>

#include "selfnorm/errors.hpp"

namespace selfnorm {

namespace {

constexpr double kSqrtE = 1.6487212707001282;  // e^{1/2}
constexpr double kSeriesCutoff = 1e-4;

void require_nonneg(double v, const char* what) {
    if (!(v >= 0.0)) {
        throw DomainError(std::string(what) + " must be >= 0");
    }
}

// (1 + 2 (1 + x) ln M): number of geometric slices used by the peeling bounds.
double peeling_factor(double x, double M) { return 1.0 + 2.0 * (1.0 + x) * std::log(M); }

}  // namespace

double psi(double x) {
    require_nonneg(x, "psi: x");
    if (x < kSeriesCutoff) {
        return 1.0 - x / 3.0 + x * x / 6.0;
    }
    return 2.0 * ((1.0 + x) * std::log1p(x) - x) / (x * x);
}

double f_rate(double x, double y) {
    require_nonneg(x, "f_rate: x");
    require_nonneg(y, "f_rate: y");
    if (y == 0.0) return 0.5 * x * x;
    const double u = x * y;
    if (u < kSeriesCutoff) {
        return 0.5 * x * x * (1.0 - u / 3.0 + u * u / 6.0);
    }
    const double l = std::log1p(u);
    return (u * (l - 1.0) + l) / (y * y);
}

double optimal_lambda(double x, double y) {
    if (!(x > 0.0)) throw DomainError("optimal_lambda: x must be > 0");
    require_nonneg(y, "optimal_lambda: y");
    if (y == 0.0) return x;
    return std::log1p(x * y) / y;
}

double optimal_lambda_beta(double x, double beta) {
    if (!(x > 0.0)) throw DomainError("optimal_lambda_beta: x must be > 0");
    if (!(beta > 1.0 && beta < 2.0)) throw DomainError("optimal_lambda_beta: beta must lie in (1, 2)");
    return std::pow(x / beta, 1.0 / (beta - 1.0));
}

double beta_rate(double x, double beta) {
    require_nonneg(x, "beta_rate: x");
    if (!(beta > 1.0 && beta < 2.0)) throw DomainError("beta_rate: beta must lie in (1, 2)");
    return (beta - 1.0) * std::pow(x / beta, beta / (beta - 1.0));
}

double clamp_probability(double value) { return std::clamp(value, 0.0, 1.0); }

namespace {

constexpr std::array<std::pair<BoundKind, std::string_view>, 17> kKindNames{{
    {BoundKind::bernstein, "bernstein"},
    {BoundKind::freedman, "freedman"},
    {BoundKind::dvz, "dvz"},
    {BoundKind::dlp_point, "dlp_point"},
    {BoundKind::dlp_pang, "dlp_pang"},
    {BoundKind::bercu_touati, "bercu_touati"},
    {BoundKind::thm21_point, "thm21_point"},
    {BoundKind::thm22_peeling, "thm22_peeling"},
    {BoundKind::cor22_peeling, "cor22_peeling"},
    {BoundKind::thm25_peeling, "thm25_peeling"},
    {BoundKind::delyon, "delyon"},
    {BoundKind::thm23_exponent, "thm23_exponent"},
    {BoundKind::thm24_peeling, "thm24_peeling"},
    {BoundKind::thm31_tstat, "thm31_tstat"},
    {BoundKind::thm33_regression, "thm33_regression"},
    {BoundKind::thm34_tsp, "thm34_tsp"},
    {BoundKind::azuma_tsp, "azuma_tsp"},
}};

}  // namespace

std::string_view to_string(BoundKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<BoundKind> parse_bound_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

const std::vector<BoundKind>& all_bound_kinds() {
    static const std::vector<BoundKind> kinds = [] {
        std::vector<BoundKind> v;
        for (const auto& entry : kKindNames) v.push_back(entry.first);
        return v;
    }();
    return kinds;
}

std::vector<std::string> RateInputs::range_issues() const {
    std::vector<std::string> issues;
    auto check = [&](const std::optional<double>& v, const char* name, bool ok, const char* range) {
        if (v && (!std::isfinite(*v) || !ok)) {
            issues.push_back(std::string(name) + " = " + std::to_string(*v) + " outside " + range);
        }
    };
    check(x, "x", x && *x >= 0.0, "[0, inf)");
    check(y, "y", y && *y >= 0.0, "[0, inf)");
    check(z, "z", z && *z > 0.0, "(0, inf)");
    check(b, "b", b && *b > 0.0, "(0, inf)");
    check(M, "M", M && *M >= 1.0, "[1, inf)");
    check(beta, "beta", beta && *beta > 1.0 && *beta < 2.0, "(1, 2)");
    check(sigma, "sigma", sigma && *sigma > 0.0, "(0, inf)");
    check(t, "t", t && *t > 0.0, "(0, inf)");
    check(a_bnd, "a_bnd", a_bnd && *a_bnd >= 0.0, "[0, inf)");
    check(L, "L", L && *L > 0.0, "(0, inf)");
    check(q, "q", q && *q >= 1.0, "[1, inf)");
    check(var, "var", var && *var >= 0.0, "[0, inf)");
    check(C, "C", C && *C > 0.0, "(0, inf)");
    if (n && *n < 1) issues.push_back("n = " + std::to_string(*n) + " outside [1, inf)");
    if (d && *d < 2) issues.push_back("d = " + std::to_string(*d) + " outside [2, inf)");
    return issues;
}

const std::vector<std::string>& required_fields(BoundKind kind) {
    static const std::map<BoundKind, std::vector<std::string>> table{
        {BoundKind::bernstein, {"z", "var", "a_bnd"}},
        {BoundKind::freedman, {"x", "L", "a_bnd"}},
        {BoundKind::dvz, {"x", "L", "a_bnd"}},
        {BoundKind::dlp_point, {"x", "y"}},
        {BoundKind::dlp_pang, {"x", "q"}},
        {BoundKind::bercu_touati, {"x", "y", "a_bnd", "b"}},
        {BoundKind::thm21_point, {"x", "y", "z"}},
        {BoundKind::thm22_peeling, {"x", "y", "b", "M"}},
        {BoundKind::cor22_peeling, {"x", "M"}},
        {BoundKind::thm25_peeling, {"x", "M"}},
        {BoundKind::delyon, {"x", "y"}},
        {BoundKind::thm23_exponent, {"x", "beta"}},
        {BoundKind::thm24_peeling, {"x", "beta", "M"}},
        {BoundKind::thm31_tstat, {"x", "n", "M"}},
        {BoundKind::thm33_regression, {"x", "y", "b", "M", "sigma"}},
        {BoundKind::thm34_tsp, {"t", "n", "d"}},
        {BoundKind::azuma_tsp, {"t", "n", "d", "C"}},
    };
    return table.at(kind);
}

namespace {

bool has_field(const RateInputs& p, const std::string& f) {
    if (f == "x") return p.x.has_value();
    if (f == "y") return p.y.has_value();
    if (f == "z") return p.z.has_value();
    if (f == "b") return p.b.has_value();
    if (f == "M") return p.M.has_value();
    if (f == "beta") return p.beta.has_value();
    if (f == "n") return p.n.has_value();
    if (f == "sigma") return p.sigma.has_value();
    if (f == "t") return p.t.has_value();
    if (f == "d") return p.d.has_value();
    if (f == "a_bnd") return p.a_bnd.has_value();
    if (f == "L") return p.L.has_value();
    if (f == "q") return p.q.has_value();
    if (f == "var") return p.var.has_value();
    if (f == "C") return p.C.has_value();
    return false;
}

}  // namespace

BoundSpec::BoundSpec(BoundKind kind, RateInputs params) : kind_(kind), params_(std::move(params)) {
    std::vector<std::string> issues = params_.range_issues();
    for (const auto& f : required_fields(kind_)) {
        if (!has_field(params_, f)) {
            issues.push_back(std::string(to_string(kind_)) + " requires field " + f);
        }
    }
    const auto& p = params_;
    switch (kind_) {
        case BoundKind::dlp_pang:
            if (p.x && *p.x <= 0.0) issues.emplace_back("dlp_pang requires x > 0");
            break;
        case BoundKind::delyon:
            if (p.y && *p.y <= 0.0) issues.emplace_back("delyon requires y > 0");
            break;
        case BoundKind::thm34_tsp:
        case BoundKind::azuma_tsp:
            if (p.n && *p.n < 2) issues.emplace_back(std::string(to_string(kind_)) + " requires n >= 2");
            break;
        default:
            break;
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

double evaluate_bound(const BoundSpec& spec) {
    const RateInputs& p = spec.params();
    switch (spec.kind()) {
        case BoundKind::bernstein: {
            const double z = *p.z;
            return std::exp(-z * z / (2.0 * (*p.var + *p.a_bnd * z / 3.0)));
        }
        case BoundKind::freedman: {
            const double x = *p.x;
            return std::exp(-x * x / (2.0 * (*p.L + *p.a_bnd * x / 3.0)));
        }
        case BoundKind::dvz: {
            const double x = *p.x;
            const double L = *p.L;
            return std::exp(-(x * x / (2.0 * L)) * psi(*p.a_bnd * x / L));
        }
        case BoundKind::dlp_point:
            return std::exp(-0.5 * *p.x * *p.x * *p.y);
        case BoundKind::dlp_pang: {
            const double q = *p.q;
            const double e = q / (2.0 * q - 1.0);
            const double x = *p.x;
            return std::pow(e, e) * std::pow(x, -e) * std::exp(-0.5 * x * x);
        }
        case BoundKind::bercu_touati: {
            const double x = *p.x;
            const double b = *p.b;
            return std::exp(-x * x * (*p.a_bnd * b + 0.5 * b * b * *p.y));
        }
        case BoundKind::thm21_point: {
            const double x = *p.x;
            return std::exp(-x * x * *p.z / (2.0 * (1.0 + x * *p.y / 3.0)));
        }
        case BoundKind::thm22_peeling: {
            const double x = *p.x;
            return kSqrtE * peeling_factor(x, *p.M) *
                   std::exp(-x * x / (2.0 * (1.0 + x * *p.y / (3.0 * *p.b))));
        }
        case BoundKind::cor22_peeling:
        case BoundKind::thm25_peeling: {
            const double x = *p.x;
            return kSqrtE * peeling_factor(x, *p.M) * std::exp(-0.5 * x * x);
        }
        case BoundKind::delyon:
            return std::exp(-*p.x * *p.x / (2.0 * *p.y));
        case BoundKind::thm23_exponent:
            return beta_rate(*p.x, *p.beta);
        case BoundKind::thm24_peeling: {
            const double x = *p.x;
            const double beta = *p.beta;
            return peeling_factor(x, *p.M) *
                   std::exp(-std::pow(x / beta, beta / (beta - 1.0)) * (1.0 - 1.0 / beta));
        }
        case BoundKind::thm31_tstat: {
            const double x = *p.x;
            const double n = static_cast<double>(*p.n);
            const double denom = n + x * x - 1.0;
            const double xt = x * std::sqrt(n / denom);
            return kSqrtE * peeling_factor(xt, *p.M) * std::exp(-n * x * x / (2.0 * denom));
        }
        case BoundKind::thm33_regression: {
            const double x = *p.x;
            const double s = *p.sigma;
            return 2.0 * kSqrtE * peeling_factor(x / s, *p.M) *
                   std::exp(-x * x / (2.0 * (s * s + x * *p.y / (3.0 * *p.b))));
        }
        case BoundKind::thm34_tsp: {
            const double t = *p.t;
            const double n = static_cast<double>(*p.n);
            const double d = static_cast<double>(*p.d);
            return kSqrtE * (1.0 + (2.0 / d) * (1.0 + t) * std::log(n)) * std::exp(-0.5 * t * t);
        }
        case BoundKind::azuma_tsp: {
            const double t = *p.t;
            const double n = static_cast<double>(*p.n);
            const long d = *p.d;
            const double scale = d == 2 ? std::log(n) : std::pow(n, static_cast<double>(d - 2) / d);
            return std::exp(-t * t / (*p.C * scale));
        }
    }
    throw DomainError("evaluate_bound: unknown kind");
}

double thm24_peeling_conservative(double x, double beta, double M) {
    if (!(x > 0.0)) throw DomainError("thm24_peeling_conservative: x must be > 0");
    if (!(beta > 1.0 && beta < 2.0)) throw DomainError("thm24_peeling_conservative: beta must lie in (1, 2)");
    if (!(M >= 1.0)) throw DomainError("thm24_peeling_conservative: M must be >= 1");
    const double a = 1.0 + (beta - 1.0) / (1.0 + x);
    const double slices = 1.0 + std::ceil(std::log(M) / std::log(a));
    return slices * std::exp(-std::pow(x / beta, beta / (beta - 1.0)) * (1.0 - 1.0 / beta));
}

}  // namespace selfnorm
