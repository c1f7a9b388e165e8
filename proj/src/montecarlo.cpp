#include "selfnorm/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "selfnorm/bounds.hpp"
#include "selfnorm/errors.hpp"
#include "selfnorm/stats.hpp"

namespace selfnorm {

std::string_view to_string(Stat s) {
    switch (s) {
        case Stat::unit: return "unit";
        case Stat::b_n: return "b_n";
        case Stat::sqrt_b_n: return "sqrt_b_n";
        case Stat::sq_var: return "sq_var";
        case Stat::sqrt_sq_var: return "sqrt_sq_var";
        case Stat::cond_var: return "cond_var";
        case Stat::sqrt_cond_var: return "sqrt_cond_var";
        case Stat::h_n: return "h_n";
        case Stat::g_n: return "g_n";
        case Stat::g_n_root: return "g_n_root";
    }
    return "unknown";
}

namespace {

double need(const std::optional<double>& v, Stat s) {
    if (!v) throw UnsupportedStatistic(std::string("statistic ") + std::string(to_string(s)) + " is not available for this model");
    return *v;
}

}  // namespace

double stat_value(const PathStats& st, Stat s, std::optional<double> beta) {
    switch (s) {
        case Stat::unit: return 1.0;
        case Stat::b_n: return need(st.b_n, s);
        case Stat::sqrt_b_n: return std::sqrt(need(st.b_n, s));
        case Stat::sq_var: return st.sq_var;
        case Stat::sqrt_sq_var: return std::sqrt(st.sq_var);
        case Stat::cond_var: return need(st.cond_var, s);
        case Stat::sqrt_cond_var: return std::sqrt(need(st.cond_var, s));
        case Stat::h_n: return need(st.h_n, s);
        case Stat::g_n: return need(st.g_n, s);
        case Stat::g_n_root: {
            if (!beta) throw UnsupportedStatistic("g_n_root needs beta");
            return std::pow(need(st.g_n, s), 1.0 / *beta);
        }
    }
    throw UnsupportedStatistic("unknown statistic");
}

bool TailEvent::operator()(const PathStats& st) const {
    if (window) {
        const double w = stat_value(st, window->stat, beta);
        if (w < window->lo || w > window->hi) return false;
    }
    double rhs = x * (offset + scale);
    if (normalizer != Stat::unit) {
        const double nrm = stat_value(st, normalizer, beta);
        if (nrm == 0.0) return false;
        rhs = x * (offset + scale * nrm);
    }
    return strict ? st.s_n > rhs : st.s_n >= rhs;
}

MCEstimate make_estimate(std::uint64_t hits, std::uint64_t n_rep, double gamma) {
    const auto ci = clopper_pearson(hits, n_rep, gamma);
    MCEstimate e;
    e.n_rep = n_rep;
    e.hits = hits;
    e.p_hat = static_cast<double>(hits) / static_cast<double>(n_rep);
    e.ci_lo = std::min(ci.lo, e.p_hat);
    e.ci_hi = std::max(ci.hi, e.p_hat);
    e.gamma = gamma;
    return e;
}

namespace {

void check_config(const McConfig& cfg, std::uint64_t min_rep) {
    if (cfg.n_rep < min_rep) {
        throw DomainError("n_rep must be >= " + std::to_string(min_rep) + ", got " + std::to_string(cfg.n_rep));
    }
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
}

using RequestKey = std::tuple<double, double, double>;

RequestKey key_of(const StatsRequest& r) { return {r.y, r.a, r.beta.value_or(-1.0)}; }

}  // namespace

void for_each_replicate(const DifferenceModel& model, std::size_t n, const McConfig& cfg,
                        const std::function<void(std::size_t, std::span<const double>)>& body) {
    if (n == 0) throw DomainError("path length n must be >= 1");
    if (cfg.n_rep == 0) return;
    const unsigned jobs = std::max(1u, cfg.jobs);
    const std::size_t chunks = std::min<std::size_t>(jobs, cfg.n_rep);
    const std::size_t per = (cfg.n_rep + chunks - 1) / chunks;
    parallel_for(chunks, jobs, [&](std::size_t c) {
        std::vector<double> xs(n);
        const std::size_t begin = c * per;
        const std::size_t end = std::min<std::size_t>(cfg.n_rep, begin + per);
        for (std::size_t r = begin; r < end; ++r) {
            sample_into(model, ReplicateId{cfg.master_seed, r}, xs);
            body(r, std::span<const double>(xs));
        }
    });
}

std::vector<MCEstimate> estimate_tails(const DifferenceModel& model, std::size_t n, std::span<const TailEvent> events,
                                       const McConfig& cfg) {
    check_config(cfg, 100);
    std::map<RequestKey, std::size_t> group_of;
    std::vector<StatsCalculator> calcs;
    std::vector<std::size_t> event_group;
    for (const auto& ev : events) {
        const auto key = key_of(ev.request());
        auto it = group_of.find(key);
        if (it == group_of.end()) {
            it = group_of.emplace(key, calcs.size()).first;
            calcs.emplace_back(model, ev.request());
        }
        event_group.push_back(it->second);
    }
    std::vector<char> hit(events.size() * cfg.n_rep, 0);
    for_each_replicate(model, n, cfg, [&](std::size_t r, std::span<const double> xs) {
        std::vector<PathStats> st;
        st.reserve(calcs.size());
        for (const auto& c : calcs) st.push_back(c(xs));
        for (std::size_t e = 0; e < events.size(); ++e) {
            hit[e * cfg.n_rep + r] = events[e](st[event_group[e]]) ? 1 : 0;
        }
    });
    std::vector<MCEstimate> out;
    out.reserve(events.size());
    for (std::size_t e = 0; e < events.size(); ++e) {
        const auto first = hit.begin() + static_cast<std::ptrdiff_t>(e * cfg.n_rep);
        const auto hits = static_cast<std::uint64_t>(std::count(first, first + static_cast<std::ptrdiff_t>(cfg.n_rep), 1));
        out.push_back(make_estimate(hits, cfg.n_rep, cfg.gamma));
    }
    return out;
}

MCEstimate estimate_tail(const DifferenceModel& model, std::size_t n, const TailEvent& event, const McConfig& cfg) {
    return estimate_tails(model, n, std::span<const TailEvent>(&event, 1), cfg).front();
}

std::vector<PathStats> simulate_stats(const DifferenceModel& model, std::size_t n, const StatsRequest& request,
                                      const McConfig& cfg) {
    check_config(cfg, 1);
    const StatsCalculator calc(model, request);
    std::vector<PathStats> out(cfg.n_rep);
    for_each_replicate(model, n, cfg, [&](std::size_t r, std::span<const double> xs) { out[r] = calc(xs); });
    return out;
}

void enumerate_rademacher(std::size_t n, const StatsRequest& request,
                          const std::function<void(const PathStats&)>& visit) {
    if (n == 0) throw DomainError("enumerate_rademacher: n must be >= 1");
    if (n > kMaxExactN) {
        throw SizeError("exact enumeration supports n <= " + std::to_string(kMaxExactN) + ", got " + std::to_string(n));
    }
    const StatsCalculator calc(DifferenceModel::rademacher(), request);
    std::vector<double> xs(n);
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        for (std::size_t i = 0; i < n; ++i) xs[i] = ((mask >> i) & 1u) ? 1.0 : -1.0;
        visit(calc(xs));
    }
}

ExactProbability exact_tail_rademacher(std::size_t n, const TailEvent& event) {
    std::uint64_t hits = 0;
    enumerate_rademacher(n, event.request(), [&](const PathStats& st) {
        if (event(st)) ++hits;
    });
    return {hits, std::uint64_t{1} << n};
}

double exact_mean_rademacher(std::size_t n, const StatsRequest& request,
                             const std::function<double(const PathStats&)>& g) {
    std::vector<double> vals;
    vals.reserve(std::size_t{1} << std::min(n, kMaxExactN));
    enumerate_rademacher(n, request, [&](const PathStats& st) { vals.push_back(g(st)); });
    return pairwise_sum(vals) / static_cast<double>(vals.size());
}

ExpectationObjective::ExpectationObjective(double rate, std::vector<double> weights, std::vector<double> normalizers,
                                           std::vector<char> indicators, bool equal_weights)
    : rate_(rate),
      weights_(std::move(weights)),
      normalizers_(std::move(normalizers)),
      indicators_(std::move(indicators)),
      equal_weights_(equal_weights) {
    if (weights_.size() != normalizers_.size() || weights_.size() != indicators_.size() || weights_.empty()) {
        throw DomainError("ExpectationObjective: sample arrays must be nonempty and of equal length");
    }
    if (!(rate_ >= 0.0)) throw DomainError("ExpectationObjective: rate must be >= 0");
}

ExpectationObjective::Value ExpectationObjective::evaluate(double p, bool use_indicator) const {
    if (!(p > 1.0)) throw DomainError("expectation bound: p must be > 1");
    const std::size_t m = weights_.size();
    std::vector<double> terms(m);
    for (std::size_t i = 0; i < m; ++i) {
        const bool on = !use_indicator || indicators_[i];
        terms[i] = on ? std::exp(-(p - 1.0) * rate_ * normalizers_[i]) : 0.0;
        if (!equal_weights_) terms[i] *= weights_[i];
    }
    double mean = 0.0;
    double se = 0.0;
    if (equal_weights_) {
        const auto me = mean_and_error(terms);
        mean = me.mean;
        se = me.std_error;
    } else {
        mean = pairwise_sum(terms);
    }
    if (mean <= 0.0) return {0.0, 0.0};
    const double value = std::pow(mean, 1.0 / p);
    return {value, value / (p * mean) * se};
}

ExpectationObjective::Optimum ExpectationObjective::minimize(bool use_indicator, double p_max) const {
    if (!(p_max > 1.0 + 1e-3)) throw DomainError("expectation bound: p_max must exceed 1.001");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    const double u_min = std::log(1e-3);
    const double u_max = std::log(p_max - 1.0);
    Optimum best{0.0, std::numeric_limits<double>::infinity(), 0.0};
    auto eval = [&](double u) {
        const double p = 1.0 + std::exp(u);
        const auto v = evaluate(p, use_indicator);
        if (v.value < best.value) best = {p, v.value, v.std_error};
        return v.value;
    };

    // coarse scan to bracket the global minimum
    constexpr int kScan = 48;
    const double step = (u_max - u_min) / kScan;
    int k_best = 0;
    double f_best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kScan; ++k) {
        const double f = eval(u_min + step * k);
        if (f < f_best) {
            f_best = f;
            k_best = k;
        }
    }
    double lo = u_min + step * std::max(k_best - 1, 0);
    double hi = u_min + step * std::min(k_best + 1, kScan);

    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double fc = eval(c);
    double fd = eval(d);
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = eval(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = eval(d);
        }
    }

    // halve or double p - 1 while that improves
    for (int it = 0; it < 60; ++it) {
        const double u = std::log(best.p_star - 1.0);
        const double before = best.value;
        if (u - std::log(2.0) >= u_min) eval(u - std::log(2.0));
        if (u + std::log(2.0) <= u_max) eval(u + std::log(2.0));
        if (!(best.value < before)) break;
    }
    return best;
}

double setup_rate(const ExpectationSetup& setup) {
    return setup.kind == RateKind::bracket ? f_rate(setup.x, setup.y_or_beta) : beta_rate(setup.x, setup.y_or_beta);
}

StatsRequest setup_request(const ExpectationSetup& setup) {
    if (setup.kind == RateKind::bracket) return StatsRequest{setup.y_or_beta, 0.0, std::nullopt};
    return StatsRequest{0.0, 0.0, setup.y_or_beta};
}

TailEvent setup_event(const ExpectationSetup& setup) {
    TailEvent ev;
    ev.x = setup.x;
    if (setup.kind == RateKind::bracket) {
        ev.normalizer = Stat::b_n;
        ev.y = setup.y_or_beta;
    } else {
        ev.normalizer = Stat::g_n;
        ev.beta = setup.y_or_beta;
    }
    return ev;
}

namespace {

double setup_normalizer(const ExpectationSetup& setup, const PathStats& st) {
    return setup.kind == RateKind::bracket ? stat_value(st, Stat::b_n) : stat_value(st, Stat::g_n);
}

}  // namespace

ExpectationObjective sample_objective(const DifferenceModel& model, std::size_t n, const ExpectationSetup& setup,
                                      const McConfig& cfg) {
    const double rate = setup_rate(setup);
    const TailEvent ev = setup_event(setup);
    const auto stats = simulate_stats(model, n, setup_request(setup), cfg);
    std::vector<double> w(stats.size(), 1.0 / static_cast<double>(stats.size()));
    std::vector<double> nrm(stats.size());
    std::vector<char> ind(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        nrm[i] = setup_normalizer(setup, stats[i]);
        ind[i] = ev(stats[i]) ? 1 : 0;
    }
    return ExpectationObjective(rate, std::move(w), std::move(nrm), std::move(ind), true);
}

ExpectationObjective exact_objective_rademacher(std::size_t n, const ExpectationSetup& setup) {
    const double rate = setup_rate(setup);
    const TailEvent ev = setup_event(setup);
    std::vector<double> nrm;
    std::vector<char> ind;
    enumerate_rademacher(n, setup_request(setup), [&](const PathStats& st) {
        nrm.push_back(setup_normalizer(setup, st));
        ind.push_back(ev(st) ? 1 : 0);
    });
    std::vector<double> w(nrm.size(), 1.0 / static_cast<double>(nrm.size()));
    return ExpectationObjective(rate, std::move(w), std::move(nrm), std::move(ind), false);
}

ExpectationObjective::Value expectation_bound(const DifferenceModel& model, std::size_t n,
                                              const ExpectationSetup& setup, double p, bool indicator,
                                              const McConfig& cfg) {
    if (!(p > 1.0)) throw DomainError("expectation_bound: p must be > 1");
    return sample_objective(model, n, setup, cfg).evaluate(p, indicator);
}

ExpectationObjective::Optimum optimize_over_p(const DifferenceModel& model, std::size_t n,
                                              const ExpectationSetup& setup, bool indicator, const McConfig& cfg) {
    return sample_objective(model, n, setup, cfg).minimize(indicator);
}

std::string_view to_string(VerdictStatus s) {
    switch (s) {
        case VerdictStatus::pass: return "pass";
        case VerdictStatus::violation_evidence: return "violation_evidence";
        case VerdictStatus::vacuous: return "vacuous";
    }
    return "unknown";
}

DominationVerdict domination_check(const MCEstimate& estimate, double bound) {
    if (!(bound >= 0.0)) throw DomainError("domination_check: bound must be >= 0");
    DominationVerdict v;
    v.bound_value = bound;
    v.estimate = estimate;
    v.margin = bound - estimate.ci_lo;
    if (estimate.ci_lo > bound) {
        v.status = VerdictStatus::violation_evidence;
    } else if (bound >= 1.0) {
        v.status = VerdictStatus::vacuous;
    } else {
        v.status = VerdictStatus::pass;
    }
    return v;
}

double u_coefficient(double lambda, double y) {
    if (y == 0.0) return 0.5 * lambda * lambda;
    const double u = lambda * y;
    if (std::abs(u) < 1e-4) return 0.5 * lambda * lambda * (1.0 + u / 3.0 + u * u / 12.0);
    return (std::expm1(u) - u) / (y * y);
}

double supermartingale_value(Supermartingale kind, const PathStats& st, double lambda, double y_or_beta) {
    if (kind == Supermartingale::U) {
        return std::exp(lambda * st.s_n - u_coefficient(lambda, y_or_beta) * stat_value(st, Stat::b_n));
    }
    return std::exp(lambda * st.s_n - std::pow(lambda, y_or_beta) * stat_value(st, Stat::g_n));
}

namespace {

StatsRequest supermartingale_request(Supermartingale kind, double y_or_beta) {
    if (kind == Supermartingale::U) {
        if (!(y_or_beta >= 0.0)) throw DomainError("supermartingale U: y must be >= 0");
        return StatsRequest{y_or_beta, 0.0, std::nullopt};
    }
    if (!(y_or_beta > 1.0 && y_or_beta < 2.0)) throw DomainError("supermartingale V: beta must lie in (1, 2)");
    return StatsRequest{0.0, 0.0, y_or_beta};
}

}  // namespace

MeanCheck supermartingale_check(Supermartingale kind, const DifferenceModel& model, std::size_t n, double lambda,
                                double y_or_beta, const McConfig& cfg) {
    if (!(lambda > 0.0)) throw DomainError("supermartingale_check: lambda must be > 0");
    if (kind == Supermartingale::U && !model.preconditions().square_integrable) {
        throw UnsupportedStatistic("U_n(lambda) needs a square-integrable model; " + model.name() + " is not");
    }
    const auto stats = simulate_stats(model, n, supermartingale_request(kind, y_or_beta), cfg);
    std::vector<double> vals(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) vals[i] = supermartingale_value(kind, stats[i], lambda, y_or_beta);
    const auto me = mean_and_error(vals);
    MeanCheck out;
    out.mean = me.mean;
    out.std_error = me.std_error;
    out.sample_max = *std::max_element(vals.begin(), vals.end());
    out.n_rep = vals.size();
    out.status = (me.mean - 3.0 * me.std_error <= 1.0) ? VerdictStatus::pass : VerdictStatus::violation_evidence;
    return out;
}

double exact_supermartingale_mean_rademacher(Supermartingale kind, std::size_t n, double lambda, double y_or_beta) {
    if (!(lambda > 0.0)) throw DomainError("supermartingale: lambda must be > 0");
    return exact_mean_rademacher(n, supermartingale_request(kind, y_or_beta), [&](const PathStats& st) {
        return supermartingale_value(kind, st, lambda, y_or_beta);
    });
}

}  // namespace selfnorm
