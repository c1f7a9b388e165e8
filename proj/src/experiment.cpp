#include "selfnorm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "selfnorm/applications.hpp"
#include "selfnorm/errors.hpp"
#include "selfnorm/montecarlo.hpp"
#include "selfnorm/rng.hpp"

namespace selfnorm {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kPilotTag = 0x70696c6f74ull;  // "pilot"
constexpr std::uint64_t kPilotMaxRep = 20000;

const std::set<std::string> kSpecKeys{"id",    "theorem",     "model",  "n",       "grids",      "n_rep",
                                      "inner_rep", "gamma",   "master_seed", "mode", "regression", "tsp"};
const std::set<std::string> kGridKeys{"x", "y", "z", "b", "M", "beta", "a", "p_max"};

bool is_calculator_only(BoundKind k) { return k == BoundKind::dlp_pang || k == BoundKind::azuma_tsp; }

// Grids each experiment kind iterates over; "b" is optional for the peeling
// kinds (a pilot percentile is used when it is empty).
std::vector<std::string> needed_grids(BoundKind k) {
    switch (k) {
        case BoundKind::bernstein: return {"z"};
        case BoundKind::freedman: return {"x", "z"};
        case BoundKind::dvz: return {"x", "z", "a"};
        case BoundKind::dlp_point: return {"x", "y"};
        case BoundKind::bercu_touati: return {"x", "y", "a", "b"};
        case BoundKind::thm21_point: return {"x", "y", "z"};
        case BoundKind::thm22_peeling: return {"x", "y", "M"};
        case BoundKind::cor22_peeling: return {"x", "M"};
        case BoundKind::thm25_peeling: return {"x", "M"};
        case BoundKind::delyon: return {"x", "y"};
        case BoundKind::thm23_exponent: return {"x", "beta"};
        case BoundKind::thm24_peeling: return {"x", "beta", "M"};
        case BoundKind::thm31_tstat: return {"x", "M"};
        case BoundKind::thm33_regression: return {"x", "M"};
        case BoundKind::thm34_tsp: return {"x"};
        default: return {};
    }
}

std::vector<double>& grid_ref(Grids& g, const std::string& key) {
    if (key == "x") return g.x;
    if (key == "y") return g.y;
    if (key == "z") return g.z;
    if (key == "b") return g.b;
    if (key == "M") return g.M;
    if (key == "beta") return g.beta;
    if (key == "a") return g.a;
    return g.p_max;
}

const std::vector<double>& grid_ref(const Grids& g, const std::string& key) {
    return grid_ref(const_cast<Grids&>(g), key);
}

// Admissible interval per grid, as (check, text).
bool grid_value_ok(const std::string& key, double v, std::string& interval) {
    if (!std::isfinite(v)) {
        interval = "finite values";
        return false;
    }
    if (key == "x" || key == "y" || key == "a") {
        interval = "[0, inf)";
        return v >= 0.0;
    }
    if (key == "z" || key == "b") {
        interval = "(0, inf)";
        return v > 0.0;
    }
    if (key == "M") {
        interval = "[1, inf)";
        return v >= 1.0;
    }
    if (key == "beta") {
        interval = "(1, 2)";
        return v > 1.0 && v < 2.0;
    }
    interval = "(1.001, inf)";
    return v > 1.001;
}

bool is_pm_constant(const DifferenceModel& m) {
    const auto pre = m.preconditions();
    const auto m2 = m.second_moment();
    if (!pre.conditionally_symmetric || !pre.abs_bound || !m2) return false;
    return std::abs(*pre.abs_bound * *pre.abs_bound - *m2) <= 1e-12 * *m2;
}

bool regressor_is_one(const json& phi) { return phi.is_number() && phi.get<double>() == 1.0; }

template <class T>
std::optional<T> get_opt(const json& j, const char* key, std::vector<std::string>& issues) {
    if (!j.contains(key)) return std::nullopt;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        issues.push_back(std::string("field ") + key + " has the wrong type");
        return std::nullopt;
    }
}

}  // namespace

std::string_view to_string(RunMode m) {
    switch (m) {
        case RunMode::mc: return "mc";
        case RunMode::exact_oracle: return "exact_oracle";
        case RunMode::both: return "both";
    }
    return "unknown";
}

DifferenceModel parse_model(const json& j) {
    if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
        throw ValidationError({"model must be an object with a string field \"family\""});
    }
    const auto family = j.at("family").get<std::string>();
    auto num = [&](const char* key, std::optional<double> fallback = std::nullopt) -> double {
        if (!j.contains(key)) {
            if (fallback) return *fallback;
            throw ValidationError({"model " + family + " requires field " + key});
        }
        if (!j.at(key).is_number()) throw ValidationError({"model field " + std::string(key) + " must be a number"});
        return j.at(key).get<double>();
    };
    auto vec = [&](const char* key) -> std::vector<double> {
        if (!j.contains(key) || !j.at(key).is_array()) {
            throw ValidationError({"model " + family + " requires array field " + key});
        }
        try {
            return j.at(key).get<std::vector<double>>();
        } catch (const json::exception&) {
            throw ValidationError({"model field " + std::string(key) + " must hold numbers"});
        }
    };
    if (family == "rademacher") return DifferenceModel::rademacher();
    if (family == "scaled_two_point") return DifferenceModel::scaled_two_point(num("p_up"), num("up"), num("down"));
    if (family == "bounded_above") {
        const std::string base = j.value("base", std::string("reflected_exponential"));
        if (base != "reflected_exponential" && base != "uniform") {
            throw ValidationError({"bounded_above base must be reflected_exponential or uniform"});
        }
        return DifferenceModel::bounded_above(
            num("y_cap"), base == "uniform" ? CappedBase::uniform : CappedBase::reflected_exponential);
    }
    if (family == "centered_pareto") return DifferenceModel::centered_pareto(num("beta_tail"), num("scale", 1.0));
    if (family == "gaussian") return DifferenceModel::gaussian(num("sd", 1.0));
    if (family == "symmetric_mixture") return DifferenceModel::symmetric_mixture(vec("weights"), vec("scales"));
    throw ValidationError({"unknown model family " + family});
}

ExperimentSpec parse_spec(const json& j) {
    std::vector<std::string> issues;
    ExperimentSpec s;
    if (!j.is_object()) throw ValidationError({"spec must be a JSON object"});
    for (const auto& [key, _] : j.items()) {
        if (!kSpecKeys.count(key)) issues.push_back("unknown field " + key);
    }

    if (auto id = get_opt<std::string>(j, "id", issues); id && !id->empty()) {
        s.id = *id;
    } else {
        issues.emplace_back("id: required nonempty string");
    }

    bool theorem_ok = false;
    if (auto th = get_opt<std::string>(j, "theorem", issues)) {
        if (auto k = parse_bound_kind(*th)) {
            s.theorem = *k;
            theorem_ok = true;
            if (is_calculator_only(*k)) {
                issues.push_back("theorem: " + *th + " is calculator-only; use `bounds eval`");
            }
        } else {
            issues.push_back("theorem: unknown bound kind " + *th);
        }
    } else {
        issues.emplace_back("theorem: required");
    }

    bool model_ok = false;
    if (j.contains("model")) {
        s.model_desc = j.at("model");
        try {
            s.model = parse_model(s.model_desc);
            model_ok = true;
        } catch (const ValidationError& e) {
            for (const auto& m : e.issues()) issues.push_back("model: " + m);
        }
    } else if (theorem_ok && s.theorem != BoundKind::thm34_tsp) {
        issues.emplace_back("model: required");
    }

    if (auto n = get_opt<std::int64_t>(j, "n", issues)) {
        if (*n < 1) issues.push_back("n = " + std::to_string(*n) + " outside [1, inf)");
        else s.n = static_cast<std::size_t>(*n);
    } else {
        issues.emplace_back("n: required positive integer");
    }

    if (j.contains("grids")) {
        const auto& g = j.at("grids");
        if (!g.is_object()) {
            issues.emplace_back("grids must be an object");
        } else {
            for (const auto& [key, val] : g.items()) {
                if (!kGridKeys.count(key)) {
                    issues.push_back("grids: unknown grid " + key);
                    continue;
                }
                if (!val.is_array()) {
                    issues.push_back("grids." + key + " must be an array of numbers");
                    continue;
                }
                auto& dst = grid_ref(s.grids, key);
                for (std::size_t i = 0; i < val.size(); ++i) {
                    if (!val[i].is_number()) {
                        issues.push_back("grids." + key + "[" + std::to_string(i) + "] is not a number");
                        continue;
                    }
                    const double v = val[i].get<double>();
                    std::string interval;
                    if (!grid_value_ok(key, v, interval)) {
                        std::ostringstream os;
                        os << "grids." << key << "[" << i << "] = " << v << " outside admissible interval "
                           << interval;
                        issues.push_back(os.str());
                    }
                    dst.push_back(v);
                }
            }
        }
    }
    if (theorem_ok) {
        for (const auto& key : needed_grids(s.theorem)) {
            if (grid_ref(s.grids, key).empty()) {
                issues.push_back("grids." + key + " must be nonempty for " + std::string(to_string(s.theorem)));
            }
        }
    }
    if (s.grids.p_max.empty()) s.grids.p_max = {51.0};

    if (auto v = get_opt<std::uint64_t>(j, "n_rep", issues)) s.n_rep = *v;
    if (auto v = get_opt<std::uint64_t>(j, "inner_rep", issues)) s.inner_rep = *v;
    if (auto v = get_opt<double>(j, "gamma", issues)) s.gamma = *v;
    if (auto v = get_opt<std::uint64_t>(j, "master_seed", issues)) s.master_seed = *v;
    if (auto v = get_opt<std::string>(j, "mode", issues)) {
        if (*v == "mc") s.mode = RunMode::mc;
        else if (*v == "exact_oracle") s.mode = RunMode::exact_oracle;
        else if (*v == "both") s.mode = RunMode::both;
        else issues.push_back("mode: must be one of mc, exact_oracle, both (got " + *v + ")");
    }
    if (j.contains("regression")) {
        const auto& r = j.at("regression");
        if (!r.is_object()) {
            issues.emplace_back("regression must be an object");
        } else {
            if (auto v = get_opt<double>(r, "theta", issues)) s.theta = *v;
            if (r.contains("phi")) {
                s.phi = r.at("phi");
                const bool ok = (s.phi.is_string() && s.phi.get<std::string>() == "uniform") ||
                                (s.phi.is_number() && std::abs(s.phi.get<double>()) <= 1.0 && s.phi.get<double>() != 0.0);
                if (!ok) issues.emplace_back("regression.phi must be \"uniform\" or a nonzero constant in [-1, 1]");
            }
        }
    }
    if (j.contains("tsp")) {
        const auto& t = j.at("tsp");
        if (!t.is_object()) {
            issues.emplace_back("tsp must be an object");
        } else {
            if (auto v = get_opt<std::int64_t>(t, "d", issues)) {
                if (*v < 2) issues.emplace_back("tsp.d outside [2, inf)");
                else s.tsp_d = static_cast<std::size_t>(*v);
            }
            if (auto v = get_opt<std::uint64_t>(t, "mean_rep", issues)) s.tsp_mean_rep = *v;
        }
    }

    if (!(s.gamma > 0.0 && s.gamma < 1.0)) issues.emplace_back("gamma outside admissible interval (0, 1)");
    if (s.mode != RunMode::exact_oracle && s.n_rep < 100) issues.emplace_back("n_rep must be >= 100");
    if (theorem_ok && s.theorem == BoundKind::thm34_tsp) {
        if (s.inner_rep < 1000) issues.emplace_back("inner_rep must be >= 1000");
        if (s.n < 2 || s.n > kMaxExactTour) {
            issues.push_back("n must lie in [2, " + std::to_string(kMaxExactTour) + "] for thm34_tsp");
        }
        if (s.tsp_mean_rep < 1) issues.emplace_back("tsp.mean_rep must be >= 1");
    }

    if (theorem_ok && model_ok) {
        const auto pre = s.model.preconditions();
        const std::string name = s.model.name();
        const auto kind = s.theorem;
        const bool needs_square = kind == BoundKind::bernstein || kind == BoundKind::freedman ||
                                  kind == BoundKind::dvz || kind == BoundKind::thm21_point ||
                                  kind == BoundKind::thm22_peeling || kind == BoundKind::cor22_peeling ||
                                  kind == BoundKind::delyon;
        if (needs_square && !pre.square_integrable) issues.push_back("model " + name + " is not square-integrable");
        if ((kind == BoundKind::bernstein || kind == BoundKind::freedman) && !pre.abs_bound) {
            issues.push_back("model " + name + " has unbounded |xi|; " + std::string(to_string(kind)) +
                             " needs a bound a");
        }
        if (kind == BoundKind::dlp_point && !pre.conditionally_symmetric) {
            issues.push_back("model " + name + " is not conditionally symmetric");
        }
        if ((kind == BoundKind::bercu_touati || kind == BoundKind::thm25_peeling || kind == BoundKind::thm31_tstat) &&
            !pre.heavy_on_left) {
            issues.push_back("model " + name + " is not heavy on left");
        }
        if (kind == BoundKind::thm23_exponent || kind == BoundKind::thm24_peeling) {
            for (const double beta : s.grids.beta) {
                if (!(beta < pre.beta_moment_limit)) {
                    std::ostringstream os;
                    os << "model " << name << " has no finite moment of order beta = " << beta;
                    issues.push_back(os.str());
                }
            }
        }
        if (kind == BoundKind::thm31_tstat && s.n < 2) issues.emplace_back("n must be >= 2 for thm31_tstat");
        if (kind == BoundKind::thm33_regression) {
            if (!pre.upper_bound) issues.push_back("regression noise " + name + " is not bounded above");
            const auto m2 = s.model.second_moment();
            if (!m2) issues.push_back("regression noise " + name + " has infinite variance");
            else if (std::sqrt(*m2) < 1e-3) issues.emplace_back("regression noise standard deviation must be >= 1e-3");
        }
        if (s.mode != RunMode::mc) {
            if (kind == BoundKind::thm33_regression) {
                if (!is_pm_constant(s.model) || !regressor_is_one(s.phi)) {
                    issues.emplace_back("mode " + std::string(to_string(s.mode)) +
                                        " for regression needs +-sigma noise and phi = 1");
                }
            } else if (kind == BoundKind::thm31_tstat || kind == BoundKind::thm34_tsp) {
                issues.emplace_back("mode " + std::string(to_string(s.mode)) + " is not available for " +
                                    std::string(to_string(kind)));
            } else if (!std::holds_alternative<Rademacher>(s.model.family())) {
                issues.emplace_back("mode " + std::string(to_string(s.mode)) + " requires the rademacher model");
            }
            if (s.n > kMaxExactN) {
                issues.push_back("mode " + std::string(to_string(s.mode)) + " requires n <= " +
                                 std::to_string(kMaxExactN) + " (got " + std::to_string(s.n) + ")");
            }
        }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return s;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"cannot open " + path});
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
        const auto nl = pos == 0 ? std::string::npos : text.rfind('\n', pos - 1);
        const std::size_t col = nl == std::string::npos ? pos + 1 : pos - nl;
        throw ValidationError({path + ": parse error at line " + std::to_string(line) + ", column " +
                               std::to_string(col) + ": " + e.what()});
    }
}

ExperimentSpec load_spec(const std::string& path) { return parse_spec(read_json_file(path)); }

json spec_to_json(const ExperimentSpec& s) {
    json g = json::object();
    for (const auto& key : {"x", "y", "z", "b", "M", "beta", "a", "p_max"}) {
        const auto& v = grid_ref(s.grids, key);
        if (!v.empty()) g[key] = v;
    }
    json j{{"id", s.id},
           {"theorem", std::string(to_string(s.theorem))},
           {"n", s.n},
           {"grids", g},
           {"n_rep", s.n_rep},
           {"inner_rep", s.inner_rep},
           {"gamma", s.gamma},
           {"master_seed", s.master_seed},
           {"mode", std::string(to_string(s.mode))}};
    if (!s.model_desc.is_null()) j["model"] = s.model_desc;
    if (s.theorem == BoundKind::thm33_regression) j["regression"] = {{"theta", s.theta}, {"phi", s.phi}};
    if (s.theorem == BoundKind::thm34_tsp) j["tsp"] = {{"d", s.tsp_d}, {"mean_rep", s.tsp_mean_rep}};
    return j;
}

// ---------------------------------------------------------------------------
// Records

namespace {

template <class T>
void put(json& j, const char* key, const std::optional<T>& v) {
    j[key] = v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> take(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

json record_to_json(const ResultRecord& r) {
    json j;
    j["experiment_id"] = r.experiment_id;
    j["theorem"] = r.theorem;
    put(j, "x", r.x);
    put(j, "y", r.y);
    put(j, "z", r.z);
    put(j, "b", r.b);
    put(j, "M", r.M);
    put(j, "beta", r.beta);
    j["bound"] = r.bound;
    put(j, "n_rep", r.n_rep);
    put(j, "hits", r.hits);
    put(j, "p_hat", r.p_hat);
    put(j, "ci_lo", r.ci_lo);
    put(j, "ci_hi", r.ci_hi);
    put(j, "exact", r.exact);
    put(j, "p_star", r.p_star);
    j["status"] = r.status;
    j["note"] = r.note;
    j["seed"] = r.seed;
    j["wall_ms"] = r.wall_ms;
    return j;
}

ResultRecord record_from_json(const json& j) {
    ResultRecord r;
    r.experiment_id = j.at("experiment_id").get<std::string>();
    r.theorem = j.at("theorem").get<std::string>();
    r.x = take<double>(j, "x");
    r.y = take<double>(j, "y");
    r.z = take<double>(j, "z");
    r.b = take<double>(j, "b");
    r.M = take<double>(j, "M");
    r.beta = take<double>(j, "beta");
    r.bound = j.at("bound").get<double>();
    r.n_rep = take<std::uint64_t>(j, "n_rep");
    r.hits = take<std::uint64_t>(j, "hits");
    r.p_hat = take<double>(j, "p_hat");
    r.ci_lo = take<double>(j, "ci_lo");
    r.ci_hi = take<double>(j, "ci_hi");
    r.exact = take<double>(j, "exact");
    r.p_star = take<double>(j, "p_star");
    r.status = j.at("status").get<std::string>();
    r.note = j.value("note", std::string());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_ms = j.at("wall_ms").get<double>();
    return r;
}

int exit_status(const std::vector<ResultRecord>& records) {
    for (const auto& r : records) {
        if (r.status == to_string(VerdictStatus::violation_evidence)) return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw DomainError("percentile of an empty sample");
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    return v[k];
}

McConfig mc_config(const ExperimentSpec& s) { return McConfig{s.n_rep, s.gamma, s.master_seed, s.jobs}; }

bool wants_mc(const ExperimentSpec& s) { return s.mode != RunMode::exact_oracle; }
bool wants_exact(const ExperimentSpec& s) { return s.mode != RunMode::mc; }

VerdictStatus exact_status(double exact, double bound) {
    if (exact > bound) return VerdictStatus::violation_evidence;
    return bound >= 1.0 ? VerdictStatus::vacuous : VerdictStatus::pass;
}

// Combines the MC verdict (if any) and the exact comparison (if any).
std::string combined_status(const std::optional<MCEstimate>& est, std::optional<double> exact, double bound) {
    VerdictStatus st = bound >= 1.0 ? VerdictStatus::vacuous : VerdictStatus::pass;
    if (est && domination_check(*est, bound).status == VerdictStatus::violation_evidence) {
        st = VerdictStatus::violation_evidence;
    }
    if (exact && exact_status(*exact, bound) == VerdictStatus::violation_evidence) {
        st = VerdictStatus::violation_evidence;
    }
    return std::string(to_string(st));
}

void fill_estimate(ResultRecord& r, const MCEstimate& e) {
    r.n_rep = e.n_rep;
    r.hits = e.hits;
    r.p_hat = e.p_hat;
    r.ci_lo = e.ci_lo;
    r.ci_hi = e.ci_hi;
}

// Percentile q of a statistic, from the exact enumeration when the run has an
// exact side, otherwise from an independent pilot run.
double pilot_percentile(const ExperimentSpec& s, const StatsRequest& req, Stat stat, double q) {
    std::vector<double> vals;
    if (wants_exact(s)) {
        enumerate_rademacher(s.n, req, [&](const PathStats& st) { vals.push_back(stat_value(st, stat, req.beta)); });
    } else {
        McConfig pilot = mc_config(s);
        pilot.n_rep = std::min<std::uint64_t>(s.n_rep, kPilotMaxRep);
        pilot.master_seed = derive_seed(s.master_seed, kPilotTag);
        const auto stats = simulate_stats(s.model, s.n, req, pilot);
        vals.reserve(stats.size());
        for (const auto& st : stats) vals.push_back(stat_value(st, stat, req.beta));
    }
    return percentile(std::move(vals), q);
}

struct EventPoint {
    ResultRecord rec;
    TailEvent event;
    double bound;
    std::vector<std::pair<std::string, double>> extra_bounds;  // label suffix, bound on the same event
};

std::vector<double> exact_tails(std::size_t n, const std::vector<TailEvent>& events) {
    std::map<std::tuple<double, double, double>, std::vector<std::size_t>> groups;
    for (std::size_t e = 0; e < events.size(); ++e) {
        const auto rq = events[e].request();
        groups[{rq.y, rq.a, rq.beta.value_or(-1.0)}].push_back(e);
    }
    std::vector<std::uint64_t> hits(events.size(), 0);
    for (const auto& [key, members] : groups) {
        enumerate_rademacher(n, events[members.front()].request(), [&](const PathStats& st) {
            for (const auto e : members) {
                if (events[e](st)) ++hits[e];
            }
        });
    }
    std::vector<double> out(events.size());
    const double total = std::ldexp(1.0, static_cast<int>(n));
    for (std::size_t e = 0; e < events.size(); ++e) out[e] = static_cast<double>(hits[e]) / total;
    return out;
}

void run_event_points(const ExperimentSpec& s, std::vector<EventPoint>& pts, std::vector<ResultRecord>& out) {
    std::vector<TailEvent> events;
    events.reserve(pts.size());
    for (const auto& p : pts) events.push_back(p.event);
    std::vector<MCEstimate> est;
    if (wants_mc(s)) est = estimate_tails(s.model, s.n, events, mc_config(s));
    std::vector<double> ex;
    if (wants_exact(s)) ex = exact_tails(s.n, events);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto emit = [&](ResultRecord r, double bound) {
            r.bound = bound;
            std::optional<MCEstimate> e;
            if (!est.empty()) {
                e = est[i];
                fill_estimate(r, est[i]);
            }
            if (!ex.empty()) r.exact = ex[i];
            r.status = combined_status(e, r.exact, bound);
            out.push_back(std::move(r));
        };
        emit(pts[i].rec, pts[i].bound);
        for (const auto& [suffix, bound] : pts[i].extra_bounds) {
            ResultRecord r = pts[i].rec;
            r.theorem += suffix;
            emit(std::move(r), bound);
        }
    }
}

ResultRecord base_record(const ExperimentSpec& s, std::string theorem) {
    ResultRecord r;
    r.experiment_id = s.id;
    r.theorem = std::move(theorem);
    r.seed = s.master_seed;
    return r;
}

double eval(BoundKind k, RateInputs in) { return evaluate_bound(BoundSpec(k, std::move(in))); }

std::string note_of(const std::string& key, double v) { return key + "=" + format_double(v); }

// Expectation-type bounds (bracket rate and beta rate): optimised
// over p with and without the event indicator.
void run_expectation(const ExperimentSpec& s, const ExpectationSetup& setup, ResultRecord base,
                     std::vector<ResultRecord>& out) {
    const TailEvent ev = setup_event(setup);
    std::optional<MCEstimate> est;
    std::optional<ExpectationObjective> mc_obj, ex_obj;
    std::optional<double> exact;
    if (wants_mc(s)) {
        est = estimate_tail(s.model, s.n, ev, mc_config(s));
        mc_obj = sample_objective(s.model, s.n, setup, mc_config(s));
    }
    if (wants_exact(s)) {
        exact = exact_tail_rademacher(s.n, ev).value();
        ex_obj = exact_objective_rademacher(s.n, setup);
    }
    for (const bool indicator : {true, false}) {
        for (const double p_max : s.grids.p_max) {
            ResultRecord r = base;
            r.theorem += indicator ? "[indicator]" : "[plain]";
            // The exact objective is the bound itself; the MC objective is used only without an exact side.
            const auto opt = ex_obj ? ex_obj->minimize(indicator, p_max) : mc_obj->minimize(indicator, p_max);
            r.bound = opt.value;
            r.p_star = opt.p_star;
            if (est) fill_estimate(r, *est);
            r.exact = exact;
            r.status = combined_status(est, exact, r.bound);
            r.note = note_of("p_max", p_max);
            if (!ex_obj) r.note += ";bound_se=" + format_double(opt.std_error);
            out.push_back(std::move(r));
        }
    }
}

void run_tail_kind(const ExperimentSpec& s, std::vector<ResultRecord>& out) {
    const auto kind = s.theorem;
    const std::string label(to_string(kind));
    const auto pre = s.model.preconditions();
    const auto& g = s.grids;
    std::vector<EventPoint> pts;

    switch (kind) {
        case BoundKind::bernstein: {
            const double var = static_cast<double>(s.n) * *s.model.second_moment();
            for (const double z : g.z) {
                RateInputs in;
                in.z = z;
                in.var = var;
                in.a_bnd = *pre.abs_bound;
                TailEvent ev;
                ev.x = z;
                ev.strict = true;
                EventPoint p{base_record(s, label), ev, eval(kind, in), {}};
                p.rec.z = z;
                p.rec.note = note_of("var", var) + ";" + note_of("a", *pre.abs_bound);
                pts.push_back(std::move(p));
            }
            break;
        }
        case BoundKind::freedman:
        case BoundKind::dvz: {
            const std::vector<double> a_grid = kind == BoundKind::freedman ? std::vector<double>{*pre.abs_bound} : g.a;
            for (const double x : g.x) {
                for (const double L : g.z) {
                    for (const double a : a_grid) {
                        RateInputs in;
                        in.x = x;
                        in.L = L;
                        in.a_bnd = a;
                        TailEvent ev;
                        ev.x = x;
                        ev.strict = true;
                        ev.a = a;
                        ev.window = Window{kind == BoundKind::freedman ? Stat::cond_var : Stat::h_n, -kInf, L};
                        EventPoint p{base_record(s, label), ev, eval(kind, in), {}};
                        p.rec.x = x;
                        p.rec.z = L;
                        if (kind == BoundKind::dvz) p.rec.y = a;
                        p.rec.note = note_of("a", a);
                        pts.push_back(std::move(p));
                    }
                }
            }
            break;
        }
        case BoundKind::dlp_point: {
            for (const double x : g.x) {
                for (const double y : g.y) {
                    RateInputs in;
                    in.x = x;
                    in.y = y;
                    TailEvent ev;
                    ev.normalizer = Stat::sq_var;
                    ev.x = x;
                    ev.window = Window{Stat::sq_var, y, kInf};
                    EventPoint p{base_record(s, label), ev, eval(kind, in), {}};
                    p.rec.x = x;
                    p.rec.y = y;
                    pts.push_back(std::move(p));
                }
            }
            break;
        }
        case BoundKind::bercu_touati: {
            for (const double x : g.x)
                for (const double y : g.y)
                    for (const double a : g.a)
                        for (const double b : g.b) {
                            RateInputs in;
                            in.x = x;
                            in.y = y;
                            in.a_bnd = a;
                            in.b = b;
                            TailEvent ev;
                            ev.normalizer = Stat::sq_var;
                            ev.x = x;
                            ev.offset = a;
                            ev.scale = b;
                            ev.window = Window{Stat::sq_var, y, kInf};
                            EventPoint p{base_record(s, label), ev, eval(kind, in), {}};
                            p.rec.x = x;
                            p.rec.y = y;
                            p.rec.b = b;
                            p.rec.note = note_of("a", a);
                            pts.push_back(std::move(p));
                        }
            break;
        }
        case BoundKind::thm21_point: {
            for (const double x : g.x) {
                for (const double y : g.y) {
                    for (const double z : g.z) {
                        RateInputs in;
                        in.x = x;
                        in.y = y;
                        in.z = z;
                        const double bound = eval(kind, in);
                        for (const bool le : {true, false}) {
                            TailEvent ev;
                            ev.normalizer = Stat::b_n;
                            ev.x = x;
                            ev.y = y;
                            ev.window = le ? Window{Stat::b_n, -kInf, z} : Window{Stat::b_n, z, kInf};
                            EventPoint p{base_record(s, label + (le ? "[B<=z]" : "[B>=z]")), ev, bound, {}};
                            p.rec.x = x;
                            p.rec.y = y;
                            p.rec.z = z;
                            pts.push_back(std::move(p));
                        }
                    }
                }
            }
            break;
        }
        case BoundKind::delyon: {
            for (const double x : g.x) {
                for (const double y : g.y) {
                    if (!(y > 0.0)) throw ValidationError({"delyon requires y > 0"});
                    RateInputs in;
                    in.x = x;
                    in.y = y;
                    TailEvent ev;
                    ev.x = x;
                    ev.y = 0.0;
                    ev.window = Window{Stat::b_n, -kInf, y};
                    EventPoint p{base_record(s, label), ev, eval(kind, in), {}};
                    p.rec.x = x;
                    p.rec.y = y;
                    pts.push_back(std::move(p));
                }
            }
            break;
        }
        case BoundKind::thm22_peeling:
        case BoundKind::cor22_peeling:
        case BoundKind::thm25_peeling: {
            const bool bracket = kind != BoundKind::thm25_peeling;
            const std::vector<double> ys = kind == BoundKind::thm22_peeling ? g.y : std::vector<double>{0.0};
            const Stat root = bracket ? Stat::sqrt_b_n : Stat::sqrt_sq_var;
            for (const double y : ys) {
                std::vector<double> bs = g.b;
                std::string b_note;
                if (bs.empty()) {
                    bs = {pilot_percentile(s, StatsRequest{y, 0.0, std::nullopt}, root, 0.10)};
                    b_note = "b=pilot_p10";
                }
                for (const double x : g.x)
                    for (const double b : bs)
                        for (const double M : g.M) {
                            RateInputs in;
                            in.x = x;
                            in.M = M;
                            if (kind == BoundKind::thm22_peeling) {
                                in.y = y;
                                in.b = b;
                            }
                            TailEvent ev;
                            ev.normalizer = root;
                            ev.x = x;
                            ev.y = y;
                            ev.window = Window{root, b, b * M};
                            EventPoint p{base_record(s, label), ev, eval(kind, in), {}};
                            p.rec.x = x;
                            if (bracket) p.rec.y = y;
                            p.rec.b = b;
                            p.rec.M = M;
                            p.rec.note = b_note;
                            pts.push_back(std::move(p));
                        }
            }
            break;
        }
        case BoundKind::thm24_peeling: {
            for (const double beta : g.beta) {
                std::vector<double> bs = g.b;
                std::string b_note;
                if (bs.empty()) {
                    const double q = pilot_percentile(s, StatsRequest{0.0, 0.0, beta}, Stat::g_n_root, 0.10);
                    bs = {std::pow(q, beta - 1.0)};
                    b_note = "b=pilot_p10^(beta-1)";
                }
                for (const double x : g.x)
                    for (const double b : bs)
                        for (const double M : g.M) {
                            RateInputs in;
                            in.x = x;
                            in.beta = beta;
                            in.M = M;
                            TailEvent ev;
                            ev.normalizer = Stat::g_n_root;
                            ev.x = x;
                            ev.beta = beta;
                            ev.window = Window{Stat::g_n_root, std::pow(b, 1.0 / (beta - 1.0)),
                                               std::pow(b * M, 1.0 / (beta - 1.0))};
                            EventPoint p{base_record(s, label), ev, eval(kind, in), {}};
                            p.extra_bounds.emplace_back("[conservative]", thm24_peeling_conservative(x, beta, M));
                            p.rec.x = x;
                            p.rec.beta = beta;
                            p.rec.b = b;
                            p.rec.M = M;
                            p.rec.note = b_note;
                            pts.push_back(std::move(p));
                        }
            }
            break;
        }
        default:
            throw ValidationError({"theorem " + label + " has no tail-event experiment"});
    }
    run_event_points(s, pts, out);
}

void run_regression(const ExperimentSpec& s, std::vector<ResultRecord>& out) {
    RegressionConfig cfg;
    cfg.theta = s.theta;
    cfg.phi = s.phi.is_string() ? RegressorModel::uniform_pm1() : RegressorModel::constant(s.phi.get<double>());
    cfg.eps = s.model;
    cfg.n = s.n;
    cfg.validate();
    const double sigma = cfg.sigma();
    const double y = cfg.y();
    const McConfig mc = mc_config(s);

    std::vector<std::optional<double>> bs;
    if (s.grids.b.empty()) bs.push_back(std::nullopt);
    for (const double b : s.grids.b) bs.emplace_back(b);

    if (!wants_mc(s)) {
        const double nn = static_cast<double>(s.n);
        for (const double x : s.grids.x) {
            const double rate = x * x / (2.0 * (sigma * sigma + x * y / 3.0));
            const ExpectationObjective obj(rate, {1.0}, {nn}, {1}, false);
            const auto opt = obj.minimize(false, s.grids.p_max.front());
            ResultRecord r = base_record(s, "thm32_regression");
            r.x = x;
            r.bound = 2.0 * opt.value;
            r.p_star = opt.p_star;
            r.exact = exact_regression_tail(s.n, sigma, x);
            r.status = combined_status(std::nullopt, r.exact, r.bound);
            out.push_back(std::move(r));
        }
        for (const auto& bopt : bs) {
            const double b = bopt.value_or(std::sqrt(nn));
            for (const double x : s.grids.x)
                for (const double M : s.grids.M) {
                    RateInputs in;
                    in.x = x;
                    in.y = y;
                    in.b = b;
                    in.M = M;
                    in.sigma = sigma;
                    ResultRecord r = base_record(s, "thm33_regression");
                    r.x = x;
                    r.y = y;
                    r.b = b;
                    r.M = M;
                    r.bound = eval(BoundKind::thm33_regression, in);
                    r.exact = exact_regression_tail(s.n, sigma, x, b, b * M, true);
                    r.status = combined_status(std::nullopt, r.exact, r.bound);
                    out.push_back(std::move(r));
                }
        }
        return;
    }

    RegressionGrid grid;
    grid.x = s.grids.x;
    grid.M = s.grids.M;
    auto emit = [&](const RegressionPoint& p) {
        const bool t32 = p.theorem == RegressionTheorem::thm32;
        ResultRecord r = base_record(s, t32 ? "thm32_regression" : "thm33_regression");
        r.x = p.x;
        if (!t32) {
            r.y = y;
            r.b = p.b;
            r.M = p.M;
        } else {
            r.p_star = p.p_star;
        }
        r.bound = p.bound;
        fill_estimate(r, p.verdict.estimate);
        if (wants_exact(s)) r.exact = p.exact;
        r.status = combined_status(p.verdict.estimate, r.exact, r.bound);
        r.note = note_of("sigma", sigma);
        out.push_back(std::move(r));
    };
    for (const auto& p : verify_regression(RegressionTheorem::thm32, cfg, grid, mc)) emit(p);
    for (const auto& bopt : bs) {
        grid.b = bopt;
        for (const auto& p : verify_regression(RegressionTheorem::thm33, cfg, grid, mc)) emit(p);
    }
}

void run_tsp(const ExperimentSpec& s, std::vector<ResultRecord>& out) {
    TspConfig cfg;
    cfg.n = s.n;
    cfg.d = s.tsp_d;
    cfg.t_grid = s.grids.x;
    cfg.instances = s.n_rep;
    cfg.inner_rep = s.inner_rep;
    cfg.mean_rep = s.tsp_mean_rep;
    cfg.gamma = s.gamma;
    cfg.seed = s.master_seed;
    cfg.jobs = s.jobs;
    const auto v = verify_tsp(cfg);
    std::string common = note_of("c1", v.c1) + ";" + note_of("window_lo", v.window_lo) + ";" +
                         note_of("window_hi", v.window_hi) + ";in_window=" + std::to_string(v.in_window) +
                         ";reconciled=" + std::to_string(v.reconciled) + "/" + std::to_string(v.instances) +
                         ";" + note_of("mean_tour", v.mean_tour) + ";neg_frac=";
    for (std::size_t i = 0; i < v.negative_fraction.size(); ++i) {
        common += (i ? "," : "") + format_double(v.negative_fraction[i]);
    }
    for (const auto& p : v.points) {
        ResultRecord r = base_record(s, "thm34_tsp");
        r.x = p.t;
        r.bound = p.bound;
        fill_estimate(r, p.verdict.estimate);
        r.status = std::string(to_string(p.verdict.status));
        r.note = (p.empty_window ? "vacuous-window;" : "") + common;
        out.push_back(std::move(r));
    }
}

void run_tstat(const ExperimentSpec& s, std::vector<ResultRecord>& out) {
    std::vector<double> bs = s.grids.b;
    std::string b_note;
    if (bs.empty()) {
        bs = {pilot_percentile(s, StatsRequest{}, Stat::sqrt_sq_var, 0.10)};
        b_note = "b=pilot_p10";
    }
    for (const double b : bs) {
        for (const auto& p : verify_tstat(s.model, s.n, s.grids.x, s.grids.M, b, mc_config(s))) {
            ResultRecord r = base_record(s, "thm31_tstat");
            r.x = p.x;
            r.b = p.b;
            r.M = p.M;
            r.bound = p.bound;
            fill_estimate(r, p.verdict.estimate);
            r.status = std::string(to_string(p.verdict.status));
            r.note = b_note;
            out.push_back(std::move(r));
        }
    }
}

}  // namespace

std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec,
                                         const std::function<void(const ResultRecord&)>& on_record) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<ResultRecord> out;
    try {
        switch (spec.theorem) {
            case BoundKind::thm23_exponent:
                for (const double x : spec.grids.x) {
                    if (!(x > 0.0)) throw ValidationError({"thm23_exponent requires x > 0"});
                    for (const double beta : spec.grids.beta) {
                        ResultRecord base = base_record(spec, "thm23_exponent");
                        base.x = x;
                        base.beta = beta;
                        run_expectation(spec, ExpectationSetup{RateKind::beta, x, beta}, base, out);
                    }
                }
                break;
            case BoundKind::thm21_point:
                for (const double x : spec.grids.x) {
                    for (const double y : spec.grids.y) {
                        ResultRecord base = base_record(spec, "thm21_expectation");
                        base.x = x;
                        base.y = y;
                        run_expectation(spec, ExpectationSetup{RateKind::bracket, x, y}, base, out);
                    }
                }
                run_tail_kind(spec, out);
                break;
            case BoundKind::thm31_tstat: run_tstat(spec, out); break;
            case BoundKind::thm33_regression: run_regression(spec, out); break;
            case BoundKind::thm34_tsp: run_tsp(spec, out); break;
            case BoundKind::dlp_pang:
            case BoundKind::azuma_tsp:
                throw ValidationError({std::string(to_string(spec.theorem)) + " is calculator-only"});
            default: run_tail_kind(spec, out); break;
        }
    } catch (const ValidationError& e) {
        std::vector<std::string> issues;
        for (const auto& m : e.issues()) issues.push_back("experiment " + spec.id + ": " + m);
        throw ValidationError(std::move(issues));
    } catch (const std::exception& e) {
        throw std::runtime_error("experiment " + spec.id + ": " + e.what());
    }
    if (spec.timing) {
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        for (auto& r : out) r.wall_ms = ms;
    }
    if (on_record) {
        for (const auto& r : out) on_record(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports

ReportFormat parse_format(const std::string& s) {
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    throw ValidationError({"format must be json or csv (got " + s + ")"});
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string csv_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string render_report(const json& spec_echo, const std::vector<ResultRecord>& records, ReportFormat fmt) {
    if (records.empty()) throw DomainError("emit_report: no records");
    if (fmt == ReportFormat::json) {
        json j;
        j["spec"] = spec_echo;
        j["records"] = json::array();
        for (const auto& r : records) j["records"].push_back(record_to_json(r));
        return j.dump(2) + "\n";
    }
    std::string out = "experiment_id,theorem,x,y,z,b,M,beta,bound,p_hat,ci_lo,ci_hi,exact,status,seed,wall_ms\n";
    for (const auto& r : records) {
        out += csv_quote(r.experiment_id) + "," + csv_quote(r.theorem) + "," + csv_opt(r.x) + "," + csv_opt(r.y) +
               "," + csv_opt(r.z) + "," + csv_opt(r.b) + "," + csv_opt(r.M) + "," + csv_opt(r.beta) + "," +
               format_double(r.bound) + "," + csv_opt(r.p_hat) + "," + csv_opt(r.ci_lo) + "," + csv_opt(r.ci_hi) +
               "," + csv_opt(r.exact) + "," + r.status + "," + std::to_string(r.seed) + "," +
               format_double(r.wall_ms) + "\n";
    }
    return out;
}

std::string render_report(const ExperimentSpec& spec, const std::vector<ResultRecord>& records, ReportFormat fmt) {
    return render_report(spec_to_json(spec), records, fmt);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path);
}

void emit_report(const ExperimentSpec& spec, const std::vector<ResultRecord>& records, ReportFormat fmt,
                 const std::string& path) {
    write_file(path, render_report(spec, records, fmt));
}

LoadedReport load_report(const std::string& path) {
    const json j = read_json_file(path);
    if (!j.is_object() || !j.contains("records") || !j.at("records").is_array()) {
        throw ValidationError({path + ": not a JSON report (missing records array)"});
    }
    LoadedReport rep;
    rep.spec = j.value("spec", json::object());
    for (const auto& r : j.at("records")) rep.records.push_back(record_from_json(r));
    return rep;
}

std::vector<std::string> emit_plot_data(const std::vector<ResultRecord>& records, const std::string& stem) {
    std::map<std::string, std::string> files;
    std::vector<std::string> order;
    for (const auto& r : records) {
        std::string tag;
        for (const char c : r.theorem) tag += std::isalnum(static_cast<unsigned char>(c)) || c == '_' ? c : '_';
        while (!tag.empty() && tag.back() == '_') tag.pop_back();
        const std::string path = stem + "." + tag + ".plot.csv";
        auto it = files.find(path);
        if (it == files.end()) {
            it = files.emplace(path, "x,p_hat,ci_hi,bound\n").first;
            order.push_back(path);
        }
        it->second += csv_opt(r.x) + "," + csv_opt(r.p_hat ? r.p_hat : r.exact) + "," +
                      csv_opt(r.ci_hi ? r.ci_hi : r.exact) + "," + format_double(r.bound) + "\n";
    }
    for (const auto& path : order) write_file(path, files.at(path));
    return order;
}

}  // namespace selfnorm
