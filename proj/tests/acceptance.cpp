// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfnorm/applications.hpp"
#include "selfnorm/bounds.hpp"
#include "selfnorm/experiment.hpp"
#include "selfnorm/montecarlo.hpp"

using namespace selfnorm;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
    bool pass = true;
    std::string detail;
    std::string fingerprint;  // serialized results, compared across --jobs settings
};

void fail(Outcome& o, const std::string& why) {
    o.pass = false;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += why;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Run {
    std::vector<ResultRecord> records;
    std::string report;
};

Run run_spec(json j, unsigned jobs) {
    auto spec = parse_spec(j);
    spec.jobs = jobs;
    Run r;
    r.records = run_experiment(spec);
    r.report = render_report(spec, r.records, ReportFormat::json);
    return r;
}

std::size_t count_status(const std::vector<ResultRecord>& recs, const std::string& status,
                         const std::function<bool(const ResultRecord&)>& pick = {}) {
    return static_cast<std::size_t>(std::count_if(recs.begin(), recs.end(), [&](const ResultRecord& r) {
        return (!pick || pick(r)) && r.status == status;
    }));
}

// ---------------------------------------------------------------------------

Outcome criterion1(unsigned) {
    Outcome o;
    std::size_t points = 0, bad = 0;
    double worst = 0.0;
    for (const double x : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        for (const double y : {0.001, 0.01, 0.1, 1.0, 5.0}) {
            ++points;
            const double f = f_rate(x, y);
            const double ref = x * x * psi(x * y) / 2.0;
            const double rel = std::abs(f - ref) / ref;
            worst = std::max(worst, rel);
            if (!(rel <= 1e-10)) ++bad;
            if (!(psi(x * y) >= 1.0 / (1.0 + x * y / 3.0))) ++bad;
            if (!(f >= x * x / (2.0 * (1.0 + x * y / 3.0)))) ++bad;
        }
    }
    o.detail = std::to_string(points) + " grid points, max relative error " + fmt("%.3g", worst);
    if (bad) fail(o, std::to_string(bad) + " failed checks");
    return o;
}

Outcome criterion2(unsigned) {
    Outcome o;
    std::size_t points = 0, bad = 0;
    for (const double x : {0.5, 1.0, 2.0, 4.0, 8.0})
        for (const double L : {0.5, 1.0, 2.0, 4.0, 8.0})
            for (const double a : {0.1, 0.5, 1.0, 2.0, 5.0}) {
                RateInputs in;
                in.x = x;
                in.L = L;
                in.a_bnd = a;
                ++points;
                if (!(evaluate_bound(BoundSpec(BoundKind::dvz, in)) <= evaluate_bound(BoundSpec(BoundKind::freedman, in))))
                    ++bad;
            }
    o.detail = std::to_string(points) + " grid points";
    if (bad) fail(o, std::to_string(bad) + " points with dvz > freedman");
    return o;
}

Outcome criterion3(unsigned jobs) {
    Outcome o;
    const json xs = {0.25, 0.5, 1.0, 1.5};
    std::size_t checked = 0, violations = 0, other_orientation = 0;
    for (const int n : {5, 8, 10}) {
        const double nn = n;
        const double root = std::sqrt(nn);
        const json model = {{"family", "rademacher"}};
        std::vector<json> specs;
        // B_n(0) = #{xi = +1} + n/2 ranges over [n/2, 3n/2]
        specs.push_back({{"id", "cor21-n" + std::to_string(n)}, {"theorem", "thm21_point"}, {"model", model}, {"n", n},
                         {"grids", {{"x", xs}, {"y", {0.0}}, {"z", {nn / 2, nn, 1.5 * nn}}}}});
        specs.push_back({{"id", "thm25-n" + std::to_string(n)}, {"theorem", "thm25_peeling"}, {"model", model},
                         {"n", n}, {"grids", {{"x", xs}, {"M", {1, 2, 4}}, {"b", {root / 4, root / 2, root}}}}});
        specs.push_back({{"id", "dlp-n" + std::to_string(n)}, {"theorem", "dlp_point"}, {"model", model}, {"n", n},
                         {"grids", {{"x", xs}, {"y", {1.0, nn / 2, nn}}}}});
        specs.push_back({{"id", "bt-n" + std::to_string(n)}, {"theorem", "bercu_touati"}, {"model", model}, {"n", n},
                         {"grids", {{"x", xs}, {"y", {1.0, nn / 2, nn}}, {"a", {0.0, 1.0}}, {"b", {0.5, 1.0}}}}});
        specs.push_back({{"id", "thm22-n" + std::to_string(n)}, {"theorem", "thm22_peeling"}, {"model", model},
                         {"n", n},
                         {"grids", {{"x", xs}, {"y", {0.0, 0.5, 1.0}}, {"M", {1, 2, 4}}, {"b", {root / 2, root}}}}});
        specs.push_back({{"id", "delyon-n" + std::to_string(n)}, {"theorem", "delyon"}, {"model", model}, {"n", n},
                         {"grids", {{"x", xs}, {"y", {nn / 2, nn, 1.5 * nn}}}}});
        for (auto& j : specs) {
            j["mode"] = "exact_oracle";
            j["master_seed"] = kSeed;
            const auto run = run_spec(j, jobs);
            o.fingerprint += run.report;
            for (const auto& r : run.records) {
                if (!r.exact) {
                    fail(o, r.experiment_id + " record without an exact value");
                    continue;
                }
                // The y = 0 point bound holds on {B_n(0) >= z}; the {B <= z} orientation is only reported.
                if (r.theorem == "thm21_point[B<=z]") {
                    if (*r.exact > r.bound) ++other_orientation;
                    continue;
                }
                ++checked;
                if (*r.exact > r.bound) {
                    ++violations;
                    fail(o, r.experiment_id + " " + r.theorem + " x=" + format_double(*r.x) + " exact " +
                                format_double(*r.exact) + " > bound " + format_double(r.bound));
                }
            }
        }
    }
    const std::string summary = std::to_string(checked) + " exact comparisons, " + std::to_string(violations) +
                                " violations (B<=z orientation of the point bound: " +
                                std::to_string(other_orientation) + " exceedances, not counted)";
    o.detail = o.detail.empty() ? summary : summary + "; " + o.detail;
    return o;
}

Outcome criterion4(unsigned jobs) {
    Outcome o;
    double worst = 0.0;
    for (const double lambda : {0.1, 0.5, 1.0}) {
        for (const double y : {0.0, 0.5, 1.0}) {
            const double m = exact_supermartingale_mean_rademacher(Supermartingale::U, 10, lambda, y);
            worst = std::max(worst, m);
            o.fingerprint += format_double(m) + "\n";
            if (m > 1.0) fail(o, "E[U] = " + format_double(m) + " at lambda=" + format_double(lambda));
        }
    }
    McConfig cfg;
    cfg.n_rep = 100000;
    cfg.master_seed = kSeed;
    cfg.jobs = jobs;
    MeanCheck top;
    double top_lambda = 0.0;
    for (const double lambda : {0.1, 0.5, 1.0}) {
        const auto chk =
            supermartingale_check(Supermartingale::V, DifferenceModel::centered_pareto(1.9), 20, lambda, 1.5, cfg);
        o.fingerprint += format_double(chk.mean) + "," + format_double(chk.std_error) + "\n";
        if (chk.status != VerdictStatus::pass) fail(o, "V_n mean - 3 SE exceeds 1 at lambda=" + format_double(lambda));
        if (chk.mean >= top.mean) {
            top = chk;
            top_lambda = lambda;
        }
    }
    o.detail = "max exact E[U_n] = " + fmt("%.6f", worst) + "; max MC E[V_n] = " + fmt("%.5f", top.mean) + " (SE " +
               fmt("%.2g", top.std_error) + ", lambda " + fmt("%.1f", top_lambda) + ")" + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome criterion5(unsigned jobs) {
    Outcome o;
    std::size_t recs = 0, viol = 0, vac = 0;
    const std::vector<json> models = {{{"family", "bounded_above"}, {"y_cap", 1.0}, {"base", "reflected_exponential"}},
                                      {{"family", "rademacher"}}};
    for (std::size_t m = 0; m < models.size(); ++m) {
        for (const char* th : {"thm22_peeling", "cor22_peeling"}) {
            json j = {{"id", std::string(th) + "-m" + std::to_string(m)},
                      {"theorem", th},
                      {"model", models[m]},
                      {"n", 100},
                      {"grids", {{"x", {0.5, 1.0, 1.5, 2.0}}, {"M", {1, 2, 4}}}},
                      {"n_rep", 100000},
                      {"master_seed", kSeed}};
            if (std::string(th) == "thm22_peeling") j["grids"]["y"] = {0.0, 0.5, 1.0};
            const auto run = run_spec(j, jobs);
            o.fingerprint += run.report;
            recs += run.records.size();
            viol += count_status(run.records, "violation_evidence");
            vac += count_status(run.records, "vacuous");
        }
    }
    o.detail = std::to_string(recs) + " records, " + std::to_string(viol) + " violation_evidence, " +
               std::to_string(vac) + " vacuous";
    if (viol) fail(o, "violation evidence found");
    return o;
}

Outcome criterion6(unsigned jobs) {
    Outcome o;
    const json model = {{"family", "centered_pareto"}, {"beta_tail", 1.9}};
    const auto t23 = run_spec({{"id", "thm23"},
                               {"theorem", "thm23_exponent"},
                               {"model", model},
                               {"n", 50},
                               {"grids", {{"x", {0.5, 1.0}}, {"beta", {1.5}}}},
                               {"n_rep", 100000},
                               {"master_seed", kSeed}},
                              jobs);
    const auto t24 = run_spec({{"id", "thm24"},
                               {"theorem", "thm24_peeling"},
                               {"model", model},
                               {"n", 50},
                               {"grids", {{"x", {0.5, 1.0, 1.5, 2.0}}, {"beta", {1.5}}, {"M", {1, 2, 4}}}},
                               {"n_rep", 100000},
                               {"master_seed", kSeed}},
                              jobs);
    o.fingerprint = t23.report + t24.report;
    std::size_t bad23 = 0;
    for (const auto& r : t23.records) {
        if (!(r.ci_lo && *r.ci_lo <= r.bound)) ++bad23;
    }
    const auto primary = [](const ResultRecord& r) { return r.theorem == "thm24_peeling"; };
    const auto conservative = [](const ResultRecord& r) { return r.theorem == "thm24_peeling[conservative]"; };
    const std::size_t v24 = count_status(t24.records, "violation_evidence", primary);
    const std::size_t v24c = count_status(t24.records, "violation_evidence", conservative);
    o.detail = "expectation bound: " + std::to_string(t23.records.size()) + " records, " + std::to_string(bad23) +
               " with ci_lo above the bound; windowed bound: " + std::to_string(v24) + " violations (" +
               std::to_string(count_status(t24.records, "vacuous", primary)) + " vacuous), conservative variant " +
               std::to_string(v24c) + " violations";
    if (bad23) fail(o, "expectation bound below ci_lo");
    if (v24) fail(o, "windowed bound violation evidence");
    return o;
}

Outcome criterion7(unsigned jobs) {
    Outcome o;
    const std::vector<double> grid{0.5, 1.0, 2.0};
    const auto sweep = t_equivalence_sweep(20, grid, 100000, kSeed, jobs);
    o.fingerprint = std::to_string(sweep.checks) + "," + std::to_string(sweep.disagreements) + "," +
                    std::to_string(sweep.t_hits) + "\n";
    double worst = 0.0;
    for (const long n : {5L, 10L, 20L, 100L})
        for (const double x : {0.1, 0.5, 1.0, 1.5, 2.0})
            for (const double M : {1.0, 2.0, 4.0, 10.0}) {
                if (!(x * x < static_cast<double>(n))) continue;
                RateInputs t;
                t.x = x;
                t.n = n;
                t.M = M;
                RateInputs p;
                p.x = t_ratio_level(x, static_cast<std::size_t>(n));
                p.M = M;
                const double a = evaluate_bound(BoundSpec(BoundKind::thm31_tstat, t));
                const double b = evaluate_bound(BoundSpec(BoundKind::thm25_peeling, p));
                worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
            }
    o.detail = std::to_string(sweep.checks) + " indicator checks, " + std::to_string(sweep.disagreements) +
               " disagreements; max |thm31 - thm25(x')| = " + fmt("%.2g", worst);
    if (sweep.disagreements) fail(o, "event indicators disagree");
    if (!(worst <= 1e-12)) fail(o, "t-statistic bound differs from the transformed heavy-on-left bound");
    return o;
}

Outcome criterion8(unsigned jobs) {
    Outcome o;
    const json noise = {{"family", "scaled_two_point"}, {"p_up", 0.5}, {"up", 0.1}, {"down", -0.1}};
    const auto mc = run_spec({{"id", "regression"},
                              {"theorem", "thm33_regression"},
                              {"model", noise},
                              {"n", 50},
                              {"grids", {{"x", {0.2, 0.5, 1.0}}, {"M", {1, 2, 4}}}},
                              {"n_rep", 100000},
                              {"master_seed", kSeed},
                              {"regression", {{"theta", 0.5}, {"phi", "uniform"}}}},
                             jobs);
    // 0.03 keeps a nontrivial unnormalized event off the lattice |sum eps| / n
    const auto ex = run_spec({{"id", "regression-exact"},
                              {"theorem", "thm33_regression"},
                              {"model", noise},
                              {"n", 12},
                              {"grids", {{"x", {0.03, 0.2, 0.5, 1.0}}, {"M", {1, 2, 4}}}},
                              {"n_rep", 100000},
                              {"mode", "both"},
                              {"master_seed", kSeed},
                              {"regression", {{"theta", 0.5}, {"phi", 1.0}}}},
                             jobs);
    o.fingerprint = mc.report + ex.report;
    const std::size_t v1 = count_status(mc.records, "violation_evidence");
    const std::size_t v2 = count_status(ex.records, "violation_evidence");
    std::size_t outside = 0;
    for (const auto& r : ex.records) {
        if (!r.exact || !r.ci_lo) {
            fail(o, "exact variant record without both sides");
            continue;
        }
        if (*r.exact < *r.ci_lo || *r.exact > *r.ci_hi) ++outside;
    }
    o.detail = "MC: " + std::to_string(mc.records.size()) + " records, " + std::to_string(v1) +
               " violations; exact variant: " + std::to_string(ex.records.size()) + " records, " +
               std::to_string(v2) + " violations, " + std::to_string(outside) + " exact values outside the CI";
    if (v1 || v2) fail(o, "violation evidence found");
    return o;
}

std::string note_field(const std::string& note, const std::string& key) {
    const auto pos = note.find(key + "=");
    if (pos == std::string::npos) return {};
    const auto start = pos + key.size() + 1;
    return note.substr(start, note.find(';', start) - start);
}

Outcome criterion9(unsigned jobs) {
    Outcome o;
    const auto run = run_spec({{"id", "tsp"},
                               {"theorem", "thm34_tsp"},
                               {"n", 10},
                               {"grids", {{"x", {0.1, 0.5, 1.0, 2.0, 3.0, 4.0}}}},
                               {"n_rep", 200},
                               {"inner_rep", 2000},
                               {"master_seed", kSeed},
                               {"tsp", {{"d", 2}}}},
                              jobs);
    o.fingerprint = run.report;
    if (run.records.empty()) {
        fail(o, "no records");
        return o;
    }
    const std::string& note = run.records.front().note;
    const std::string rec = note_field(note, "reconciled");
    const auto slash = rec.find('/');
    const std::size_t reconciled = std::stoul(rec.substr(0, slash));
    const std::size_t instances = std::stoul(rec.substr(slash + 1));
    const std::size_t viol = count_status(run.records, "violation_evidence");
    o.detail = "reconciled " + rec + ", " + std::to_string(viol) + " violations, " +
               std::to_string(count_status(run.records, "vacuous")) + " vacuous, in_window " +
               note_field(note, "in_window") + ", P(d_i < 0) by i:";
    std::stringstream fracs(note_field(note, "neg_frac"));
    for (std::string f; std::getline(fracs, f, ',');) o.detail += " " + fmt("%.3f", std::stod(f));
    if (20 * reconciled < 19 * instances) fail(o, "reconciliation below 95%");
    if (viol) fail(o, "violation evidence found");
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome(unsigned)> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "rate-function identities", 1.0, criterion1},
        {2, "DvZ bound below Freedman", 1.0, criterion2},
        {3, "exact-oracle domination", 30.0, criterion3},
        {4, "supermartingale means", 60.0, criterion4},
        {5, "B_n(y) peeling bounds", 300.0, criterion5},
        {6, "beta-moment bounds", 300.0, criterion6},
        {7, "t-statistic event equivalence", 30.0, criterion7},
        {8, "regression bounds", 300.0, criterion8},
        {9, "TSP bound", 1200.0, criterion9},
    };
    bool all = true;
    std::vector<std::string> fingerprints(criteria.size());
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run(1);
        } catch (const std::exception& e) {
            fail(o, std::string("error: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.limit_s) fail(o, "runtime " + fmt("%.1f", secs) + " s over the " + fmt("%.0f", c.limit_s) + " s limit");
        fingerprints[i] = o.fingerprint;
        all = all && o.pass;
        std::printf("criterion %2d %s  %s: %s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }

    // Criterion 10: rerun 3-9 on three threads and compare the serialized reports.
    {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        std::size_t same = 0, compared = 0;
        for (std::size_t i = 0; i < criteria.size(); ++i) {
            if (criteria[i].id < 3) continue;
            ++compared;
            try {
                const auto again = criteria[i].run(3);
                if (again.fingerprint == fingerprints[i] && !again.fingerprint.empty()) {
                    ++same;
                } else {
                    fail(o, "criterion " + std::to_string(criteria[i].id) + " output differs");
                }
            } catch (const std::exception& e) {
                fail(o, std::string("error: ") + e.what());
            }
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::string summary =
            std::to_string(same) + "/" + std::to_string(compared) + " reruns byte-identical with jobs=3 vs jobs=1";
        o.detail = o.detail.empty() ? summary : summary + "; " + o.detail;
        all = all && o.pass;
        std::printf("criterion 10 %s  determinism: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    }
    return all ? 0 : 1;
}
