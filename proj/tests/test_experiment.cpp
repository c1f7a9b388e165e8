#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "selfnorm/errors.hpp"
#include "selfnorm/experiment.hpp"

using namespace selfnorm;
using nlohmann::json;

namespace {

json thm25_spec() {
    return json::parse(R"({
        "id": "t25",
        "theorem": "thm25_peeling",
        "model": {"family": "rademacher"},
        "n": 10,
        "grids": {"x": [1.0, 2.0], "M": [1, 2], "b": [2.0]},
        "n_rep": 5000,
        "master_seed": 3
    })");
}

std::vector<std::string> issues_of(const json& j) {
    try {
        parse_spec(j);
    } catch (const ValidationError& e) {
        return e.issues();
    }
    return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
    return std::any_of(issues.begin(), issues.end(), [&](const auto& s) { return s.find(needle) != std::string::npos; });
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("spec defaults") {
    json j = thm25_spec();
    j.erase("n_rep");
    j.erase("master_seed");
    const auto s = parse_spec(j);
    CHECK(s.n_rep == 100000);
    CHECK(s.inner_rep == 2000);
    CHECK(s.gamma == 0.99);
    CHECK(s.master_seed == 0);
    CHECK(s.mode == RunMode::mc);
    CHECK(s.grids.p_max == std::vector<double>{51.0});
    CHECK(s.theorem == BoundKind::thm25_peeling);
}

TEST_CASE("spec validation messages") {
    json j = json::parse(R"({"id": "e", "theorem": "thm23_exponent", "model": {"family": "rademacher"}, "n": 10,
                             "grids": {"x": [1], "beta": [2.5]}})");
    CHECK(mentions(issues_of(j), "grids.beta[0] = 2.5 outside admissible interval (1, 2)"));

    j = thm25_spec();
    j["mode"] = "exact_oracle";
    j["n"] = 25;
    CHECK(mentions(issues_of(j), "n <= 20"));

    j = thm25_spec();
    j["grids"]["x"] = json::array();
    CHECK(mentions(issues_of(j), "grids.x must be nonempty"));

    j = thm25_spec();
    j["gamma"] = 1.5;
    j["n_rep"] = 10;
    j["colour"] = "blue";
    const auto many = issues_of(j);
    CHECK(many.size() >= 3);
    CHECK(mentions(many, "gamma"));
    CHECK(mentions(many, "n_rep"));
    CHECK(mentions(many, "unknown field colour"));

    j = thm25_spec();
    j["model"] = {{"family", "scaled_two_point"}, {"p_up", 2.0 / 3.0}, {"up", 1.0}, {"down", -2.0}};
    CHECK(mentions(issues_of(j), "not heavy on left"));

    j = thm25_spec();
    j["theorem"] = "azuma_tsp";
    CHECK(mentions(issues_of(j), "calculator-only"));
}

TEST_CASE("parse errors carry the line number") {
    const auto path = temp_path("selfnorm_bad_spec.json");
    {
        std::ofstream out(path);
        out << "{\n  \"id\": \"x\",\n  \"n\": 10,,\n}\n";
    }
    try {
        read_json_file(path);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("thm25 in mode both") {
    json j = thm25_spec();
    j["mode"] = "both";
    const auto spec = parse_spec(j);
    const auto recs = run_experiment(spec);
    CHECK(recs.size() == 4);
    for (const auto& r : recs) {
        CHECK(r.status != "violation_evidence");
        REQUIRE(r.exact.has_value());
        REQUIRE(r.ci_lo.has_value());
        CHECK(*r.ci_lo <= *r.exact);
        CHECK(*r.ci_hi >= *r.exact);
        CHECK(*r.exact <= r.bound);
        CHECK(r.wall_ms == 0.0);
    }
    CHECK(exit_status(recs) == 0);
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
    auto spec = parse_spec(thm25_spec());
    const auto a = render_report(spec, run_experiment(spec), ReportFormat::json);
    const auto b = render_report(spec, run_experiment(spec), ReportFormat::json);
    spec.jobs = 3;
    const auto c = render_report(spec, run_experiment(spec), ReportFormat::json);
    CHECK(a == b);
    CHECK(a == c);
    const auto csv1 = render_report(spec, run_experiment(spec), ReportFormat::csv);
    spec.jobs = 1;
    const auto csv2 = render_report(spec, run_experiment(spec), ReportFormat::csv);
    CHECK(csv1 == csv2);
}

TEST_CASE("report formats") {
    json j = thm25_spec();
    j["grids"] = {{"x", {2.0}}, {"M", {1}}, {"b", {2.0}}};
    const auto spec = parse_spec(j);
    const auto recs = run_experiment(spec);
    REQUIRE(recs.size() == 1);

    const auto csv = render_report(spec, recs, ReportFormat::csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.rfind("experiment_id,theorem,x,y,z,b,M,beta,bound,p_hat,ci_lo,ci_hi,exact,status,seed,wall_ms\n", 0) == 0);

    const auto path = temp_path("selfnorm_report.json");
    emit_report(spec, recs, ReportFormat::json, path);
    const auto loaded = load_report(path);
    CHECK(loaded.records == recs);
    CHECK(render_report(loaded.spec, loaded.records, ReportFormat::json) == slurp(path));
    CHECK(record_from_json(record_to_json(recs[0])) == recs[0]);

    const auto stem = temp_path("selfnorm_plot");
    const auto files = emit_plot_data(recs, stem);
    REQUIRE(files.size() == 1);
    const auto plot = slurp(files[0]);
    CHECK(plot.rfind("x,p_hat,ci_hi,bound\n", 0) == 0);
    CHECK(std::count(plot.begin(), plot.end(), '\n') == 2);
    std::filesystem::remove(path);
    for (const auto& f : files) std::filesystem::remove(f);
}

TEST_CASE("exit status") {
    ResultRecord ok;
    ok.status = "pass";
    ResultRecord vac;
    vac.status = "vacuous";
    ResultRecord bad;
    bad.status = "violation_evidence";
    CHECK(exit_status({ok, vac}) == 0);
    CHECK(exit_status({ok, bad, vac}) == 1);
    CHECK(exit_status({}) == 0);
}

TEST_CASE("format_double round-trips") {
    for (const double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125}) CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(0.5) == "0.5");
}
