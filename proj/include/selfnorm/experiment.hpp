#pragma once

// Experiment specs (JSON), grid orchestration and report emission.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfnorm/bounds.hpp"
#include "selfnorm/processes.hpp"

namespace selfnorm {

enum class RunMode { mc, exact_oracle, both };

std::string_view to_string(RunMode m);

struct Grids {
    std::vector<double> x, y, z, b, M, beta, a, p_max;
};

struct ExperimentSpec {
    std::string id;
    BoundKind theorem = BoundKind::thm25_peeling;
    nlohmann::json model_desc;  // as written in the spec file
    DifferenceModel model = DifferenceModel::rademacher();
    std::size_t n = 10;
    Grids grids;
    std::uint64_t n_rep = 100000;
    std::uint64_t inner_rep = 2000;
    double gamma = 0.99;
    std::uint64_t master_seed = 0;
    RunMode mode = RunMode::mc;
    unsigned jobs = 1;
    bool timing = false;

    // regression (thm33_regression): theta and regressor; "uniform" or a constant
    double theta = 0.5;
    nlohmann::json phi = "uniform";
    // tsp (thm34_tsp)
    std::size_t tsp_d = 2;
    std::uint64_t tsp_mean_rep = 50000;
};

// Parse errors carry the line and column.
nlohmann::json read_json_file(const std::string& path);

// Throws ValidationError listing every problem found.
ExperimentSpec parse_spec(const nlohmann::json& j);
ExperimentSpec load_spec(const std::string& path);

DifferenceModel parse_model(const nlohmann::json& j);

nlohmann::json spec_to_json(const ExperimentSpec& spec);

struct ResultRecord {
    std::string experiment_id;
    std::string theorem;
    std::optional<double> x, y, z, b, M, beta;
    double bound = 0.0;
    std::optional<std::uint64_t> n_rep;
    std::optional<std::uint64_t> hits;
    std::optional<double> p_hat, ci_lo, ci_hi;
    std::optional<double> exact;
    std::optional<double> p_star;
    std::string status;
    std::string note;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;

    bool operator==(const ResultRecord&) const = default;
};

nlohmann::json record_to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::json& j);

// Runs the whole grid; on_record (optional) sees each record as it is produced.
// Errors are rethrown with the experiment id attached.
std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec,
                                         const std::function<void(const ResultRecord&)>& on_record = {});

// Exit status contract: 0 all pass/vacuous, 1 any violation_evidence.
int exit_status(const std::vector<ResultRecord>& records);

enum class ReportFormat { json, csv };

ReportFormat parse_format(const std::string& s);

std::string format_double(double v);
std::string render_report(const ExperimentSpec& spec, const std::vector<ResultRecord>& records, ReportFormat fmt);
std::string render_report(const nlohmann::json& spec_echo, const std::vector<ResultRecord>& records,
                          ReportFormat fmt);
void emit_report(const ExperimentSpec& spec, const std::vector<ResultRecord>& records, ReportFormat fmt,
                 const std::string& path);

struct LoadedReport {
    nlohmann::json spec;
    std::vector<ResultRecord> records;
};

LoadedReport load_report(const std::string& path);

// One CSV per theorem label: x,p_hat,ci_hi,bound. Returns the files written.
std::vector<std::string> emit_plot_data(const std::vector<ResultRecord>& records, const std::string& stem);

void write_file(const std::string& path, const std::string& content);

}  // namespace selfnorm
