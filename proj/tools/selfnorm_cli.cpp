// selfnorm: bound calculator and verification driver.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "selfnorm/bounds.hpp"
#include "selfnorm/errors.hpp"
#include "selfnorm/experiment.hpp"

namespace {

using namespace selfnorm;

constexpr int kExitConfig = 2;

struct RunOptions {
    std::string spec;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> reps;
    std::string format = "json";
    std::string out;
    bool plot = false;
    unsigned jobs = 1;
    bool timing = false;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
    cmd->add_option("--spec", o.spec, "experiment spec (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "master seed; falls back to $SELFNORM_SEED, then the spec, then 0");
    cmd->add_option("--reps", o.reps, "override n_rep (replicates; TSP instances)");
    cmd->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    cmd->add_option("--out", o.out, "report path (default: stdout)");
    cmd->add_flag("--emit-plot-data", o.plot, "also write <out>.<theorem>.plot.csv with x,p_hat,ci_hi,bound");
    cmd->add_option("--jobs", o.jobs, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_flag("--timing", o.timing, "record wall-clock milliseconds (reports are no longer byte-stable)");
}

ExperimentSpec resolve_spec(const RunOptions& o, std::optional<RunMode> force_mode) {
    auto j = read_json_file(o.spec);
    if (!j.is_object()) throw ValidationError({o.spec + ": spec must be a JSON object"});
    if (o.seed) {
        j["master_seed"] = *o.seed;
    } else if (const char* env = std::getenv("SELFNORM_SEED"); env && *env) {
        char* end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (*end != '\0') throw ValidationError({"SELFNORM_SEED must be an unsigned integer"});
        j["master_seed"] = v;
    }
    if (o.reps) j["n_rep"] = *o.reps;
    if (force_mode) j["mode"] = std::string(to_string(*force_mode));
    auto spec = parse_spec(j);
    spec.jobs = o.jobs;
    spec.timing = o.timing;
    return spec;
}

int run(const RunOptions& o, std::optional<RunMode> force_mode) {
    const auto spec = resolve_spec(o, force_mode);
    const auto records = run_experiment(spec);
    const auto fmt = parse_format(o.format);
    const auto text = render_report(spec, records, fmt);
    if (o.out.empty()) {
        std::cout << text;
    } else {
        write_file(o.out, text);
    }
    if (o.plot) {
        const std::string stem = o.out.empty() ? spec.id : o.out;
        for (const auto& f : emit_plot_data(records, stem)) std::cerr << "wrote " << f << "\n";
    }
    return exit_status(records);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-normalized martingale bounds: calculators and Monte Carlo verification"};
    app.require_subcommand(1);

    // bounds eval
    auto* bounds = app.add_subcommand("bounds", "closed-form bound calculators");
    bounds->require_subcommand(1);
    auto* eval = bounds->add_subcommand("eval", "evaluate one bound");
    std::string kind_name;
    RateInputs in;
    bool clamp = false;
    std::string kinds_help = "bound kind:";
    for (const auto k : all_bound_kinds()) kinds_help += " " + std::string(to_string(k));
    eval->add_option("--kind", kind_name, kinds_help)->required();
    eval->add_option("--x", in.x, "deviation level");
    eval->add_option("--y", in.y, "truncation level");
    eval->add_option("--z", in.z, "variance-process level");
    eval->add_option("--b", in.b, "peeling base scale");
    eval->add_option("--M", in.M, "peeling range ratio");
    eval->add_option("--beta", in.beta, "moment order in (1, 2)");
    eval->add_option("--n", in.n, "sample size");
    eval->add_option("--sigma", in.sigma, "noise standard deviation");
    eval->add_option("--t", in.t, "TSP deviation level");
    eval->add_option("--d", in.d, "TSP dimension");
    eval->add_option("--a", in.a_bnd, "bound on |xi| (Bernstein, Freedman, DvZ) or offset a (Bercu-Touati)");
    eval->add_option("--L", in.L, "variance cap");
    eval->add_option("--q", in.q, "Hoelder exponent");
    eval->add_option("--var", in.var, "var(S_n)");
    eval->add_option("--C", in.C, "Azuma constant");
    eval->add_flag("--clamp", clamp, "clamp the value to [0, 1]");

    RunOptions verify_opts, oracle_opts;
    auto* verify = app.add_subcommand("verify", "run an experiment spec and write a report");
    add_run_options(verify, verify_opts);
    auto* oracle = app.add_subcommand("oracle", "run a spec in exact-enumeration mode only");
    add_run_options(oracle, oracle_opts);

    auto* report = app.add_subcommand("report", "convert a JSON report");
    std::string report_in, report_format = "csv", report_out;
    bool report_plot = false;
    report->add_option("--in", report_in, "JSON report")->required()->check(CLI::ExistingFile);
    report->add_option("--format", report_format, "output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    report->add_option("--out", report_out, "output path (default: stdout)");
    report->add_flag("--emit-plot-data", report_plot, "also write plot tuples next to --out");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*eval) {
            const auto kind = parse_bound_kind(kind_name);
            if (!kind) throw ValidationError({"unknown bound kind " + kind_name});
            double v = evaluate_bound(BoundSpec(*kind, in));
            if (clamp) v = clamp_probability(v);
            std::printf("%s\n", format_double(v).c_str());
            return 0;
        }
        if (*verify) return run(verify_opts, std::nullopt);
        if (*oracle) return run(oracle_opts, RunMode::exact_oracle);
        if (*report) {
            const auto rep = load_report(report_in);
            const auto text = render_report(rep.spec, rep.records, parse_format(report_format));
            if (report_out.empty()) {
                std::cout << text;
            } else {
                write_file(report_out, text);
            }
            if (report_plot) {
                const std::string stem = report_out.empty() ? report_in : report_out;
                for (const auto& f : emit_plot_data(rep.records, stem)) std::cerr << "wrote " << f << "\n";
            }
            return 0;
        }
    } catch (const ValidationError& e) {
        for (const auto& m : e.issues()) std::cerr << "error: " << m << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
