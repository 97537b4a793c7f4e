#include "cli.hpp"

#include <filesystem>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "repdiv/errors.hpp"
#include "repdiv/io.hpp"
#include "repdiv/uncertainty.hpp"

namespace repdiv {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
    RunConfig run;
    std::string methods = "calibrated,uncalibrated,naive";
    unsigned threads = 0;
    // coverage only
    std::string scenario;
    int n_sims = 100;
    int c0 = 2000;
    bool r_set = false;
    bool b_set = false;
};

MethodSet parse_methods(const std::string& list)
{
    MethodSet set{false, false, false};
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        Method m;
        try {
            m = method_from_string(item);
        } catch (const Error&) {
            throw UsageError("unknown method '" + item +
                             "' (expected calibrated, uncalibrated or naive)");
        }
        if (m == Method::calibrated) set.calibrated = true;
        if (m == Method::uncalibrated) set.uncalibrated = true;
        if (m == Method::naive) set.naive = true;
    }
    return set;
}

void add_seed_and_out(CLI::App& cmd, Options& o)
{
    cmd.add_option("--seed", o.run.seed, "RNG seed")->capture_default_str();
    cmd.add_option("--out", o.run.out_dir, "Output directory")->capture_default_str();
    cmd.add_option("--threads", o.threads, "Worker threads (0 = all; REPDIV_THREADS caps it)")
        ->capture_default_str();
}

void add_fit_options(CLI::App& cmd, Options& o)
{
    cmd.add_option("--max-chat-ratio", o.run.fit.max_c_hat_ratio,
                   "Upper limit on C_hat / observed clones (inf disables)")
        ->capture_default_str();
    cmd.add_option("--outer-tol", o.run.fit.outer_tol, "EM convergence tolerance")
        ->capture_default_str();
    cmd.add_option("--max-outer-iters", o.run.fit.max_outer_iters, "EM iteration limit")
        ->capture_default_str();
}

void add_interval_options(CLI::App& cmd, Options& o, bool desk)
{
    auto* b = cmd.add_option("--B", o.run.calib.b_draws,
                             desk ? "Posterior draws per interval [200]" : "Posterior draws per interval")
                  ->each([&o](const std::string&) { o.b_set = true; });
    auto* r = cmd.add_option("--R", o.run.calib.r_replicates,
                             desk ? "Calibration replicates [100]" : "Calibration replicates")
                  ->each([&o](const std::string&) { o.r_set = true; });
    if (!desk) {
        b->capture_default_str();
        r->capture_default_str();
    }
    cmd.add_option("--alpha-grid-step", o.run.alpha_grid_step, "Spacing of the alpha grid")
        ->capture_default_str();
    cmd.add_option("--target", o.run.calib.target_coverage, "Target coverage")
        ->capture_default_str();
    cmd.add_option("--methods", o.methods, "Comma-separated interval methods")
        ->capture_default_str();
    cmd.add_flag("--per-clone-hyper", o.run.calib.per_clone_hyper,
                 "Draw hyperparameters separately for every clone");
}

void finish_config(Options& o)
{
    o.run.calib.methods = parse_methods(o.methods);
    if (o.run.alpha_grid_step > 0.0 && o.run.alpha_grid_step <= 0.5)
        o.run.calib.alphas = alpha_grid(o.run.alpha_grid_step);
    o.run.calib.threads = o.threads;
}

struct Library {
    std::string name;
    CloneCounts counts;
};

std::vector<Library> load_inputs(const RunConfig& run)
{
    std::vector<CountTable> tables;
    for (const auto& path : run.inputs) tables.push_back(parse_counts_file(path));
    std::vector<Library> out;
    if (run.merge) {
        const CountTable merged = merge_replicates(tables);
        out.push_back({merged.source, merged.to_counts()});
    } else {
        for (const auto& t : tables) out.push_back({t.source, t.to_counts()});
    }
    return out;
}

json fit_document(const RunConfig& run, const std::vector<Library>& libs)
{
    json fits = json::array();
    for (const auto& lib : libs) {
        const FitResult f = fit(lib.counts, run.fit);
        json entry = to_json(summarize(lib.name, lib.counts, f));
        try {
            const HyperCovariance cov = hyper_covariance(lib.counts, f);
            entry["covariance"] = json{{"var_a", cov.j_hat.xx}, {"cov_ab", cov.j_hat.xy}, {"var_b", cov.j_hat.yy}};
            entry["covariance_flagged"] = cov.flagged;
        } catch (const NumericError&) {
            entry["covariance"] = nullptr;
            entry["covariance_flagged"] = true;
        }
        fits.push_back(std::move(entry));
    }
    return {{"software_version", kSoftwareVersion},
            {"seed", run.seed},
            {"config", config_echo(run)},
            {"fits", fits}};
}

int cmd_fit(const Options& o, std::ostream& out)
{
    const auto libs = load_inputs(o.run);
    const fs::path path = fs::path(o.run.out_dir) / "fit.json";
    write_text_file(path, fit_document(o.run, libs).dump(2) + "\n");
    out << path.string() << "\n";
    return 0;
}

std::string intervals_text(const AnalysisReport& report)
{
    std::string s = config_line(report.config);
    s += "input\tfunctional\tmethod\tpoint_estimate\tlower\tupper\talpha0\n";
    for (const auto& a : report.analyses)
        for (const auto& r : a.intervals)
            s += a.fit.input + "\t" + to_string(r.functional) + "\t" + to_string(r.method) + "\t" +
                 format_double(r.point_estimate) + "\t" + format_double(r.lower) + "\t" +
                 format_double(r.upper) + "\t" + format_double(r.alpha0) + "\n";
    return s;
}

int cmd_ci(const Options& o, std::ostream& out)
{
    const auto libs = load_inputs(o.run);
    AnalysisReport report;
    report.seed = o.run.seed;
    report.config = config_echo(o.run);
    for (const auto& lib : libs) {
        const PipelineResult result = run_pipeline(lib.counts, o.run.fit, o.run.calib, o.run.seed);
        report.analyses.push_back(make_analysis(lib.name, lib.counts, result));
    }
    const fs::path dir(o.run.out_dir);
    write_text_file(dir / "report.json", to_json(report).dump(2) + "\n");
    write_text_file(dir / "report.tsv", intervals_text(report));
    if (o.run.calib.methods.calibrated)
        write_text_file(dir / "calibration.tsv", calibration_tsv(report.analyses, report.config));
    out << (dir / "report.json").string() << "\n";
    for (const auto& a : report.analyses)
        for (const auto& r : a.intervals)
            out << a.fit.input << "\t" << to_string(r.functional) << "\t" << to_string(r.method)
                << "\t" << format_double(r.point_estimate) << "\t[" << format_double(r.lower)
                << ", " << format_double(r.upper) << "]\n";
    return 0;
}

int cmd_coverage(const Options& o, std::ostream& out)
{
    if (o.scenario.empty()) throw UsageError("coverage needs --scenario NAME");
    const ScenarioPreset* preset = nullptr;
    try {
        preset = &find_preset(o.scenario);
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    Scenario s = desk_scenario(preset->model, o.run.seed);
    s.name = preset->name;
    s.n_sims = o.n_sims;
    s.c0 = o.c0;
    s.fit = o.run.fit;
    CalibConfig calib = o.run.calib;
    if (!o.r_set) calib.r_replicates = s.calib.r_replicates;
    if (!o.b_set) calib.b_draws = s.calib.b_draws;
    s.calib = calib;
    try {
        s.validate();
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }

    const CoverageReport report = run_scenario(s);
    const json echo = scenario_echo(s);
    const fs::path dir(o.run.out_dir);
    write_text_file(dir / "coverage.tsv", coverage_tsv(report, echo));
    write_text_file(dir / "records.tsv", records_tsv(report, echo));
    write_text_file(dir / "intervals.tsv", gallery_tsv(interval_gallery(report), echo));
    write_text_file(dir / "failures.tsv", failures_tsv(report, echo));
    out << "method\tfunctional\tcoverage\tstd_error\tn\n";
    for (const auto& c : report.cells)
        out << to_string(c.method) << "\t" << to_string(c.functional) << "\t"
            << format_double(c.coverage) << "\t" << format_double(c.std_error) << "\t" << c.n
            << "\n";
    return 0;
}

int cmd_curve(const Options& o, std::ostream& out)
{
    const auto libs = load_inputs(o.run);
    std::vector<std::pair<std::string, std::vector<CurvePoint>>> series;
    for (const auto& lib : libs) series.emplace_back(lib.name, cumulative_proportions(lib.counts));
    json echo = {{"inputs", o.run.inputs}, {"merge", o.run.merge}};
    const fs::path path = fs::path(o.run.out_dir) / "curve.tsv";
    write_text_file(path, curve_tsv(series, echo));
    out << path.string() << "\n";
    return 0;
}

void report_error(std::ostream& err, const std::string& code, const std::string& message,
                  int exit_code)
{
    json e = {{"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}}};
    err << e.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Clonal diversity estimation from TCR repertoire read counts"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", kSoftwareVersion);
    app.set_config("--config", "", "Read options from a TOML/INI file");

    Options o;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the Gamma prior and the unseen-clone count");
    auto* ci_cmd = app.add_subcommand("ci", "Calibrated intervals for clonality and entropy");
    auto* cov_cmd = app.add_subcommand("coverage", "Coverage study on a simulation preset");
    auto* curve_cmd = app.add_subcommand("curve", "Cumulative read-proportion curve");

    for (auto* cmd : {fit_cmd, ci_cmd, curve_cmd}) {
        cmd->add_option("inputs", o.run.inputs, "Count files")->required();
        cmd->add_flag("--merge", o.run.merge, "Sum replicates by clone id before analysis");
    }
    for (auto* cmd : {fit_cmd, ci_cmd, cov_cmd, curve_cmd}) add_seed_and_out(*cmd, o);
    for (auto* cmd : {fit_cmd, ci_cmd, cov_cmd}) add_fit_options(*cmd, o);
    add_interval_options(*ci_cmd, o, false);
    add_interval_options(*cov_cmd, o, true);

    std::string preset_help = "Simulation preset:";
    for (const auto& p : scenario_presets()) preset_help += " " + p.name;
    cov_cmd->add_option("--scenario", o.scenario, preset_help)->required();
    cov_cmd->add_option("--n-sims", o.n_sims, "Number of simulated datasets")
        ->capture_default_str();
    cov_cmd->add_option("--c0", o.c0, "True clone number of each simulated repertoire")
        ->capture_default_str();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("repdiv");
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kSoftwareVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        report_error(err, "usage_error", e.what(), static_cast<int>(ExitCode::usage));
        return static_cast<int>(ExitCode::usage);
    }

    try {
        finish_config(o);
        if (cov_cmd->parsed()) {
            o.run.inputs = {"<simulated>"};
            o.run.validate();
            return cmd_coverage(o, out);
        }
        o.run.validate();
        if (fit_cmd->parsed()) return cmd_fit(o, out);
        if (ci_cmd->parsed()) return cmd_ci(o, out);
        return cmd_curve(o, out);
    } catch (const Error& e) {
        const int code = static_cast<int>(e.exit_code());
        report_error(err, e.code(), e.what(), code);
        return code;
    } catch (const fs::filesystem_error& e) {
        report_error(err, "io_error", e.what(), static_cast<int>(ExitCode::data));
        return static_cast<int>(ExitCode::data);
    } catch (const std::exception& e) {
        report_error(err, "internal_error", e.what(), static_cast<int>(ExitCode::numeric));
        return static_cast<int>(ExitCode::numeric);
    }
}

}  // namespace repdiv
