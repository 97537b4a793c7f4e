#include "repdiv/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "repdiv/errors.hpp"

namespace repdiv {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Count files
// ---------------------------------------------------------------------------

CloneCounts CountTable::to_counts() const
{
    try {
        return CloneCounts(counts, source);
    } catch (const DataError& e) {
        throw DataError(e.code(), source + ": " + e.what());
    }
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

enum class CountParse { ok, not_integer, not_positive, overflow };

CountParse parse_count(std::string_view s, std::uint64_t& out)
{
    s = trim(s);
    if (s.empty()) return CountParse::not_integer;
    if (s.front() == '-') {
        std::int64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        return ec == std::errc() && p == s.data() + s.size() ? CountParse::not_positive
                                                              : CountParse::not_integer;
    }
    if (s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc::result_out_of_range) return CountParse::overflow;
    if (ec != std::errc() || p != s.data() + s.size()) return CountParse::not_integer;
    return out == 0 ? CountParse::not_positive : CountParse::ok;
}

}  // namespace

CountTable parse_counts_text(std::string_view text, const std::string& source)
{
    CountTable table;
    table.source = source;
    enum class Format { unknown, single, two_column } format = Format::unknown;
    bool seen_data = false;
    std::unordered_map<std::string, std::size_t> first_line;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') {
            if (end == text.size()) break;
            continue;
        }

        const auto tab = line.find('\t');
        const Format this_format = tab == std::string_view::npos ? Format::single : Format::two_column;
        if (format == Format::unknown) format = this_format;
        if (this_format != format)
            throw ParseError(source, line_no,
                             "mixes the one-count-per-line and clone_id<TAB>count formats");

        std::uint64_t value = 0;
        std::string_view count_field = format == Format::single ? line : line.substr(tab + 1);
        if (format == Format::two_column && count_field.find('\t') != std::string_view::npos)
            throw ParseError(source, line_no, "expected exactly two tab-separated columns");

        const CountParse status = parse_count(count_field, value);
        if (status == CountParse::not_integer && format == Format::two_column && !seen_data &&
            table.counts.empty()) {
            seen_data = true;  // header line
            continue;
        }
        switch (status) {
        case CountParse::ok: break;
        case CountParse::not_positive:
            throw ParseError(source, line_no,
                             "count must be a positive integer, got '" +
                                 std::string(trim(count_field)) + "'");
        case CountParse::overflow:
            throw ParseError(source, line_no, "count does not fit in 64 bits");
        case CountParse::not_integer:
            throw ParseError(source, line_no,
                             "expected an integer count, got '" + std::string(trim(count_field)) + "'");
        }
        seen_data = true;

        if (format == Format::two_column) {
            std::string id(trim(line.substr(0, tab)));
            if (id.empty()) throw ParseError(source, line_no, "empty clone id");
            const auto [it, inserted] = first_line.emplace(id, line_no);
            if (!inserted)
                throw ParseError(source, line_no,
                                 "duplicate clone id '" + id + "' (first seen on line " +
                                     std::to_string(it->second) + ")");
            table.ids.push_back(std::move(id));
        }
        table.counts.push_back(value);
        if (end == text.size()) break;
    }
    return table;
}

CountTable parse_counts_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("io_error", "cannot open count file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_counts_text(buf.str(), path.string());
}

CloneCounts parse_counts(const std::filesystem::path& path)
{
    return parse_counts_file(path).to_counts();
}

CountTable merge_replicates(const std::vector<CountTable>& replicates)
{
    if (replicates.empty()) throw UsageError("merge_replicates: no inputs");
    CountTable merged;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& rep : replicates) {
        if (!rep.has_ids() && !rep.counts.empty())
            throw DataError("merge_needs_ids",
                            rep.source + ": merging replicates needs clone ids; use the "
                                         "clone_id<TAB>count format");
        merged.source += (merged.source.empty() ? "" : "+") + rep.source;
        for (std::size_t i = 0; i < rep.counts.size(); ++i) {
            const auto [it, inserted] = index.emplace(rep.ids[i], merged.counts.size());
            if (inserted) {
                merged.ids.push_back(rep.ids[i]);
                merged.counts.push_back(rep.counts[i]);
            } else {
                merged.counts[it->second] += rep.counts[i];
            }
        }
    }
    return merged;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

RunConfig::RunConfig()
{
    fit.max_c_hat_ratio = 20.0;
}

void RunConfig::validate() const
{
    try {
        fit.validate();
        calib.validate();
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    if (inputs.empty()) throw UsageError("no input files");
    for (const auto& p : inputs)
        if (p.empty()) throw UsageError("empty input path");
    if (out_dir.empty()) throw UsageError("empty output directory");
    if (!(alpha_grid_step > 0.0 && alpha_grid_step <= 0.5))
        throw UsageError("alpha grid step must lie in (0, 0.5]");
    if (!calib.methods.calibrated && !calib.methods.uncalibrated && !calib.methods.naive)
        throw UsageError("no interval method selected");
}

namespace {

json methods_json(const MethodSet& m)
{
    json out = json::array();
    for (Method x : {Method::calibrated, Method::uncalibrated, Method::naive})
        if (m.contains(x)) out.push_back(to_string(x));
    return out;
}

json fit_echo(const FitConfig& f)
{
    return {{"outer_tol", f.outer_tol},
            {"inner_tol", f.inner_tol},
            {"max_outer_iters", f.max_outer_iters},
            {"max_inner_iters", f.max_inner_iters},
            {"lower_bound", f.lower_bound},
            {"upper_bound", f.upper_bound},
            {"accelerate", f.accelerate},
            {"polish", f.polish},
            {"max_polish_iters", f.max_polish_iters},
            {"max_c_hat_ratio", std::isfinite(f.max_c_hat_ratio) ? json(f.max_c_hat_ratio)
                                                                  : json("inf")}};
}

json calib_echo(const CalibConfig& c, double step)
{
    return {{"R", c.r_replicates},
            {"B", c.b_draws},
            {"target", c.target_coverage},
            {"alpha_grid_step", step},
            {"alpha_grid_size", c.alphas.size()},
            {"per_clone_hyper", c.per_clone_hyper},
            {"methods", methods_json(c.methods)}};
}

}  // namespace

json config_echo(const RunConfig& config)
{
    return {{"inputs", config.inputs},
            {"seed", config.seed},
            {"merge", config.merge},
            {"fit", fit_echo(config.fit)},
            {"calibration", calib_echo(config.calib, config.alpha_grid_step)}};
}

json scenario_echo(const Scenario& s)
{
    const double step = s.calib.alphas.empty() ? 0.0 : s.calib.alphas.front();
    return {{"scenario", s.name},
            {"model", s.model.kind == IntensityModel::Kind::gamma ? "gamma" : "lognormal"},
            {"p1", s.model.p1},
            {"p2", s.model.p2},
            {"c0", s.c0},
            {"n_sims", s.n_sims},
            {"seed", s.seed},
            {"fit", fit_echo(s.fit)},
            {"calibration", calib_echo(s.calib, step)}};
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

FitSummary summarize(const std::string& input, const CloneCounts& counts, const FitResult& fit)
{
    FitSummary s;
    s.input = input;
    s.observed_c = fit.observed_c;
    s.total_reads = counts.total_reads();
    s.shape = fit.prior.shape;
    s.rate = fit.prior.rate;
    s.n0_hat = fit.n0_hat;
    s.c_hat = fit.c_hat;
    s.loglik = fit.loglik();
    s.converged = fit.converged;
    s.clamped = fit.clamped;
    s.constrained = fit.constrained;
    s.outer_iterations = fit.outer_iterations;
    return s;
}

bool operator==(const InputAnalysis& a, const InputAnalysis& b)
{
    if (!(a.fit == b.fit) || a.intervals != b.intervals || a.neg_entropy != b.neg_entropy ||
        a.curves.size() != b.curves.size())
        return false;
    for (std::size_t i = 0; i < a.curves.size(); ++i) {
        const auto& x = a.curves[i];
        const auto& y = b.curves[i];
        if (x.functional != y.functional || x.alphas != y.alphas || x.coverage != y.coverage ||
            x.chosen_alpha0 != y.chosen_alpha0 || x.achieved_coverage != y.achieved_coverage ||
            x.replicates_used != y.replicates_used || x.replicates_failed != y.replicates_failed)
            return false;
    }
    return true;
}

InputAnalysis make_analysis(const std::string& input, const CloneCounts& counts,
                            const PipelineResult& result)
{
    InputAnalysis a;
    a.fit = summarize(input, counts, result.fit);
    a.intervals = result.reports;
    for (const auto& r : result.reports)
        if (r.functional == Functional::entropy)
            a.neg_entropy.push_back({r.method, -r.point_estimate, -r.upper, -r.lower});
    if (!result.curves[0].alphas.empty())
        a.curves.assign(result.curves.begin(), result.curves.end());
    return a;
}

namespace {

Functional functional_from_string(const std::string& s)
{
    if (s == "clonality") return Functional::clonality;
    if (s == "entropy") return Functional::entropy;
    throw DataError("report_format", "unknown functional '" + s + "'");
}

json interval_json(const IntervalReport& r)
{
    return {{"functional", to_string(r.functional)},
            {"method", to_string(r.method)},
            {"point_estimate", r.point_estimate},
            {"lower", r.lower},
            {"upper", r.upper},
            {"alpha0", r.alpha0},
            {"draws", r.draws},
            {"draws_min", r.draws_min},
            {"draws_max", r.draws_max}};
}

IntervalReport interval_from_json(const json& j)
{
    IntervalReport r;
    r.functional = functional_from_string(j.at("functional").get<std::string>());
    r.method = method_from_string(j.at("method").get<std::string>());
    r.point_estimate = j.at("point_estimate").get<double>();
    r.lower = j.at("lower").get<double>();
    r.upper = j.at("upper").get<double>();
    r.alpha0 = j.at("alpha0").get<double>();
    r.draws = j.at("draws").get<int>();
    r.draws_min = j.at("draws_min").get<double>();
    r.draws_max = j.at("draws_max").get<double>();
    return r;
}

json curve_json(const CoverageCurve& c)
{
    return {{"functional", to_string(c.functional)},
            {"chosen_alpha0", c.chosen_alpha0},
            {"achieved_coverage", c.achieved_coverage},
            {"replicates_used", c.replicates_used},
            {"replicates_failed", c.replicates_failed},
            {"alphas", c.alphas},
            {"coverage", c.coverage}};
}

CoverageCurve curve_from_json(const json& j)
{
    CoverageCurve c;
    c.functional = functional_from_string(j.at("functional").get<std::string>());
    c.chosen_alpha0 = j.at("chosen_alpha0").get<double>();
    c.achieved_coverage = j.at("achieved_coverage").get<double>();
    c.replicates_used = j.at("replicates_used").get<int>();
    c.replicates_failed = j.at("replicates_failed").get<int>();
    c.alphas = j.at("alphas").get<std::vector<double>>();
    c.coverage = j.at("coverage").get<std::vector<double>>();
    return c;
}

}  // namespace

json to_json(const FitSummary& f)
{
    return {{"input", f.input},
            {"observed_c", f.observed_c},
            {"total_reads", f.total_reads},
            {"a_hat", f.shape},
            {"b_hat", f.rate},
            {"n0_hat", f.n0_hat},
            {"c_hat", f.c_hat},
            {"loglik", f.loglik},
            {"converged", f.converged},
            {"clamped", f.clamped},
            {"constrained", f.constrained},
            {"outer_iterations", f.outer_iterations}};
}

FitSummary fit_summary_from_json(const json& j)
{
    FitSummary f;
    f.input = j.at("input").get<std::string>();
    f.observed_c = j.at("observed_c").get<std::uint64_t>();
    f.total_reads = j.at("total_reads").get<std::uint64_t>();
    f.shape = j.at("a_hat").get<double>();
    f.rate = j.at("b_hat").get<double>();
    f.n0_hat = j.at("n0_hat").get<double>();
    f.c_hat = j.at("c_hat").get<std::uint64_t>();
    f.loglik = j.at("loglik").get<double>();
    f.converged = j.at("converged").get<bool>();
    f.clamped = j.at("clamped").get<bool>();
    f.constrained = j.at("constrained").get<bool>();
    f.outer_iterations = j.at("outer_iterations").get<int>();
    return f;
}

json to_json(const AnalysisReport& report)
{
    json analyses = json::array();
    for (const auto& a : report.analyses) {
        json intervals = json::array();
        for (const auto& r : a.intervals) intervals.push_back(interval_json(r));
        json neg = json::array();
        for (const auto& n : a.neg_entropy)
            neg.push_back({{"method", to_string(n.method)},
                           {"point_estimate", n.point_estimate},
                           {"lower", n.lower},
                           {"upper", n.upper}});
        json curves = json::array();
        for (const auto& c : a.curves) curves.push_back(curve_json(c));
        analyses.push_back({{"fit", to_json(a.fit)},
                            {"intervals", intervals},
                            {"neg_entropy", neg},
                            {"calibration", curves}});
    }
    return {{"software_version", report.software_version},
            {"seed", report.seed},
            {"config", report.config},
            {"analyses", analyses}};
}

AnalysisReport analysis_from_json(const json& j)
{
    try {
        AnalysisReport r;
        r.software_version = j.at("software_version").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config = j.at("config");
        for (const auto& a : j.at("analyses")) {
            InputAnalysis in;
            in.fit = fit_summary_from_json(a.at("fit"));
            for (const auto& x : a.at("intervals")) in.intervals.push_back(interval_from_json(x));
            for (const auto& x : a.at("neg_entropy"))
                in.neg_entropy.push_back({method_from_string(x.at("method").get<std::string>()),
                                          x.at("point_estimate").get<double>(),
                                          x.at("lower").get<double>(), x.at("upper").get<double>()});
            for (const auto& x : a.at("calibration")) in.curves.push_back(curve_from_json(x));
            r.analyses.push_back(std::move(in));
        }
        return r;
    } catch (const json::exception& e) {
        throw DataError("report_format", std::string("malformed analysis report: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Text output
// ---------------------------------------------------------------------------

std::string format_double(double x)
{
    // json's number serializer already emits the shortest round-trip form
    return json(x).dump();
}

void write_text_file(const std::filesystem::path& path, const std::string& body)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("io_error", "cannot write '" + path.string() + "'");
    out << body;
    if (!out) throw DataError("io_error", "failed writing '" + path.string() + "'");
}

std::string config_line(const json& echo) { return "# config: " + echo.dump() + "\n"; }

std::string coverage_tsv(const CoverageReport& report, const json& echo)
{
    std::string s = config_line(echo);
    s += "method\tfunctional\tn\tcovered\tcoverage\tstd_error\n";
    for (const auto& c : report.cells)
        s += std::string(to_string(c.method)) + "\t" + to_string(c.functional) + "\t" +
             std::to_string(c.n) + "\t" + std::to_string(c.covered) + "\t" +
             format_double(c.coverage) + "\t" + format_double(c.std_error) + "\n";
    return s;
}

std::string records_tsv(const CoverageReport& report, const json& echo)
{
    std::string s = config_line(echo);
    s += "sim\tmethod\tfunctional\ttruth\tpoint_estimate\tlower\tupper\talpha0\tcovered\n";
    for (const auto& r : report.records)
        s += std::to_string(r.sim_index) + "\t" + to_string(r.method) + "\t" +
             to_string(r.functional) + "\t" + format_double(r.truth) + "\t" +
             format_double(r.interval.point_estimate) + "\t" + format_double(r.interval.lower) +
             "\t" + format_double(r.interval.upper) + "\t" + format_double(r.interval.alpha0) +
             "\t" + (r.covered ? "1" : "0") + "\n";
    return s;
}

std::string gallery_tsv(const std::vector<GalleryEntry>& gallery, const json& echo)
{
    std::string s = config_line(echo);
    s += "rank\ttruth\tlower\tupper\n";
    for (std::size_t i = 0; i < gallery.size(); ++i)
        s += std::to_string(i + 1) + "\t" + format_double(gallery[i].truth) + "\t" +
             format_double(gallery[i].lower) + "\t" + format_double(gallery[i].upper) + "\n";
    return s;
}

std::string failures_tsv(const CoverageReport& report, const json& echo)
{
    std::string s = config_line(echo);
    s += "sim\tcode\tmessage\n";
    for (const auto& f : report.failures) {
        std::string msg = f.message;
        for (auto& ch : msg)
            if (ch == '\t' || ch == '\n') ch = ' ';
        s += std::to_string(f.sim_index) + "\t" + f.code + "\t" + msg + "\n";
    }
    return s;
}

std::string curve_tsv(const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves,
                      const json& echo)
{
    std::string s = config_line(echo);
    s += "input\trank_fraction\tcumulative_read_fraction\n";
    for (const auto& [name, pts] : curves)
        for (const auto& p : pts)
            s += name + "\t" + format_double(p.rank_fraction) + "\t" +
                 format_double(p.cumulative_read_fraction) + "\n";
    return s;
}

std::string calibration_tsv(const std::vector<InputAnalysis>& analyses, const json& echo)
{
    std::string s = config_line(echo);
    s += "input\tfunctional\talpha\tcoverage\n";
    for (const auto& a : analyses)
        for (const auto& c : a.curves)
            for (std::size_t k = 0; k < c.alphas.size(); ++k)
                s += a.fit.input + "\t" + to_string(c.functional) + "\t" +
                     format_double(c.alphas[k]) + "\t" + format_double(c.coverage[k]) + "\n";
    return s;
}

}  // namespace repdiv
