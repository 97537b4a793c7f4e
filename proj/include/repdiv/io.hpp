#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "repdiv/calibration.hpp"
#include "repdiv/em_fit.hpp"
#include "repdiv/repertoire.hpp"
#include "repdiv/sim_harness.hpp"

namespace repdiv {

inline constexpr const char* kSoftwareVersion = "0.1.0";

/// Counts read from one file. `ids` is filled for the two-column format and
/// left empty for the one-count-per-line format.
struct CountTable {
    std::string source;
    std::vector<std::string> ids;
    std::vector<std::uint64_t> counts;

    bool has_ids() const noexcept { return !ids.empty(); }
    CloneCounts to_counts() const;
};

/// Accepts either one positive integer per line, or `clone_id<TAB>count` with
/// an optional header line. Blank lines and lines starting with '#' are
/// skipped; CRLF line endings are accepted.
CountTable parse_counts_text(std::string_view text, const std::string& source);
CountTable parse_counts_file(const std::filesystem::path& path);
CloneCounts parse_counts(const std::filesystem::path& path);

/// Per-clone sum across replicates, aligned on clone id. Clones are listed in
/// order of first appearance.
CountTable merge_replicates(const std::vector<CountTable>& replicates);

struct RunConfig {
    std::vector<std::string> inputs;
    std::uint64_t seed = 1;
    FitConfig fit;
    CalibConfig calib;
    double alpha_grid_step = 0.002;
    bool merge = false;
    std::string out_dir = ".";

    RunConfig();
    /// Range checks; throws UsageError.
    void validate() const;
};

/// Every setting that influences the numbers in the output files. Thread
/// counts and the output directory are left out on purpose.
nlohmann::json config_echo(const RunConfig& config);
nlohmann::json scenario_echo(const Scenario& scenario);

struct FitSummary {
    std::string input;
    std::uint64_t observed_c = 0;
    std::uint64_t total_reads = 0;
    double shape = 0.0;
    double rate = 0.0;
    double n0_hat = 0.0;
    std::uint64_t c_hat = 0;
    double loglik = 0.0;
    bool converged = false;
    bool clamped = false;
    bool constrained = false;
    int outer_iterations = 0;

    friend bool operator==(const FitSummary&, const FitSummary&) = default;
};
FitSummary summarize(const std::string& input, const CloneCounts& counts, const FitResult& fit);

struct SignedInterval {
    Method method = Method::calibrated;
    double point_estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;

    friend bool operator==(const SignedInterval&, const SignedInterval&) = default;
};

struct InputAnalysis {
    FitSummary fit;
    std::vector<IntervalReport> intervals;
    std::vector<SignedInterval> neg_entropy;  // -entropy, bounds swapped
    std::vector<CoverageCurve> curves;

    friend bool operator==(const InputAnalysis&, const InputAnalysis&);
};

struct AnalysisReport {
    std::string software_version = kSoftwareVersion;
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::vector<InputAnalysis> analyses;

    friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

InputAnalysis make_analysis(const std::string& input, const CloneCounts& counts,
                            const PipelineResult& result);

nlohmann::json to_json(const AnalysisReport& report);
AnalysisReport analysis_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FitSummary& fit);
FitSummary fit_summary_from_json(const nlohmann::json& j);

/// Shortest text that reads back to the same double.
std::string format_double(double x);

/// Writes `body` to `path` atomically enough for our purposes (whole file,
/// truncating), creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& body);

/// "# config: {...}\n"
std::string config_line(const nlohmann::json& echo);

std::string coverage_tsv(const CoverageReport& report, const nlohmann::json& echo);
std::string records_tsv(const CoverageReport& report, const nlohmann::json& echo);
std::string gallery_tsv(const std::vector<GalleryEntry>& gallery, const nlohmann::json& echo);
std::string failures_tsv(const CoverageReport& report, const nlohmann::json& echo);
std::string curve_tsv(const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves,
                      const nlohmann::json& echo);
std::string calibration_tsv(const std::vector<InputAnalysis>& analyses, const nlohmann::json& echo);

}  // namespace repdiv
