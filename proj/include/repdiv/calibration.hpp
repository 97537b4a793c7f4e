#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "repdiv/em_fit.hpp"
#include "repdiv/posterior.hpp"
#include "repdiv/repertoire.hpp"
#include "repdiv/rng.hpp"
#include "repdiv/uncertainty.hpp"

namespace repdiv {

enum class Method { calibrated, uncalibrated, naive };

const char* to_string(Method m) noexcept;
Method method_from_string(const std::string& name);

struct MethodSet {
    bool calibrated = true;
    bool uncalibrated = true;
    bool naive = true;

    bool contains(Method m) const noexcept;
};

/// 0.002, 0.004, ..., 0.5 for step 0.002.
std::vector<double> alpha_grid(double step = 0.002, double max_alpha = 0.5);

struct CalibConfig {
    int r_replicates = 200;
    int b_draws = 500;
    double target_coverage = 0.95;
    std::vector<double> alphas = alpha_grid();
    bool per_clone_hyper = false;
    // Degenerate test mode: replicates reuse the original fit and sample with
    // the plug-in prior instead of refitting.
    bool refit = true;
    SamplerMode mode = SamplerMode::hyper_uncertain;
    MethodSet methods;
    unsigned threads = 1;

    void validate() const;
};

struct CoverageCurve {
    Functional functional = Functional::clonality;
    std::vector<double> alphas;
    std::vector<double> coverage;
    double chosen_alpha0 = 0.0;
    double achieved_coverage = 0.0;
    int replicates_used = 0;
    int replicates_failed = 0;
};

struct IntervalReport {
    Functional functional = Functional::clonality;
    Method method = Method::calibrated;
    double point_estimate = 0.0;  // posterior median
    double lower = 0.0;
    double upper = 0.0;
    double alpha0 = 0.0;
    int draws = 0;
    double draws_min = 0.0;
    double draws_max = 0.0;

    friend bool operator==(const IntervalReport&, const IntervalReport&) = default;
};

struct Interval {
    double lower;
    double upper;
};

/// Equal-tail percentile interval of sorted draws at level alpha (type 7).
Interval interval_from_draws(std::span<const double> sorted_draws, double alpha);

struct Replicate {
    double truth_clonality = 0.0;
    double truth_entropy = 0.0;
    CloneCounts counts;
};

/// Draws c_hat intensities from the fitted prior, records their functionals and
/// keeps the positive Poisson counts. Redrawn up to ten times while fewer than
/// two clones are observed.
Replicate simulate_replicate(const FitResult& fit, const RngStream& rng);

/// Where `truth` sits among sorted draws. `u` is the mid-rank. q_low is the
/// smallest q whose type-7 quantile is >= truth (2 if none), q_high the largest
/// q whose quantile is <= truth (-1 if none). The interval at level alpha
/// covers truth exactly when alpha/2 <= q_high and 1 - alpha/2 >= q_low.
struct RankPosition {
    double u = 0.0;
    double q_low = 0.0;
    double q_high = 0.0;

    bool covered(double alpha) const noexcept;
};
RankPosition replicate_rank(std::span<const double> sorted_draws, double truth);

/// One calibration replicate: simulate from the fit, refit, resample. Draws
/// are returned sorted. Errors from the refit propagate.
struct ReplicateDraws {
    Replicate replicate;
    FitResult fit;
    DiversityDraws draws;
};
ReplicateDraws calibration_replicate(const FitResult& fit, const HyperCovariance& cov,
                                     const CalibConfig& config, const RngStream& rng,
                                     std::size_t index, const FitConfig& fit_config = {});

/// Runs the parametric-bootstrap calibration and returns the coverage curves
/// for clonality and entropy.
std::array<CoverageCurve, 2> calibrate(const FitResult& fit, const HyperCovariance& cov,
                                       const CalibConfig& config, const RngStream& rng,
                                       const FitConfig& fit_config = {});

struct PipelineResult {
    FitResult fit;
    HyperCovariance cov;
    std::array<CoverageCurve, 2> curves;  // empty when calibration was not requested
    std::vector<IntervalReport> reports;  // per requested method, clonality then entropy

    const IntervalReport* find(Method m, Functional f) const noexcept;
};

/// Fit, covariance, calibration and the final intervals of every requested
/// method on one library.
PipelineResult run_pipeline(const CloneCounts& counts, const FitConfig& fit_config,
                            const CalibConfig& calib_config, std::uint64_t seed);

}  // namespace repdiv
