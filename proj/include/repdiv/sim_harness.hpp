#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "repdiv/calibration.hpp"
#include "repdiv/em_fit.hpp"
#include "repdiv/repertoire.hpp"

namespace repdiv {

/// Law of the true clone intensities in a simulation.
struct IntensityModel {
    enum class Kind { gamma, lognormal };
    Kind kind = Kind::gamma;
    // gamma: shape, rate. lognormal: mu, sigma^2 of ln lambda.
    double p1 = 1.0;
    double p2 = 1.0;

    void validate() const;
    std::string describe() const;
    double sample(RngStream& rng) const;

    friend bool operator==(const IntensityModel&, const IntensityModel&) = default;
};

struct Scenario {
    std::string name;
    IntensityModel model;
    int c0 = 2000;
    int n_sims = 100;
    CalibConfig calib;
    FitConfig fit;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Desk-scale defaults: C0 = 2000, 100 simulations, R = 100, B = 200, and the
/// pipeline c_hat cap of 20 times the observed clone number.
Scenario desk_scenario(const IntensityModel& model, std::uint64_t seed = 1);

struct ScenarioPreset {
    std::string name;
    IntensityModel model;
};

/// The eight gamma and four log-normal presets, named like
/// "gamma_0.086_0.111" and "lognormal_-1.38_1.64sq".
const std::vector<ScenarioPreset>& scenario_presets();
const ScenarioPreset& find_preset(const std::string& name);

struct Dataset {
    double truth_clonality = 0.0;
    double truth_entropy = 0.0;
    CloneCounts counts;
};

/// Simulation `sim_index` of the scenario. Regenerated once (from a different
/// stream) when fewer than ten clones are observed.
Dataset generate_dataset(const Scenario& scenario, int sim_index);

struct SimRecord {
    int sim_index = 0;
    Method method = Method::calibrated;
    Functional functional = Functional::clonality;
    double truth = 0.0;
    IntervalReport interval;
    bool covered = false;

    friend bool operator==(const SimRecord&, const SimRecord&) = default;
};

struct CoverageCell {
    Method method;
    Functional functional;
    int n = 0;
    int covered = 0;
    double coverage = 0.0;
    double std_error = 0.0;
};

struct SimFailure {
    int sim_index;
    std::string code;
    std::string message;
};

struct CoverageReport {
    std::vector<CoverageCell> cells;
    std::vector<SimRecord> records;  // ordered by simulation, then method, then functional
    std::vector<SimFailure> failures;
    double wall_seconds = 0.0;

    const CoverageCell* cell(Method m, Functional f) const noexcept;
};

/// Generates every dataset, runs the pipeline on it and tabulates coverage of
/// the true functionals. Throws NumericError("scenario_failed") when more than
/// 5% of simulations fail.
CoverageReport run_scenario(const Scenario& scenario);

struct GalleryEntry {
    double truth;
    double lower;
    double upper;
};

/// Calibrated clonality intervals of a finished scenario, sorted by truth.
std::vector<GalleryEntry> interval_gallery(const CoverageReport& report,
                                           Functional f = Functional::clonality);
std::vector<GalleryEntry> interval_gallery(const Scenario& scenario);

}  // namespace repdiv
