#include "repdiv/sim_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "repdiv/errors.hpp"
#include "repdiv/numerics.hpp"
#include "repdiv/parallel.hpp"

namespace repdiv {

void IntensityModel::validate() const
{
    if (kind == Kind::gamma) {
        GammaPrior{p1, p2}.validate();
    } else if (!std::isfinite(p1) || !(p2 > 0.0) || !std::isfinite(p2)) {
        throw DomainError("lognormal model needs finite mu and positive sigma^2");
    }
}

std::string IntensityModel::describe() const
{
    std::ostringstream os;
    os << (kind == Kind::gamma ? "gamma(" : "lognormal(") << p1 << ", " << p2 << ")";
    return os.str();
}

double IntensityModel::sample(RngStream& rng) const
{
    if (kind == Kind::gamma) return sample_gamma(p1, p2, rng);
    return std::exp(p1 + std::sqrt(p2) * rng.normal());
}

void Scenario::validate() const
{
    model.validate();
    if (c0 < 10) throw DomainError("scenario c0 must be at least 10");
    if (n_sims < 10) throw DomainError("scenario n_sims must be at least 10");
    calib.validate();
    fit.validate();
}

Scenario desk_scenario(const IntensityModel& model, std::uint64_t seed)
{
    Scenario s;
    s.model = model;
    s.name = model.describe();
    s.c0 = 2000;
    s.n_sims = 100;
    s.calib.r_replicates = 100;
    s.calib.b_draws = 200;
    s.fit.max_c_hat_ratio = 20.0;
    s.seed = seed;
    return s;
}

const std::vector<ScenarioPreset>& scenario_presets()
{
    using K = IntensityModel::Kind;
    static const std::vector<ScenarioPreset> presets = {
        {"gamma_0.732_0.882", {K::gamma, 0.732, 0.882}},
        {"gamma_0.414_0.335", {K::gamma, 0.414, 0.335}},
        {"gamma_0.596_0.960", {K::gamma, 0.596, 0.960}},
        {"gamma_0.551_0.775", {K::gamma, 0.551, 0.775}},
        {"gamma_0.171_0.301", {K::gamma, 0.171, 0.301}},
        {"gamma_0.126_0.132", {K::gamma, 0.126, 0.132}},
        {"gamma_0.086_0.111", {K::gamma, 0.086, 0.111}},
        {"gamma_0.113_0.142", {K::gamma, 0.113, 0.142}},
        {"lognormal_-1.38_1.64sq", {K::lognormal, -1.38, 1.64 * 1.64}},
        {"lognormal_-1.27_1.72sq", {K::lognormal, -1.27, 1.72 * 1.72}},
        {"lognormal_-1.22_1.50sq", {K::lognormal, -1.22, 1.50 * 1.50}},
        {"lognormal_-1.02_1.62sq", {K::lognormal, -1.02, 1.62 * 1.62}},
    };
    return presets;
}

const ScenarioPreset& find_preset(const std::string& name)
{
    for (const auto& p : scenario_presets())
        if (p.name == name) return p;
    std::string known;
    for (const auto& p : scenario_presets()) known += (known.empty() ? "" : ", ") + p.name;
    throw DomainError("unknown scenario '" + name + "'; known presets: " + known);
}

Dataset generate_dataset(const Scenario& scenario, int sim_index)
{
    scenario.model.validate();
    const RngStream sim_stream = RngStream(scenario.seed, 1).derive(static_cast<std::uint64_t>(sim_index));
    IntensityVector lambdas(static_cast<std::size_t>(scenario.c0));
    for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
        RngStream rng = sim_stream.derive(attempt);
        for (auto& l : lambdas) l = scenario.model.sample(rng);
        std::vector<std::uint64_t> z;
        for (double l : lambdas)
            if (const auto k = sample_poisson(l, rng); k > 0) z.push_back(k);
        if (z.size() < 10) continue;
        const FunctionalPair g = evaluate_functionals(lambdas);
        return {g.clonality, g.entropy, CloneCounts(std::move(z))};
    }
    throw DataError("degenerate_dataset", "simulation " + std::to_string(sim_index) +
                                              " produced fewer than ten observed clones twice");
}

const CoverageCell* CoverageReport::cell(Method m, Functional f) const noexcept
{
    for (const auto& c : cells)
        if (c.method == m && c.functional == f) return &c;
    return nullptr;
}

namespace {

struct SimOutcome {
    bool ok = false;
    std::string code;
    std::string message;
    std::vector<SimRecord> records;
};

}  // namespace

CoverageReport run_scenario(const Scenario& scenario)
{
    scenario.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto n = static_cast<std::size_t>(scenario.n_sims);
    std::vector<SimOutcome> outcomes(n);

    CalibConfig calib = scenario.calib;
    const unsigned workers = resolve_threads(calib.threads);
    calib.threads = 1;

    parallel_for(n, workers, [&](std::size_t i) {
        SimOutcome& out = outcomes[i];
        const int sim = static_cast<int>(i);
        try {
            const Dataset data = generate_dataset(scenario, sim);
            const std::uint64_t seed = mix64(scenario.seed ^ mix64(0x9e37u + i));
            const PipelineResult res = run_pipeline(data.counts, scenario.fit, calib, seed);
            for (const auto& rep : res.reports) {
                SimRecord rec;
                rec.sim_index = sim;
                rec.method = rep.method;
                rec.functional = rep.functional;
                rec.truth = rep.functional == Functional::clonality ? data.truth_clonality
                                                                    : data.truth_entropy;
                rec.interval = rep;
                rec.covered = rep.lower <= rec.truth && rec.truth <= rep.upper;
                out.records.push_back(rec);
            }
            out.ok = true;
        } catch (const Error& e) {
            out.code = e.code();
            out.message = e.what();
        }
    });

    CoverageReport report;
    for (std::size_t i = 0; i < n; ++i) {
        if (!outcomes[i].ok) {
            report.failures.push_back({static_cast<int>(i), outcomes[i].code, outcomes[i].message});
            continue;
        }
        for (auto& r : outcomes[i].records) report.records.push_back(std::move(r));
    }
    if (static_cast<double>(report.failures.size()) > 0.05 * static_cast<double>(n))
        throw NumericError("scenario_failed",
                           std::to_string(report.failures.size()) + " of " + std::to_string(n) +
                               " simulations failed; first: " + report.failures.front().message);

    for (Method m : {Method::calibrated, Method::uncalibrated, Method::naive}) {
        if (!scenario.calib.methods.contains(m)) continue;
        for (Functional f : {Functional::clonality, Functional::entropy}) {
            CoverageCell c{m, f};
            for (const auto& r : report.records)
                if (r.method == m && r.functional == f) {
                    ++c.n;
                    c.covered += r.covered;
                }
            if (c.n > 0) {
                c.coverage = static_cast<double>(c.covered) / c.n;
                c.std_error = std::sqrt(c.coverage * (1.0 - c.coverage) / c.n);
            }
            report.cells.push_back(c);
        }
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "scenario %s: %zu simulations in %.1f s\n", scenario.name.c_str(), n,
                 report.wall_seconds);
    return report;
}

std::vector<GalleryEntry> interval_gallery(const CoverageReport& report, Functional f)
{
    std::vector<GalleryEntry> out;
    for (const auto& r : report.records)
        if (r.method == Method::calibrated && r.functional == f)
            out.push_back({r.truth, r.interval.lower, r.interval.upper});
    std::sort(out.begin(), out.end(),
              [](const GalleryEntry& x, const GalleryEntry& y) { return x.truth < y.truth; });
    return out;
}

std::vector<GalleryEntry> interval_gallery(const Scenario& scenario)
{
    return interval_gallery(run_scenario(scenario));
}

}  // namespace repdiv
