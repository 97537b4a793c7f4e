#include "repdiv/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "repdiv/errors.hpp"
#include "repdiv/numerics.hpp"
#include "repdiv/parallel.hpp"

namespace repdiv {

const char* to_string(Method m) noexcept
{
    switch (m) {
    case Method::calibrated: return "calibrated";
    case Method::uncalibrated: return "uncalibrated";
    case Method::naive: return "naive";
    }
    return "?";
}

Method method_from_string(const std::string& name)
{
    if (name == "calibrated") return Method::calibrated;
    if (name == "uncalibrated") return Method::uncalibrated;
    if (name == "naive") return Method::naive;
    throw DomainError("unknown method '" + name + "' (expected calibrated, uncalibrated or naive)");
}

bool MethodSet::contains(Method m) const noexcept
{
    switch (m) {
    case Method::calibrated: return calibrated;
    case Method::uncalibrated: return uncalibrated;
    case Method::naive: return naive;
    }
    return false;
}

std::vector<double> alpha_grid(double step, double max_alpha)
{
    if (!(step > 0.0) || !(max_alpha < 1.0) || step > max_alpha)
        throw DomainError("alpha grid needs 0 < step <= max_alpha < 1");
    std::vector<double> grid;
    // k / n is correctly rounded when the step is 1/n, so 0.018 prints as 0.018
    const double inv = std::round(1.0 / step);
    const bool reciprocal = std::abs(inv * step - 1.0) < 1e-12;
    for (int k = 1;; ++k) {
        const double a = reciprocal ? k / inv : step * k;
        if (a > max_alpha * (1.0 + 1e-12)) break;
        grid.push_back(a);
    }
    return grid;
}

void CalibConfig::validate() const
{
    if (r_replicates < 50) throw DomainError("r_replicates must be at least 50");
    if (b_draws < 1) throw DomainError("b_draws must be positive");
    if (!(target_coverage > 0.0 && target_coverage < 1.0))
        throw DomainError("target_coverage must lie in (0, 1)");
    if (alphas.empty()) throw DomainError("alpha grid is empty");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0 && alphas[i] < 1.0))
            throw DomainError("alpha grid values must lie in (0, 1)");
        if (i > 0 && !(alphas[i] > alphas[i - 1]))
            throw DomainError("alpha grid must be strictly increasing");
    }
}

Interval interval_from_draws(std::span<const double> sorted_draws, double alpha)
{
    if (sorted_draws.empty()) throw DomainError("interval_from_draws: no draws");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("interval_from_draws: alpha outside (0, 1)");
    return {empirical_quantile(sorted_draws, alpha / 2.0),
            empirical_quantile(sorted_draws, 1.0 - alpha / 2.0)};
}

Replicate simulate_replicate(const FitResult& fit, const RngStream& rng)
{
    fit.prior.validate();
    if (fit.c_hat < 2) throw DomainError("simulate_replicate: c_hat below two");
    constexpr int kAttempts = 10;
    IntensityVector lambdas(fit.c_hat);
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        RngStream stream = rng.derive(static_cast<std::uint64_t>(attempt));
        for (auto& l : lambdas) l = sample_gamma(fit.prior.shape, fit.prior.rate, stream);
        std::vector<std::uint64_t> z;
        for (double l : lambdas)
            if (const auto k = sample_poisson(l, stream); k > 0) z.push_back(k);
        if (z.size() < 2) continue;
        double total = 0.0;
        for (double l : lambdas) total += l;
        if (!(total > 0.0)) continue;
        const FunctionalPair g = evaluate_functionals(lambdas);
        return {g.clonality, g.entropy, CloneCounts(std::move(z))};
    }
    throw NumericError("degenerate_replicate",
                       "simulated replicates kept producing fewer than two observed clones");
}

bool RankPosition::covered(double alpha) const noexcept
{
    return alpha / 2.0 <= q_high && 1.0 - alpha / 2.0 >= q_low;
}

RankPosition replicate_rank(std::span<const double> sorted_draws, double truth)
{
    if (sorted_draws.empty()) throw DomainError("replicate_rank: no draws");
    const std::size_t n = sorted_draws.size();
    const auto lo_it = std::lower_bound(sorted_draws.begin(), sorted_draws.end(), truth);
    const auto hi_it = std::upper_bound(sorted_draws.begin(), sorted_draws.end(), truth);
    const auto below = static_cast<std::size_t>(lo_it - sorted_draws.begin());
    const auto at_most = static_cast<std::size_t>(hi_it - sorted_draws.begin());

    RankPosition r;
    r.u = (static_cast<double>(below) + 0.5 * static_cast<double>(at_most - below)) /
          static_cast<double>(n);
    const double span = static_cast<double>(n - 1);

    if (at_most == 0) {
        r.q_high = -1.0;
    } else if (at_most == n) {
        r.q_high = 1.0;
    } else {
        const std::size_t j = at_most - 1;
        const double frac = (truth - sorted_draws[j]) / (sorted_draws[j + 1] - sorted_draws[j]);
        r.q_high = (static_cast<double>(j) + frac) / span;
    }

    if (below == n) {
        r.q_low = 2.0;
    } else if (below == 0) {
        r.q_low = 0.0;
    } else {
        const std::size_t j = below - 1;
        const double frac = (truth - sorted_draws[j]) / (sorted_draws[j + 1] - sorted_draws[j]);
        r.q_low = (static_cast<double>(j) + frac) / span;
    }
    return r;
}

namespace {

struct ReplicateOutcome {
    bool ok = false;
    std::string error;
    RankPosition rank[2];
};

CoverageCurve tabulate(Functional f, const std::vector<ReplicateOutcome>& outcomes,
                       const CalibConfig& config)
{
    CoverageCurve curve;
    curve.functional = f;
    curve.alphas = config.alphas;
    curve.coverage.assign(config.alphas.size(), 0.0);
    const int idx = f == Functional::clonality ? 0 : 1;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++curve.replicates_failed;
            continue;
        }
        ++curve.replicates_used;
        for (std::size_t k = 0; k < config.alphas.size(); ++k)
            if (o.rank[idx].covered(config.alphas[k])) curve.coverage[k] += 1.0;
    }
    for (auto& c : curve.coverage) c /= curve.replicates_used;

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < curve.alphas.size(); ++k) {
        const double gap = std::abs(curve.coverage[k] - config.target_coverage);
        if (gap < best - 1e-12) {
            best = gap;
            curve.chosen_alpha0 = curve.alphas[k];
            curve.achieved_coverage = curve.coverage[k];
        }
    }
    return curve;
}

}  // namespace

ReplicateDraws calibration_replicate(const FitResult& fit, const HyperCovariance& cov,
                                     const CalibConfig& config, const RngStream& rng,
                                     std::size_t index, const FitConfig& fit_config)
{
    const RngStream stream = rng.derive(index);
    ReplicateDraws out{simulate_replicate(fit, stream.derive(0)), {}, {}};
    const CloneCounts& counts = out.replicate.counts;
    HyperCovariance cov_star;
    if (config.refit) {
        out.fit = repdiv::fit(counts, fit_config, fit.prior);
        cov_star = hyper_covariance(counts, out.fit);
    } else {
        out.fit = fit;
        out.fit.observed_c = counts.size();
        out.fit.c_hat = std::max(fit.c_hat, out.fit.observed_c);
        cov_star = cov;
    }
    SamplerConfig sampler;
    sampler.b_draws = config.b_draws;
    sampler.mode = config.mode;
    sampler.per_clone_hyper = config.per_clone_hyper;
    out.draws = diversity_draws(PaddedCounts(counts, out.fit), out.fit.prior, cov_star, sampler,
                                stream.derive(1));
    std::sort(out.draws.clonality.begin(), out.draws.clonality.end());
    std::sort(out.draws.entropy.begin(), out.draws.entropy.end());
    return out;
}

std::array<CoverageCurve, 2> calibrate(const FitResult& fit, const HyperCovariance& cov,
                                       const CalibConfig& config, const RngStream& rng,
                                       const FitConfig& fit_config)
{
    config.validate();
    const auto r = static_cast<std::size_t>(config.r_replicates);
    std::vector<ReplicateOutcome> outcomes(r);

    parallel_for(r, config.threads, [&](std::size_t i) {
        ReplicateOutcome& out = outcomes[i];
        try {
            const ReplicateDraws rd = calibration_replicate(fit, cov, config, rng, i, fit_config);
            out.rank[0] = replicate_rank(rd.draws.clonality, rd.replicate.truth_clonality);
            out.rank[1] = replicate_rank(rd.draws.entropy, rd.replicate.truth_entropy);
            out.ok = true;
        } catch (const Error& e) {
            out.error = e.what();
        }
    });

    int failed = 0;
    const std::string* first_error = nullptr;
    for (const auto& o : outcomes)
        if (!o.ok) {
            ++failed;
            if (!first_error) first_error = &o.error;
        }
    if (failed > 0 && static_cast<double>(failed) > 0.2 * static_cast<double>(r))
        throw NumericError("calibration_unstable",
                           std::to_string(failed) + " of " + std::to_string(r) +
                               " calibration replicates failed; first failure: " + *first_error);

    return {tabulate(Functional::clonality, outcomes, config),
            tabulate(Functional::entropy, outcomes, config)};
}

const IntervalReport* PipelineResult::find(Method m, Functional f) const noexcept
{
    for (const auto& r : reports)
        if (r.method == m && r.functional == f) return &r;
    return nullptr;
}

namespace {

IntervalReport make_report(Functional f, Method m, const std::vector<double>& sorted, double alpha)
{
    IntervalReport rep;
    rep.functional = f;
    rep.method = m;
    rep.alpha0 = alpha;
    rep.point_estimate = empirical_quantile(sorted, 0.5);
    const Interval iv = interval_from_draws(sorted, alpha);
    rep.lower = iv.lower;
    rep.upper = iv.upper;
    rep.draws = static_cast<int>(sorted.size());
    rep.draws_min = sorted.front();
    rep.draws_max = sorted.back();
    return rep;
}

void sort_draws(DiversityDraws& d)
{
    std::sort(d.clonality.begin(), d.clonality.end());
    std::sort(d.entropy.begin(), d.entropy.end());
}

}  // namespace

PipelineResult run_pipeline(const CloneCounts& counts, const FitConfig& fit_config,
                            const CalibConfig& calib_config, std::uint64_t seed)
{
    calib_config.validate();
    PipelineResult res;
    res.fit = fit(counts, fit_config);
    res.cov = hyper_covariance(counts, res.fit);
    const PaddedCounts padded(counts, res.fit);
    const RngStream root(seed, 0);
    const MethodSet& methods = calib_config.methods;

    if (methods.calibrated)
        res.curves = calibrate(res.fit, res.cov, calib_config, root.derive(0), fit_config);

    SamplerConfig sampler;
    sampler.b_draws = calib_config.b_draws;
    sampler.per_clone_hyper = calib_config.per_clone_hyper;
    sampler.threads = calib_config.threads;

    const double nominal = 1.0 - calib_config.target_coverage;
    std::optional<DiversityDraws> hyper;
    if (methods.calibrated || methods.uncalibrated) {
        sampler.mode = SamplerMode::hyper_uncertain;
        hyper = diversity_draws(padded, res.fit.prior, res.cov, sampler, root.derive(1));
        sort_draws(*hyper);
    }
    std::optional<DiversityDraws> naive;
    if (methods.naive) {
        sampler.mode = SamplerMode::naive;
        naive = diversity_draws(padded, res.fit.prior, res.cov, sampler, root.derive(2));
        sort_draws(*naive);
    }

    for (Functional f : {Functional::clonality, Functional::entropy}) {
        const int idx = f == Functional::clonality ? 0 : 1;
        if (methods.calibrated)
            res.reports.push_back(
                make_report(f, Method::calibrated, hyper->of(f), res.curves[idx].chosen_alpha0));
        if (methods.uncalibrated)
            res.reports.push_back(make_report(f, Method::uncalibrated, hyper->of(f), nominal));
        if (methods.naive) res.reports.push_back(make_report(f, Method::naive, naive->of(f), nominal));
    }
    return res;
}

}  // namespace repdiv
