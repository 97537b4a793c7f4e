#include "repdiv/posterior.hpp"

#include <cmath>

#include "repdiv/errors.hpp"
#include "repdiv/numerics.hpp"
#include "repdiv/parallel.hpp"

namespace repdiv {

PaddedCounts::PaddedCounts(const CloneCounts& observed, std::uint64_t zero_pad)
    : observed_(observed.sorted_descending()), zero_pad_(zero_pad)
{
}

PaddedCounts::PaddedCounts(const CloneCounts& observed, const FitResult& fit)
    : PaddedCounts(observed, fit.c_hat - fit.observed_c)
{
    if (fit.observed_c != observed.size())
        throw DomainError("fit result was computed for a different number of clones");
}

const char* to_string(SamplerMode m) noexcept
{
    return m == SamplerMode::naive ? "naive" : "hyper_uncertain";
}

void SamplerConfig::validate() const
{
    if (b_draws < 1) throw DomainError("b_draws must be positive");
}

GammaPrior sample_hyperparams(const GammaPrior& prior, const HyperCovariance& cov,
                              RngStream& rng)
{
    const auto d = sample_bivariate_normal({std::log(prior.shape), std::log(prior.rate)},
                                           cov.log_scale, rng);
    return {std::exp(d[0]), std::exp(d[1])};
}

namespace {

// Same as sample_hyperparams with the matrix root precomputed.
GammaPrior draw_hyper(const double mean[2], const SymMatrix2& root, RngStream& rng)
{
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    return {std::exp(mean[0] + root.xx * z0 + root.xy * z1),
            std::exp(mean[1] + root.xy * z0 + root.yy * z1)};
}

void fill_intensities(const PaddedCounts& padded, const HyperSource& source, RngStream& rng,
                      IntensityVector& out)
{
    out.resize(padded.size());
    const auto& z = padded.observed().counts();
    const std::size_t n_obs = z.size();

    if (source.mode == SamplerMode::naive || !source.per_clone_hyper) {
        GammaPrior p = source.prior;
        if (source.mode == SamplerMode::hyper_uncertain)
            p = sample_hyperparams(source.prior, source.cov, rng);
        const double rate = p.rate + 1.0;
        for (std::size_t i = 0; i < n_obs; ++i)
            out[i] = sample_gamma(p.shape + static_cast<double>(z[i]), rate, rng);
        for (std::size_t i = n_obs; i < out.size(); ++i) out[i] = sample_gamma(p.shape, rate, rng);
        return;
    }

    const double mean[2] = {std::log(source.prior.shape), std::log(source.prior.rate)};
    const SymMatrix2 root = symmetric_sqrt(source.cov.log_scale);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const GammaPrior p = draw_hyper(mean, root, rng);
        const double shape = i < n_obs ? p.shape + static_cast<double>(z[i]) : p.shape;
        out[i] = sample_gamma(shape, p.rate + 1.0, rng);
    }
}

}  // namespace

IntensityVector sample_intensities(const PaddedCounts& padded, const HyperSource& source,
                                   RngStream& rng)
{
    source.prior.validate();
    IntensityVector out;
    fill_intensities(padded, source, rng, out);
    return out;
}

DiversityDraws diversity_draws(const PaddedCounts& padded, const GammaPrior& prior,
                               const HyperCovariance& cov, const SamplerConfig& config,
                               const RngStream& rng)
{
    config.validate();
    prior.validate();
    const HyperSource source{prior, cov, config.mode, config.per_clone_hyper};
    const auto n = static_cast<std::size_t>(config.b_draws);
    DiversityDraws out;
    out.clonality.resize(n);
    out.entropy.resize(n);
    const unsigned workers = resolve_threads(config.threads);
    if (workers <= 1) {
        IntensityVector buffer;
        for (std::size_t b = 0; b < n; ++b) {
            RngStream stream = rng.derive(b);
            fill_intensities(padded, source, stream, buffer);
            const FunctionalPair g = evaluate_functionals(buffer);
            out.clonality[b] = g.clonality;
            out.entropy[b] = g.entropy;
        }
        return out;
    }
    parallel_for(n, workers, [&](std::size_t b) {
        RngStream stream = rng.derive(b);
        IntensityVector buffer;
        fill_intensities(padded, source, stream, buffer);
        const FunctionalPair g = evaluate_functionals(buffer);
        out.clonality[b] = g.clonality;
        out.entropy[b] = g.entropy;
    });
    return out;
}

}  // namespace repdiv
