#pragma once

#include <cstdint>

#include "repdiv/em_fit.hpp"
#include "repdiv/repertoire.hpp"
#include "repdiv/rng.hpp"
#include "repdiv/uncertainty.hpp"

namespace repdiv {

/// Observed counts followed by `zero_pad` unseen clones, so that the padded
/// set has c_hat members. Observed counts are kept in descending order, which
/// makes the draws independent of the input order.
class PaddedCounts {
public:
    PaddedCounts(const CloneCounts& observed, std::uint64_t zero_pad);
    PaddedCounts(const CloneCounts& observed, const FitResult& fit);

    const CloneCounts& observed() const noexcept { return observed_; }
    std::uint64_t zero_pad() const noexcept { return zero_pad_; }
    std::uint64_t size() const noexcept { return observed_.size() + zero_pad_; }

private:
    CloneCounts observed_;
    std::uint64_t zero_pad_;
};

enum class SamplerMode { naive, hyper_uncertain };

const char* to_string(SamplerMode m) noexcept;

struct SamplerConfig {
    int b_draws = 500;
    SamplerMode mode = SamplerMode::hyper_uncertain;
    // One (a*, b*) pair per posterior draw, shared by all clones. With a fresh
    // pair per clone the hyperparameter noise averages out over clones and the
    // draws behave almost like the plug-in (naive) ones.
    bool per_clone_hyper = false;
    unsigned threads = 1;

    void validate() const;
};

/// Everything the intensity sampler needs to know about the prior.
struct HyperSource {
    GammaPrior prior;
    HyperCovariance cov;
    SamplerMode mode = SamplerMode::hyper_uncertain;
    bool per_clone_hyper = false;
};

/// (exp u, exp v) with (u, v) ~ N((ln a, ln b), cov.log_scale).
GammaPrior sample_hyperparams(const GammaPrior& prior, const HyperCovariance& cov,
                              RngStream& rng);

/// One posterior intensity vector: lambda_i ~ Gamma(a* + z_i, b* + 1) over the
/// padded clones, observed clones first.
IntensityVector sample_intensities(const PaddedCounts& padded, const HyperSource& source,
                                   RngStream& rng);

/// B intensity vectors mapped through both functionals. Draw b uses
/// rng.derive(b), so the result does not depend on the thread count.
DiversityDraws diversity_draws(const PaddedCounts& padded, const GammaPrior& prior,
                               const HyperCovariance& cov, const SamplerConfig& config,
                               const RngStream& rng);

}  // namespace repdiv
