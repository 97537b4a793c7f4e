#pragma once

#include "repdiv/em_fit.hpp"
#include "repdiv/numerics.hpp"
#include "repdiv/repertoire.hpp"

namespace repdiv {

/// Covariance of (a_hat, b_hat) and its image on the log scale.
struct HyperCovariance {
    SymMatrix2 j_hat;      // covariance of (a_hat, b_hat)
    SymMatrix2 log_scale;  // A J A with A = diag(1/a_hat, 1/b_hat)
    bool flagged = false;  // computed at a fit that hit a bound or constraint
};

/// Negative Hessian of the truncated log-likelihood at `prior`.
SymMatrix2 observed_information(const CountHistogram& hist, const GammaPrior& prior);
SymMatrix2 observed_information(const CloneCounts& counts, const GammaPrior& prior);

/// Closed-form inverse of a positive definite 2x2 information matrix. Throws
/// NumericError("singular_information") otherwise.
SymMatrix2 covariance_of_mle(const SymMatrix2& info);

HyperCovariance log_scale_covariance(const GammaPrior& prior, const SymMatrix2& j_hat);

/// observed_information -> covariance_of_mle -> log_scale_covariance at the
/// fitted prior, flagged when the fit was clamped.
HyperCovariance hyper_covariance(const CloneCounts& counts, const FitResult& fit);

}  // namespace repdiv
