#include "repdiv/uncertainty.hpp"

#include <cmath>

#include "repdiv/errors.hpp"

namespace repdiv {

SymMatrix2 observed_information(const CountHistogram& hist, const GammaPrior& prior)
{
    prior.validate();
    const SymMatrix2 h = truncated_loglik_derivatives(hist, prior).hessian;
    return {-h.xx, -h.xy, -h.yy};
}

SymMatrix2 observed_information(const CloneCounts& counts, const GammaPrior& prior)
{
    return observed_information(CountHistogram(counts), prior);
}

SymMatrix2 covariance_of_mle(const SymMatrix2& info)
{
    const double det = info.determinant();
    if (!std::isfinite(det) || !(det > 1e-300) || !(info.xx > 0.0) || !(info.yy > 0.0))
        throw NumericError("singular_information",
                           "observed information is not positive definite (det = " +
                               std::to_string(det) +
                               "); the data carry too little information about the prior, "
                               "more clones are needed");
    return {info.yy / det, -info.xy / det, info.xx / det};
}

HyperCovariance log_scale_covariance(const GammaPrior& prior, const SymMatrix2& j_hat)
{
    prior.validate();
    HyperCovariance out;
    out.j_hat = j_hat;
    out.log_scale = {j_hat.xx / (prior.shape * prior.shape),
                     j_hat.xy / (prior.shape * prior.rate),
                     j_hat.yy / (prior.rate * prior.rate)};
    return out;
}

HyperCovariance hyper_covariance(const CloneCounts& counts, const FitResult& fit)
{
    HyperCovariance cov =
        log_scale_covariance(fit.prior, covariance_of_mle(observed_information(counts, fit.prior)));
    cov.flagged = fit.clamped || fit.constrained;
    return cov;
}

}  // namespace repdiv
