#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "repdiv/numerics.hpp"
#include "repdiv/repertoire.hpp"

namespace repdiv {

/// Observed counts grouped into (value, multiplicity) pairs, ascending by value.
/// Likelihood and E-step sums run over groups instead of clones; with most
/// clones carrying one to three reads this is a large constant-factor saving.
class CountHistogram {
public:
    struct Group {
        std::uint64_t value;
        double multiplicity;
    };

    explicit CountHistogram(const CloneCounts& counts);

    /// Any non-empty list of positive counts (no minimum clone number).
    static CountHistogram from_counts(std::span<const std::uint64_t> counts);

    const std::vector<Group>& groups() const noexcept { return groups_; }
    double observed_clones() const noexcept { return clones_; }
    double mean() const noexcept;
    double variance() const noexcept;

private:
    CountHistogram() = default;
    std::vector<Group> groups_;
    double clones_ = 0.0;
};

struct FitConfig {
    double outer_tol = 1e-8;   // relative change of the truncated log-likelihood
    double inner_tol = 1e-10;  // relative change of the inner objective
    int max_outer_iters = 500;
    int max_inner_iters = 200;
    double lower_bound = 1e-6;  // applies to both shape and rate
    double upper_bound = 1e6;
    // SQUAREM extrapolation of the outer EM map. Every accepted step still
    // raises the truncated log-likelihood; without it the EM crawls when most
    // clones are unseen.
    bool accelerate = true;
    // Finish with safeguarded Newton ascent on the truncated log-likelihood.
    // The likelihood is very flat along the shape axis when the shape is
    // small, and EM steps alone stall on that ridge.
    bool polish = true;
    int max_polish_iters = 100;
    // Upper limit on c_hat / observed_c; infinite means no limit. When the
    // unconstrained maximum implies more unseen clones than allowed, the fit is
    // the likelihood maximum on the boundary n0 = (ratio - 1) C instead.
    double max_c_hat_ratio = std::numeric_limits<double>::infinity();

    void validate() const;
};

struct FitResult {
    GammaPrior prior;
    double n0_hat = 0.0;          // expected number of unseen clones
    std::uint64_t c_hat = 0;      // observed_c + round(n0_hat)
    std::uint64_t observed_c = 0;
    // Truncated log-likelihood at the starting point followed by one entry
    // per accepted update. When the c_hat limit binds, the trace is that of the
    // boundary search (best value so far at each probe).
    std::vector<double> loglik_trace;
    bool converged = false;
    int outer_iterations = 0;  // evaluations of the outer EM map
    long inner_iterations = 0;
    bool clamped = false;     // a parameter hit the fitting bounds
    bool n0_capped = false;   // unseen-clone estimate overflowed and was capped
    bool constrained = false; // max_c_hat_ratio was binding

    double loglik() const { return loglik_trace.empty() ? 0.0 : loglik_trace.back(); }
};

/// Expected complete-data statistics of the inner EM.
struct SufficientStats {
    double s_lambda = 0.0;     // sum E[lambda_i] over observed and unseen clones
    double s_loglambda = 0.0;  // sum E[ln lambda_i]
    double weight = 0.0;       // C + n0
};

struct N0Estimate {
    double value = 0.0;
    bool capped = false;
};

inline constexpr double kN0Cap = 1e9;

/// ln P(Z = z) for the Gamma-Poisson (negative binomial) marginal.
double nb_log_pmf(std::uint64_t z, const GammaPrior& prior);

/// ln P(Z = 0) = shape * ln(rate / (rate + 1)).
double log_p_zero(const GammaPrior& prior);

/// Zero-truncated log-likelihood of the observed counts. Throws NumericError
/// when P(Z = 0) is within 1e-15 of one.
double truncated_loglik(const CountHistogram& hist, const GammaPrior& prior);

/// Value, gradient and Hessian of the truncated log-likelihood with respect to
/// (shape, rate), in closed form via digamma and trigamma.
struct LoglikDerivatives {
    double value = 0.0;
    std::array<double, 2> gradient{};
    SymMatrix2 hessian;
};
LoglikDerivatives truncated_loglik_derivatives(const CountHistogram& hist,
                                               const GammaPrior& prior);

/// C p0 / (1 - p0), evaluated as C / expm1(-ln p0); capped at kN0Cap.
N0Estimate estimate_n0(const GammaPrior& prior, double observed_c);

SufficientStats inner_e_step(const CountHistogram& hist, double n0, const GammaPrior& prior);

struct MStepResult {
    GammaPrior prior;
    bool clamped = false;
};

/// Maximizer of (a-1) S_log - W (lgamma(a) - a ln b) - b S_lambda. The rate is
/// profiled out (b = W a / S_lambda) and the shape solves
/// psi(a) - ln a = S_log / W - ln(S_lambda / W) by safeguarded Newton in ln a.
MStepResult inner_m_step(const SufficientStats& stats, const FitConfig& config = {});

/// Objective maximized by the inner EM: sum ln p(z_i) + n0 ln p(0).
double inner_objective(const CountHistogram& hist, double n0, const GammaPrior& prior);

struct InnerResult {
    GammaPrior prior;
    int iterations = 0;
    bool clamped = false;
};

/// Runs inner EM steps from `start` with the unseen-clone count fixed at `n0`.
InnerResult inner_em(const CountHistogram& hist, double n0, const GammaPrior& start,
                     const FitConfig& config);

/// Method-of-moments start from the untruncated negative binomial, clamped
/// into the fitting bounds; (1, 1) when the counts are not over-dispersed.
GammaPrior moment_start(const CountHistogram& hist, const FitConfig& config);

/// One outer EM iteration: estimate the unseen-clone count at `prior`, then run
/// the inner EM with that count held fixed.
InnerResult outer_em_step(const CountHistogram& hist, const GammaPrior& prior,
                          const FitConfig& config);

/// Maximum-likelihood fit of the Gamma prior and the unseen-clone count by the
/// nested EM: the outer E-step updates the expected number of zero-count
/// clones, the inner EM maximizes the completed likelihood with that count
/// held fixed.
FitResult fit(const CloneCounts& counts, const FitConfig& config = {},
              std::optional<GammaPrior> warm_start = std::nullopt);

}  // namespace repdiv
