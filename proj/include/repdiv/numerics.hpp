#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include "repdiv/rng.hpp"

namespace repdiv {

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// ln Γ(x) for x > 0. Recurrence lift to x >= 8 followed by the Stirling series.
double log_gamma(double x);

/// Ψ(x) = d/dx ln Γ(x) for x > 0.
double digamma(double x);

/// Ψ'(x) for x > 0.
double trigamma(double x);

// ---------------------------------------------------------------------------
// Small symmetric matrices
// ---------------------------------------------------------------------------

/// Real symmetric 2x2 matrix. Only one off-diagonal entry is stored, so
/// symmetry holds by construction.
struct SymMatrix2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    static constexpr SymMatrix2 identity() { return {1.0, 0.0, 1.0}; }
    static constexpr SymMatrix2 zero() { return {0.0, 0.0, 0.0}; }

    double operator()(int i, int j) const noexcept
    {
        if (i == 0 && j == 0) return xx;
        if (i == 1 && j == 1) return yy;
        return xy;
    }

    double trace() const noexcept { return xx + yy; }
    double determinant() const noexcept { return xx * yy - xy * xy; }

    /// Eigenvalues in ascending order.
    std::array<double, 2> eigenvalues() const noexcept;

    /// Both eigenvalues >= -1e-12 * |trace|.
    bool is_positive_semidefinite() const noexcept;

    friend bool operator==(const SymMatrix2&, const SymMatrix2&) = default;
};

// ---------------------------------------------------------------------------
// Random variates
// ---------------------------------------------------------------------------

/// Gamma(shape, rate) draw, mean shape/rate. Marsaglia-Tsang squeeze; shapes
/// below one are boosted to shape + 1 and corrected by U^(1/shape) in log space.
double sample_gamma(double shape, double rate, RngStream& rng);

/// Poisson draw. Inversion for small means, Hormann's PTRS above 10.
std::uint64_t sample_poisson(double mean, RngStream& rng);

/// Bivariate normal draw using the symmetric square root of `cov`.
/// Rank-deficient covariances are allowed; indefinite ones are rejected.
std::array<double, 2> sample_bivariate_normal(const std::array<double, 2>& mean,
                                              const SymMatrix2& cov, RngStream& rng);

/// Symmetric square root S with S*S = cov (cov must be positive semidefinite).
SymMatrix2 symmetric_sqrt(const SymMatrix2& cov);

// ---------------------------------------------------------------------------
// Sample summaries
// ---------------------------------------------------------------------------

/// Type-7 (linear interpolation) quantile of an ascending-sorted sample.
double empirical_quantile(std::span<const double> sorted, double q);

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace repdiv
