#include "repdiv/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "repdiv/errors.hpp"

namespace repdiv {

namespace {

void require_positive(double x, const char* what)
{
    if (!(x > 0.0) || !std::isfinite(x))
        throw DomainError(std::string(what) + ": argument must be positive and finite, got " +
                          std::to_string(x));
}

}  // namespace

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

double log_gamma(double x)
{
    require_positive(x, "log_gamma");
    // ln Γ(x) = ln Γ(x + n) - ln(x (x+1) ... (x+n-1))
    double shift = 0.0;
    if (x < 8.0) {
        double prod = 1.0;
        while (x < 8.0) {
            prod *= x;
            x += 1.0;
        }
        shift = std::log(prod);
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli terms B_2k / (2k (2k-1) x^(2k-1)), k = 1..8
    const double series =
        inv * (1.0 / 12.0 +
               inv2 * (-1.0 / 360.0 +
                       inv2 * (1.0 / 1260.0 +
                               inv2 * (-1.0 / 1680.0 +
                                       inv2 * (1.0 / 1188.0 +
                                               inv2 * (-691.0 / 360360.0 +
                                                       inv2 * (1.0 / 156.0 +
                                                               inv2 * (-3617.0 / 122400.0))))))));
    constexpr double half_log_two_pi = 0.91893853320467274178032973640562;
    return (x - 0.5) * std::log(x) - x + half_log_two_pi + series - shift;
}

double digamma(double x)
{
    require_positive(x, "digamma");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv2 = 1.0 / (x * x);
    const double series =
        inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                        inv2 * (1.0 / 252.0 -
                                inv2 * (1.0 / 240.0 -
                                        inv2 * (1.0 / 132.0 -
                                                inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x)
{
    require_positive(x, "trigamma");
    double acc = 0.0;
    while (x < 10.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 -
                                         inv2 * (1.0 / 30.0 -
                                                 inv2 * (1.0 / 42.0 -
                                                         inv2 * (1.0 / 30.0 -
                                                                 inv2 * (5.0 / 66.0 -
                                                                         inv2 * (691.0 / 2730.0 -
                                                                                 inv2 * (7.0 / 6.0)))))))));
    return acc + series;
}

// ---------------------------------------------------------------------------
// SymMatrix2
// ---------------------------------------------------------------------------

std::array<double, 2> SymMatrix2::eigenvalues() const noexcept
{
    const double mid = 0.5 * (xx + yy);
    const double half_gap = std::hypot(0.5 * (xx - yy), xy);
    return {mid - half_gap, mid + half_gap};
}

bool SymMatrix2::is_positive_semidefinite() const noexcept
{
    const auto ev = eigenvalues();
    return ev[0] >= -1e-12 * std::abs(trace());
}

SymMatrix2 symmetric_sqrt(const SymMatrix2& cov)
{
    if (!std::isfinite(cov.xx) || !std::isfinite(cov.xy) || !std::isfinite(cov.yy))
        throw DomainError("symmetric_sqrt: non-finite covariance entry");
    if (!cov.is_positive_semidefinite())
        throw DomainError("symmetric_sqrt: covariance matrix is indefinite");
    // sqrt(M) = (M + sqrt(det) I) / sqrt(trace + 2 sqrt(det)) for 2x2 PSD M.
    const double s = std::sqrt(std::max(cov.determinant(), 0.0));
    const double t2 = cov.trace() + 2.0 * s;
    if (!(t2 > 0.0)) return SymMatrix2::zero();
    const double t = std::sqrt(t2);
    return {(std::max(cov.xx, 0.0) + s) / t, cov.xy / t, (std::max(cov.yy, 0.0) + s) / t};
}

// ---------------------------------------------------------------------------
// Random variates
// ---------------------------------------------------------------------------

namespace {

// Marsaglia-Tsang for shape >= 1, unit rate.
double gamma_mt(double shape, RngStream& rng)
{
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_open();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::uint64_t poisson_ptrs(double mean, RngStream& rng)
{
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - log_gamma(k + 1.0))
            return static_cast<std::uint64_t>(k);
    }
}

}  // namespace

double sample_gamma(double shape, double rate, RngStream& rng)
{
    if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
        throw DomainError("sample_gamma: shape and rate must be positive and finite");
    if (shape >= 1.0) return gamma_mt(shape, rng) / rate;
    // Gamma(shape) = Gamma(shape + 1) * U^(1/shape); the power is taken in log
    // space so tiny shapes degrade to tiny values instead of exact zeros early.
    const double g = gamma_mt(shape + 1.0, rng);
    const double log_u = std::log(rng.uniform_open());
    return std::exp(std::log(g) + log_u / shape) / rate;
}

std::uint64_t sample_poisson(double mean, RngStream& rng)
{
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw DomainError("sample_poisson: mean must be non-negative and finite");
    if (mean == 0.0) return 0;
    if (mean >= 10.0) return poisson_ptrs(mean, rng);
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = rng.uniform_open();
    while (prod > limit) {
        ++k;
        prod *= rng.uniform_open();
    }
    return k;
}

std::array<double, 2> sample_bivariate_normal(const std::array<double, 2>& mean,
                                              const SymMatrix2& cov, RngStream& rng)
{
    const SymMatrix2 root = symmetric_sqrt(cov);
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    return {mean[0] + root.xx * z0 + root.xy * z1, mean[1] + root.xy * z0 + root.yy * z1};
}

// ---------------------------------------------------------------------------
// Quantiles
// ---------------------------------------------------------------------------

double empirical_quantile(std::span<const double> sorted, double q)
{
    if (sorted.empty()) throw DomainError("empirical_quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("empirical_quantile: q must lie in [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const double lo = std::floor(h);
    const auto j = static_cast<std::size_t>(lo);
    if (j + 1 >= sorted.size()) return sorted.back();
    return sorted[j] + (h - lo) * (sorted[j + 1] - sorted[j]);
}

}  // namespace repdiv
