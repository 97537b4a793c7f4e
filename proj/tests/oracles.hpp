#pragma once
// Independent reference computations shared by the tests. Nothing here calls
// into the library's own likelihood code.

#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "repdiv/numerics.hpp"
#include "repdiv/repertoire.hpp"
#include "repdiv/rng.hpp"

namespace oracle {

/// P(Z = z) for Z | lambda ~ Poisson(lambda), lambda ~ Gamma(a, b), by
/// numerical integration over lambda. The integrand is split at its mode so
/// both pieces are smooth apart from the lambda^(a-1) endpoint singularity.
inline double mixture_pmf(std::uint64_t z, double a, double b)
{
    const double zz = static_cast<double>(z);
    const double log_const = a * std::log(b) - std::lgamma(a) - std::lgamma(zz + 1.0);
    auto f = [&](double lam) {
        if (lam <= 0.0) return 0.0;
        return std::exp(log_const + (zz + a - 1.0) * std::log(lam) - (b + 1.0) * lam);
    };
    const double split = std::max((zz + a) / (b + 1.0), 1e-3);
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    const double left = ts.integrate(f, 0.0, split, 1e-14);
    const double right = es.integrate([&](double t) { return f(split + t); }, 1e-14);
    return left + right;
}

/// Truncated log-likelihood in long double straight from the definition.
inline long double truncated_loglik(const std::vector<std::uint64_t>& z, double a, double b)
{
    const long double la = a, lb = b;
    const long double log_p0 = la * std::log(lb / (lb + 1.0L));
    const long double log_norm = std::log(-std::expm1(log_p0));
    long double total = 0.0L;
    for (auto v : z) {
        const long double zz = static_cast<long double>(v);
        total += std::lgamma(zz + la) - std::lgamma(la) - std::lgamma(zz + 1.0L) + log_p0 -
                 zz * std::log(lb + 1.0L) - log_norm;
    }
    return total;
}

/// Full (untruncated) negative binomial MLE: the rate profiles out as
/// b = a / mean(z), leaving a 1-D golden-section search over ln a.
struct Mle {
    double a;
    double b;
};
inline Mle full_nb_mle(const std::vector<std::uint64_t>& z)
{
    double s = 0.0;
    for (auto v : z) s += static_cast<double>(v);
    const double mean = s / static_cast<double>(z.size());
    auto profile = [&](double t) {
        const double a = std::exp(t);
        const double b = a / mean;
        double ll = 0.0;
        for (auto v : z) {
            const double zz = static_cast<double>(v);
            ll += std::lgamma(zz + a) - std::lgamma(a) + a * std::log(b / (b + 1.0)) -
                  zz * std::log(b + 1.0);
        }
        return ll;
    };
    double lo = -12.0, hi = 12.0;
    const double g = 0.6180339887498949;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = profile(x1), f2 = profile(x2);
    while (hi - lo > 1e-12) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = profile(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = profile(x1);
        }
    }
    const double a = std::exp(0.5 * (lo + hi));
    return {a, a / mean};
}

/// Positive counts of c0 clones drawn from the Gamma-Poisson model.
inline std::vector<std::uint64_t> simulate_counts(double a, double b, int c0, repdiv::RngStream rng,
                                                  std::vector<std::uint64_t>* all = nullptr)
{
    std::vector<std::uint64_t> z;
    for (int i = 0; i < c0; ++i) {
        const auto k = repdiv::sample_poisson(repdiv::sample_gamma(a, b, rng), rng);
        if (all) all->push_back(k);
        if (k > 0) z.push_back(k);
    }
    return z;
}

}  // namespace oracle
