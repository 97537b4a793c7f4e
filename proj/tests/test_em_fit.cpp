#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "repdiv/em_fit.hpp"
#include "repdiv/errors.hpp"

using namespace repdiv;

namespace {

CountHistogram hist_of(std::vector<std::uint64_t> z) { return CountHistogram(CloneCounts(std::move(z))); }

std::array<double, 2> fd_gradient(const CountHistogram& h, const GammaPrior& p)
{
    const double ha = 1e-6 * p.shape, hb = 1e-6 * p.rate;
    return {(truncated_loglik(h, {p.shape + ha, p.rate}) - truncated_loglik(h, {p.shape - ha, p.rate})) /
                (2 * ha),
            (truncated_loglik(h, {p.shape, p.rate + hb}) - truncated_loglik(h, {p.shape, p.rate - hb})) /
                (2 * hb)};
}

}  // namespace

TEST_CASE("nb_log_pmf closed-form values")
{
    CHECK(std::abs(nb_log_pmf(0, {1, 1}) - std::log(0.5)) < 1e-14);
    CHECK(std::abs(nb_log_pmf(2, {1, 1}) - std::log(0.125)) < 1e-14);
    CHECK(std::abs(log_p_zero({2.0, 1.0}) - 2.0 * std::log(0.5)) < 1e-14);
}

TEST_CASE("nb_log_pmf matches quadrature of the Poisson-Gamma mixture")
{
    CHECK(std::abs(std::exp(nb_log_pmf(3, {0.5, 2.0})) - oracle::mixture_pmf(3, 0.5, 2.0)) < 1e-8);
    for (std::uint64_t z : {0, 1, 2, 5, 20})
        for (double a : {0.086, 0.5, 1.0, 5.0})
            for (double b : {0.111, 1.0, 3.0}) {
                CAPTURE(z);
                CAPTURE(a);
                CAPTURE(b);
                CHECK(std::abs(std::exp(nb_log_pmf(z, {a, b})) - oracle::mixture_pmf(z, a, b)) < 1e-8);
            }
}

TEST_CASE("nb pmf sums to one")
{
    const GammaPrior grid[] = {{0.086, 0.111}, {0.086, 3.0}, {0.3, 0.5}, {0.5, 2.0}, {1, 1},
                               {1, 0.2},       {2, 1},       {5, 3},     {5, 0.3},   {0.7, 0.9},
                               {10, 10},       {0.15, 0.3}};
    for (const auto& p : grid) {
        // the NB tail is geometric with ratio 1/(b+1); stop once terms are negligible
        CompensatedSum s;
        for (std::uint64_t z = 0;; ++z) {
            const double t = std::exp(nb_log_pmf(z, p));
            s.add(t);
            if (z > 10 && z > 10 * p.shape / p.rate && t < 1e-17) break;
        }
        CAPTURE(p.shape);
        CAPTURE(p.rate);
        CHECK(std::abs(s.value() - 1.0) < 1e-10);
    }
}

TEST_CASE("truncated log-likelihood")
{
    CHECK(std::abs(truncated_loglik(CountHistogram::from_counts(std::vector<std::uint64_t>{1}), {1, 1}) -
                   std::log(0.5)) < 1e-14);
    CHECK(std::abs(truncated_loglik(hist_of({1, 1}), {1, 1}) - 2 * std::log(0.5)) < 1e-14);
    const double ref = static_cast<double>(oracle::truncated_loglik({1, 2, 5}, 0.7, 0.9));
    CHECK(std::abs(truncated_loglik(hist_of({1, 2, 5}), {0.7, 0.9}) - ref) < 1e-12);
    CHECK_THROWS_AS(truncated_loglik(hist_of({1, 2}), {1e-17, 1.0}), NumericError);
}

TEST_CASE("analytic derivatives match finite differences")
{
    const auto h = hist_of({1, 1, 1, 2, 2, 3, 5, 8, 40});
    for (const GammaPrior p : {GammaPrior{0.3, 0.4}, GammaPrior{1.2, 0.7}, GammaPrior{0.086, 0.111}}) {
        const auto d = truncated_loglik_derivatives(h, p);
        const auto g = fd_gradient(h, p);
        CHECK(d.value == doctest::Approx(truncated_loglik(h, p)).epsilon(1e-14));
        CHECK(d.gradient[0] == doctest::Approx(g[0]).epsilon(1e-6));
        CHECK(d.gradient[1] == doctest::Approx(g[1]).epsilon(1e-6));
    }
}

TEST_CASE("estimate_n0")
{
    CHECK(estimate_n0({1, 1}, 100).value == doctest::Approx(100.0).epsilon(1e-14));
    CHECK(estimate_n0({2, 1}, 100).value == doctest::Approx(100.0 / 3.0).epsilon(1e-14));
    // long-double closed form at memory-cell scale
    const long double p0 = std::pow(0.111L / 1.111L, 0.086L);
    const long double expected = 399632.0L * p0 / (1.0L - p0);
    CHECK(estimate_n0({0.086, 0.111}, 399632).value ==
          doctest::Approx(static_cast<double>(expected)).epsilon(1e-12));
    const auto capped = estimate_n0({1e-12, 1.0}, 10);
    CHECK(capped.capped);
    CHECK(capped.value == kN0Cap);
}

TEST_CASE("inner E-step")
{
    const auto one = CountHistogram::from_counts(std::vector<std::uint64_t>{1});
    const auto s0 = inner_e_step(one, 0.0, {1, 1});
    CHECK(s0.s_lambda == doctest::Approx(1.0));
    CHECK(s0.s_loglambda == doctest::Approx(boost::math::digamma(2.0) - std::log(2.0)));
    CHECK(inner_e_step(one, 1.0, {1, 1}).s_lambda == doctest::Approx(1.5));

    const auto s = inner_e_step(hist_of({2, 3}), 0.5, {0.5, 2.0});
    using boost::math::digamma;
    const double lam = (2.5 + 3.5 + 0.5 * 0.5) / 3.0;
    const double loglam = digamma(2.5) + digamma(3.5) + 0.5 * digamma(0.5) - 2.5 * std::log(3.0);
    CHECK(std::abs(s.s_lambda - lam) < 1e-12);
    CHECK(std::abs(s.s_loglambda - loglam) < 1e-12);
    CHECK(s.weight == 2.5);
}

TEST_CASE("inner M-step")
{
    using boost::math::digamma;
    SufficientStats exact{2.0 / 3.0, digamma(2.0) - std::log(3.0), 1.0};
    auto r = inner_m_step(exact);
    CHECK(std::abs(r.prior.shape - 2.0) < 1e-8);
    CHECK(std::abs(r.prior.rate - 3.0) < 1e-8);
    CHECK_FALSE(r.clamped);

    r = inner_m_step({1.0, digamma(1.0), 1.0});
    CHECK(std::abs(r.prior.shape - 1.0) < 1e-8);
    CHECK(std::abs(r.prior.rate - 1.0) < 1e-8);

    RngStream rng(12);
    for (int i = 0; i < 50; ++i) {
        // stats generated by a valid Gamma so that Jensen's gap is positive
        const double a = std::exp(4.0 * rng.uniform() - 3.0);
        const double b = std::exp(4.0 * rng.uniform() - 2.0);
        const double w = 1.0 + 1000.0 * rng.uniform();
        SufficientStats st{w * a / b, w * (digamma(a) - std::log(b)), w};
        const auto m = inner_m_step(st);
        const double ga = st.s_loglambda - w * (digamma(m.prior.shape) - std::log(m.prior.rate));
        const double gb = w * m.prior.shape / m.prior.rate - st.s_lambda;
        CHECK(std::abs(ga) < 1e-8 * w);
        CHECK(std::abs(gb) < 1e-8 * w);
    }
}

TEST_CASE("inner EM with known zeros recovers the full-likelihood MLE")
{
    for (int seed = 0; seed < 3; ++seed) {
        std::vector<std::uint64_t> all;
        const auto z = oracle::simulate_counts(0.7, 0.9, 3000, RngStream(seed, 21), &all);
        const double zeros = static_cast<double>(all.size() - z.size());
        FitConfig cfg;
        cfg.max_inner_iters = 100000;
        cfg.inner_tol = 1e-15;
        const auto r = inner_em(hist_of(z), zeros, {1.0, 1.0}, cfg);
        const auto ref = oracle::full_nb_mle(all);
        CHECK(std::abs(r.prior.shape - ref.a) < 1e-6 * (1 + ref.a));
        CHECK(std::abs(r.prior.rate - ref.b) < 1e-6 * (1 + ref.b));
    }
}

TEST_CASE("fit recovers a well-determined prior")
{
    const auto z = oracle::simulate_counts(0.732, 0.882, 100000, RngStream(5, 22));
    const auto r = fit(CloneCounts(z));
    CHECK(r.converged);
    CHECK(std::abs(r.prior.shape / 0.732 - 1.0) < 0.10);
    CHECK(std::abs(r.prior.rate / 0.882 - 1.0) < 0.10);
    CHECK(std::abs(static_cast<double>(r.c_hat) / 1e5 - 1.0) < 0.10);
    CHECK(r.c_hat >= r.observed_c);
}

TEST_CASE("fit: trace, stationarity, n0 identity and determinism at small shape")
{
    for (int seed = 0; seed < 4; ++seed) {
        const CloneCounts counts(oracle::simulate_counts(0.086, 0.111, 10000, RngStream(seed, 23)));
        const auto r = fit(counts);
        const auto h = CountHistogram(counts);
        for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
            CHECK(r.loglik_trace[i] >= r.loglik_trace[i - 1] - 1e-8);
        CHECK(r.loglik() == truncated_loglik(h, r.prior));
        const auto g = fd_gradient(h, r.prior);
        CHECK(std::hypot(g[0], g[1]) < 1e-4 * (1.0 + std::abs(r.loglik())));

        const double p0 = std::exp(log_p_zero(r.prior));
        const double n0 = static_cast<double>(counts.size()) * p0 / (1.0 - p0);
        CHECK(std::abs(r.n0_hat - n0) <= 1e-12 * n0);
        CHECK(r.c_hat == counts.size() + static_cast<std::uint64_t>(std::llround(r.n0_hat)));

        const auto again = fit(counts);
        CHECK(again.prior == r.prior);
        CHECK(again.loglik_trace == r.loglik_trace);
    }
}

TEST_CASE("plain EM without acceleration still increases the likelihood")
{
    const CloneCounts counts(oracle::simulate_counts(0.414, 0.335, 5000, RngStream(2, 24)));
    FitConfig cfg;
    cfg.accelerate = false;
    cfg.polish = false;
    const auto r = fit(counts, cfg);
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
        CHECK(r.loglik_trace[i] >= r.loglik_trace[i - 1] - 1e-8);
    const auto full = fit(counts);
    CHECK(full.loglik() >= r.loglik() - 1e-8);
}

TEST_CASE("c_hat limit")
{
    // seed chosen so the unconstrained MLE sits far out on the small-shape ridge
    const CloneCounts counts(oracle::simulate_counts(0.086, 0.111, 2000, RngStream(0, 11)));
    const auto free_fit = fit(counts);
    FitConfig cfg;
    cfg.max_c_hat_ratio = 3.0;
    const auto r = fit(counts, cfg);
    REQUIRE(free_fit.c_hat > 3 * counts.size());
    CHECK(r.constrained);
    CHECK(r.clamped);
    CHECK(std::abs(r.n0_hat - 2.0 * counts.size()) < 1e-6 * counts.size());
    const auto h = CountHistogram(counts);
    CHECK(r.loglik() == truncated_loglik(h, r.prior));
    CHECK(r.loglik() <= free_fit.loglik());
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
        CHECK(r.loglik_trace[i] >= r.loglik_trace[i - 1]);

    // no other point on the boundary curve does better
    const double kappa = std::log1p(1.0 / 2.0);
    for (double t = -10.0; t <= 10.0; t += 0.25) {
        const double b = std::exp(t);
        const GammaPrior p{kappa / std::log1p(1.0 / b), b};
        CHECK(truncated_loglik(h, p) <= r.loglik() + 1e-9);
    }

    FitConfig loose;
    loose.max_c_hat_ratio = 1e12;
    CHECK_FALSE(fit(counts, loose).constrained);
    FitConfig bad;
    bad.max_c_hat_ratio = 1.0;
    CHECK_THROWS_AS(fit(counts, bad), DomainError);
}

TEST_CASE("fit rejects degenerate data")
{
    try {
        fit(CloneCounts({2, 2}));
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.code()) == "fit_degenerate");
    }
    CHECK_NOTHROW(fit(CloneCounts({2, 2, 2})));
}

TEST_CASE("FitConfig validation")
{
    FitConfig c;
    c.outer_tol = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = {};
    c.lower_bound = 2.0;
    c.upper_bound = 1.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
}
