#include "repdiv/em_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "repdiv/errors.hpp"
#include "repdiv/numerics.hpp"

namespace repdiv {

// ---------------------------------------------------------------------------
// CountHistogram
// ---------------------------------------------------------------------------

CountHistogram::CountHistogram(const CloneCounts& counts)
    : CountHistogram(from_counts(counts.counts()))
{
}

CountHistogram CountHistogram::from_counts(std::span<const std::uint64_t> counts)
{
    if (counts.empty()) throw DomainError("count histogram of an empty count list");
    std::map<std::uint64_t, double> tally;
    for (auto z : counts) {
        if (z == 0) throw DomainError("count histogram requires positive counts");
        tally[z] += 1.0;
    }
    CountHistogram h;
    h.groups_.reserve(tally.size());
    for (const auto& [value, mult] : tally) h.groups_.push_back({value, mult});
    h.clones_ = static_cast<double>(counts.size());
    return h;
}

double CountHistogram::mean() const noexcept
{
    double s = 0.0;
    for (const auto& g : groups_) s += g.multiplicity * static_cast<double>(g.value);
    return s / clones_;
}

double CountHistogram::variance() const noexcept
{
    const double m = mean();
    double s = 0.0;
    for (const auto& g : groups_) {
        const double d = static_cast<double>(g.value) - m;
        s += g.multiplicity * d * d;
    }
    return clones_ > 1.0 ? s / (clones_ - 1.0) : 0.0;
}

void FitConfig::validate() const
{
    if (!(outer_tol > 0.0) || !(inner_tol > 0.0))
        throw DomainError("fit tolerances must be positive");
    if (max_outer_iters < 1 || max_inner_iters < 1)
        throw DomainError("fit iteration limits must be positive");
    if (!(lower_bound > 0.0) || !(upper_bound > lower_bound) || !std::isfinite(upper_bound))
        throw DomainError("fit parameter bounds must satisfy 0 < lower < upper < inf");
    if (!(max_c_hat_ratio > 1.0)) throw DomainError("max_c_hat_ratio must exceed one");
}

// ---------------------------------------------------------------------------
// Likelihood pieces
// ---------------------------------------------------------------------------

double log_p_zero(const GammaPrior& prior)
{
    return -prior.shape * std::log1p(1.0 / prior.rate);
}

double nb_log_pmf(std::uint64_t z, const GammaPrior& prior)
{
    prior.validate();
    const double zd = static_cast<double>(z);
    double out = log_p_zero(prior) - zd * std::log1p(prior.rate);
    if (z > 0)
        out += log_gamma(zd + prior.shape) - log_gamma(prior.shape) - log_gamma(zd + 1.0);
    return out;
}

namespace {

// ln(1 - p0), refusing the degenerate case p0 -> 1.
double log_one_minus_p0(const GammaPrior& prior)
{
    const double one_minus = -std::expm1(log_p_zero(prior));
    if (!(one_minus > 1e-15))
        throw NumericError("numeric_degeneracy",
                           "P(Z=0) is numerically one at shape=" + std::to_string(prior.shape) +
                               ", rate=" + std::to_string(prior.rate));
    return std::log(one_minus);
}

// sum over groups of m * ln p(z), without the shared lgamma(a) term separated.
double observed_log_pmf_sum(const CountHistogram& hist, const GammaPrior& prior)
{
    const double lg_a = log_gamma(prior.shape);
    const double l0 = log_p_zero(prior);
    const double log_b1 = std::log1p(prior.rate);
    double s = 0.0;
    for (const auto& g : hist.groups()) {
        const double z = static_cast<double>(g.value);
        s += g.multiplicity *
             (log_gamma(z + prior.shape) - lg_a - log_gamma(z + 1.0) + l0 - z * log_b1);
    }
    return s;
}

}  // namespace

double truncated_loglik(const CountHistogram& hist, const GammaPrior& prior)
{
    prior.validate();
    const double norm = log_one_minus_p0(prior);
    return observed_log_pmf_sum(hist, prior) - hist.observed_clones() * norm;
}

LoglikDerivatives truncated_loglik_derivatives(const CountHistogram& hist,
                                               const GammaPrior& prior)
{
    prior.validate();
    const double a = prior.shape;
    const double b = prior.rate;
    const double c = hist.observed_clones();

    // L0 = ln p0 = a (ln b - ln(b+1)) and its partial derivatives.
    const double l0 = log_p_zero(prior);
    const double dl0_da = -std::log1p(1.0 / b);
    const double inv_bb1 = 1.0 / (b * (b + 1.0));
    const double dl0_db = a * inv_bb1;
    const double d2l0_dab = inv_bb1;
    const double d2l0_dbb = -a * (2.0 * b + 1.0) * inv_bb1 * inv_bb1;
    const double inv_b1 = 1.0 / (b + 1.0);

    LoglikDerivatives out;
    const double psi_a = digamma(a);
    const double tri_a = trigamma(a);
    double ga = 0.0, gb = 0.0, haa = 0.0, hbb = 0.0;
    for (const auto& g : hist.groups()) {
        const double z = static_cast<double>(g.value);
        const double m = g.multiplicity;
        ga += m * (digamma(z + a) - psi_a);
        gb -= m * z * inv_b1;
        haa += m * (trigamma(z + a) - tri_a);
        hbb += m * z * inv_b1 * inv_b1;
    }
    // Terms shared by every observed clone: L0 in the pmf, -ln(1 - e^L0) from truncation.
    const double odds = 1.0 / std::expm1(-l0);  // p0 / (1 - p0)
    const double curv = odds * (1.0 + odds);
    ga += c * (dl0_da + odds * dl0_da);
    gb += c * (dl0_db + odds * dl0_db);
    haa += c * (curv * dl0_da * dl0_da);
    hbb += c * (d2l0_dbb + curv * dl0_db * dl0_db + odds * d2l0_dbb);
    const double hab = c * (d2l0_dab + curv * dl0_da * dl0_db + odds * d2l0_dab);

    out.value = truncated_loglik(hist, prior);
    out.gradient = {ga, gb};
    out.hessian = {haa, hab, hbb};
    return out;
}

N0Estimate estimate_n0(const GammaPrior& prior, double observed_c)
{
    prior.validate();
    if (!(observed_c >= 1.0)) throw DomainError("estimate_n0 requires at least one observed clone");
    // p0 / (1 - p0) = 1 / (exp(-ln p0) - 1)
    const double denom = std::expm1(-log_p_zero(prior));
    const double n0 = observed_c / denom;
    if (!(denom > 0.0) || !std::isfinite(n0) || n0 > kN0Cap) return {kN0Cap, true};
    return {n0, false};
}

double inner_objective(const CountHistogram& hist, double n0, const GammaPrior& prior)
{
    prior.validate();
    return observed_log_pmf_sum(hist, prior) + n0 * log_p_zero(prior);
}

// ---------------------------------------------------------------------------
// Inner EM
// ---------------------------------------------------------------------------

SufficientStats inner_e_step(const CountHistogram& hist, double n0, const GammaPrior& prior)
{
    prior.validate();
    if (!(n0 >= 0.0) || !std::isfinite(n0)) throw DomainError("inner_e_step: n0 must be >= 0");
    const double a = prior.shape;
    const double inv_b1 = 1.0 / (1.0 + prior.rate);
    const double log_b1 = std::log1p(prior.rate);
    const double c = hist.observed_clones();

    double sum_z = 0.0;
    double sum_psi = 0.0;
    for (const auto& g : hist.groups()) {
        const double z = static_cast<double>(g.value);
        sum_z += g.multiplicity * z;
        sum_psi += g.multiplicity * digamma(z + a);
    }
    SufficientStats st;
    st.weight = c + n0;
    st.s_lambda = (sum_z + c * a) * inv_b1 + n0 * a * inv_b1;
    st.s_loglambda = sum_psi + n0 * digamma(a) - st.weight * log_b1;
    return st;
}

MStepResult inner_m_step(const SufficientStats& stats, const FitConfig& config)
{
    if (!(stats.weight > 0.0) || !(stats.s_lambda > 0.0) || !std::isfinite(stats.s_loglambda))
        throw DomainError("inner_m_step: invalid sufficient statistics");

    const double mean_lambda = stats.s_lambda / stats.weight;
    // Jensen gap: ln E[lambda] - E[ln lambda] >= 0; the shape solves
    // ln a - psi(a) = gap.
    const double gap = std::log(mean_lambda) - stats.s_loglambda / stats.weight;

    constexpr double kLogLo = -18.420680743952367;  // ln 1e-8
    constexpr double kLogHi = 18.420680743952367;   // ln 1e8

    double a;
    if (!(gap > 0.0)) {
        a = std::exp(kLogHi);
    } else {
        // f(t) = ln a - psi(a) - gap with a = e^t; decreasing in t.
        auto f = [gap](double t) {
            const double x = std::exp(t);
            return t - digamma(x) - gap;
        };
        double lo = kLogLo;
        double hi = kLogHi;
        if (f(hi) >= 0.0) {
            a = std::exp(hi);
        } else if (f(lo) <= 0.0) {
            a = std::exp(lo);
        } else {
            // Standard closed-form start for the Gamma shape MLE.
            double x0 = (3.0 - gap + std::sqrt((gap - 3.0) * (gap - 3.0) + 24.0 * gap)) /
                        (12.0 * gap);
            double t = std::clamp(std::log(x0), lo, hi);
            for (int it = 0; it < 100; ++it) {
                const double x = std::exp(t);
                const double ft = t - digamma(x) - gap;
                if (ft > 0.0)
                    lo = t;
                else
                    hi = t;
                const double dft = 1.0 - x * trigamma(x);  // < 0
                double next = t - ft / dft;
                if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
                const double step = std::abs(next - t);
                t = next;
                if (step < 1e-15 * std::max(1.0, std::abs(t)) || hi - lo < 1e-15) break;
            }
            a = std::exp(t);
        }
    }

    MStepResult out;
    const double a_clamped = std::clamp(a, config.lower_bound, config.upper_bound);
    const double b = stats.weight * a_clamped / stats.s_lambda;
    const double b_clamped = std::clamp(b, config.lower_bound, config.upper_bound);
    out.clamped = (a_clamped != a) || (b_clamped != b);
    out.prior = {a_clamped, b_clamped};
    return out;
}

InnerResult inner_em(const CountHistogram& hist, double n0, const GammaPrior& start,
                     const FitConfig& config)
{
    InnerResult res;
    res.prior = start;
    double q = inner_objective(hist, n0, start);
    for (int it = 0; it < config.max_inner_iters; ++it) {
        const SufficientStats st = inner_e_step(hist, n0, res.prior);
        const MStepResult m = inner_m_step(st, config);
        const double q_new = inner_objective(hist, n0, m.prior);
        ++res.iterations;
        res.clamped = m.clamped;
        // EM cannot decrease the objective; a drop is round-off at the optimum.
        if (q_new < q) break;
        res.prior = m.prior;
        const double change = q_new - q;
        q = q_new;
        if (change <= config.inner_tol * std::abs(q)) break;
    }
    return res;
}

GammaPrior moment_start(const CountHistogram& hist, const FitConfig& config)
{
    const double m = hist.mean();
    const double v = hist.variance();
    if (!(v > m)) return {std::clamp(1.0, config.lower_bound, config.upper_bound),
                          std::clamp(1.0, config.lower_bound, config.upper_bound)};
    const double excess = v - m;
    return {std::clamp(m * m / excess, config.lower_bound, config.upper_bound),
            std::clamp(m / excess, config.lower_bound, config.upper_bound)};
}

// ---------------------------------------------------------------------------
// Outer EM
// ---------------------------------------------------------------------------

InnerResult outer_em_step(const CountHistogram& hist, const GammaPrior& prior,
                          const FitConfig& config)
{
    const N0Estimate n0 = estimate_n0(prior, hist.observed_clones());
    return inner_em(hist, n0.value, prior, config);
}

namespace {

// Truncated log-likelihood, or -inf where it is numerically degenerate.
double safe_loglik(const CountHistogram& hist, const GammaPrior& prior)
{
    try {
        return truncated_loglik(hist, prior);
    } catch (const NumericError&) {
        return -std::numeric_limits<double>::infinity();
    }
}

// Newton ascent in theta = (ln a, ln b) with a Levenberg shift when the
// Hessian is not negative definite and step halving until the likelihood
// does not decrease. Appends each accepted value to the trace.
void newton_polish(const CountHistogram& hist, const FitConfig& config, FitResult& res)
{
    const double log_lo = std::log(config.lower_bound);
    const double log_hi = std::log(config.upper_bound);
    for (int it = 0; it < config.max_polish_iters; ++it) {
        const LoglikDerivatives d = truncated_loglik_derivatives(hist, res.prior);
        const double a = res.prior.shape;
        const double b = res.prior.rate;
        const double ga = a * d.gradient[0];
        const double gb = b * d.gradient[1];
        if (std::hypot(ga, gb) <= 1e-12 * (1.0 + std::abs(d.value))) {
            res.converged = true;
            return;
        }
        // Hessian in theta: D H D + diag(D g).
        double haa = a * a * d.hessian.xx + ga;
        double hab = a * b * d.hessian.xy;
        double hbb = b * b * d.hessian.yy + gb;
        // Make -H positive definite.
        const SymMatrix2 neg{-haa, -hab, -hbb};
        const auto ev = neg.eigenvalues();
        const double shift = ev[0] > 1e-12 * std::max(1.0, ev[1]) ? 0.0
                                                                   : -ev[0] + 1e-6 * std::max(1.0, ev[1]);
        const double pxx = -haa + shift;
        const double pyy = -hbb + shift;
        const double pxy = -hab;
        const double det = pxx * pyy - pxy * pxy;
        if (!(det > 0.0)) return;
        double sa = (pyy * ga - pxy * gb) / det;
        double sb = (-pxy * ga + pxx * gb) / det;

        bool accepted = false;
        const double t0 = std::log(a);
        const double t1 = std::log(b);
        for (int half = 0; half < 40; ++half) {
            const GammaPrior trial{std::exp(std::clamp(t0 + sa, log_lo, log_hi)),
                                   std::exp(std::clamp(t1 + sb, log_lo, log_hi))};
            const double ll = safe_loglik(hist, trial);
            if (ll >= d.value) {
                const double change = ll - d.value;
                res.prior = trial;
                res.clamped = trial.shape == config.lower_bound || trial.shape == config.upper_bound ||
                              trial.rate == config.lower_bound || trial.rate == config.upper_bound;
                res.loglik_trace.push_back(ll);
                accepted = true;
                if (change <= 1e-15 * std::abs(ll) && std::hypot(sa, sb) < 1e-10) {
                    res.converged = true;
                    return;
                }
                break;
            }
            sa *= 0.5;
            sb *= 0.5;
        }
        if (!accepted) return;
    }
}

// Maximizes the truncated likelihood on the curve n0(a, b) = max_n0, i.e.
// a = ln(1 + C / max_n0) / ln(1 + 1/b), over ln b: grid scan, then golden
// section around the best grid point.
void constrained_boundary_fit(const CountHistogram& hist, const FitConfig& config, double max_n0,
                              FitResult& res)
{
    const double kappa = std::log1p(hist.observed_clones() / max_n0);
    auto on_curve = [&](double t) {
        const double b = std::exp(t);
        const double a = std::clamp(kappa / std::log1p(1.0 / b), config.lower_bound, config.upper_bound);
        return GammaPrior{a, b};
    };
    res.loglik_trace.clear();
    double best = -std::numeric_limits<double>::infinity();
    double best_t = std::log(config.lower_bound);
    auto eval = [&](double t) {
        const double ll = safe_loglik(hist, on_curve(t));
        if (ll > best) {
            best = ll;
            best_t = t;
        }
        if (std::isfinite(best)) res.loglik_trace.push_back(best);
        return ll;
    };

    const double lo = std::log(config.lower_bound);
    const double hi = std::log(config.upper_bound);
    constexpr int kGrid = 112;
    for (int i = 0; i <= kGrid; ++i) eval(lo + (hi - lo) * i / kGrid);
    if (!std::isfinite(best))
        throw NumericError("numeric_degeneracy", "no finite likelihood on the c_hat boundary");

    const double step = (hi - lo) / kGrid;
    double x0 = std::max(lo, best_t - step);
    double x3 = std::min(hi, best_t + step);
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = x3 - kInvPhi * (x3 - x0);
    double x2 = x0 + kInvPhi * (x3 - x0);
    double f1 = eval(x1);
    double f2 = eval(x2);
    while (x3 - x0 > 1e-10) {
        if (f1 < f2) {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + kInvPhi * (x3 - x0);
            f2 = eval(x2);
        } else {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - kInvPhi * (x3 - x0);
            f1 = eval(x1);
        }
    }
    res.prior = on_curve(best_t);
    res.constrained = true;
    res.clamped = true;
}

}  // namespace

FitResult fit(const CloneCounts& counts, const FitConfig& config,
              std::optional<GammaPrior> warm_start)
{
    config.validate();
    const CountHistogram hist(counts);
    if (hist.groups().size() == 1 && counts.size() < 3)
        throw DataError("fit_degenerate",
                        "cannot fit a Gamma prior: only " + std::to_string(counts.size()) +
                            " clones, all with " + std::to_string(hist.groups()[0].value) +
                            " reads");

    const double log_lo = std::log(config.lower_bound);
    const double log_hi = std::log(config.upper_bound);

    FitResult res;
    res.observed_c = counts.size();
    res.prior = warm_start ? GammaPrior{std::clamp(warm_start->shape, config.lower_bound,
                                                   config.upper_bound),
                                        std::clamp(warm_start->rate, config.lower_bound,
                                                   config.upper_bound)}
                           : moment_start(hist, config);
    double ll = truncated_loglik(hist, res.prior);
    res.loglik_trace.push_back(ll);

    auto em_map = [&](const GammaPrior& p) {
        InnerResult r = outer_em_step(hist, p, config);
        ++res.outer_iterations;
        res.inner_iterations += r.iterations;
        return r;
    };

    while (res.outer_iterations < config.max_outer_iters) {
        InnerResult next = em_map(res.prior);
        double ll_next = truncated_loglik(hist, next.prior);

        if (config.accelerate && res.outer_iterations + 2 <= config.max_outer_iters) {
            // SQUAREM (squared extrapolation) on theta = (ln a, ln b).
            const InnerResult second = em_map(next.prior);
            const double t0[2] = {std::log(res.prior.shape), std::log(res.prior.rate)};
            const double t1[2] = {std::log(next.prior.shape), std::log(next.prior.rate)};
            const double t2[2] = {std::log(second.prior.shape), std::log(second.prior.rate)};
            const double r[2] = {t1[0] - t0[0], t1[1] - t0[1]};
            const double v[2] = {t2[0] - 2.0 * t1[0] + t0[0], t2[1] - 2.0 * t1[1] + t0[1]};
            const double nr = std::hypot(r[0], r[1]);
            const double nv = std::hypot(v[0], v[1]);
            next = second;
            ll_next = safe_loglik(hist, second.prior);
            if (nv > 0.0 && std::isfinite(nv)) {
                const double alpha = std::min(-1.0, -nr / nv);
                GammaPrior jump;
                jump.shape = std::exp(
                    std::clamp(t0[0] - 2.0 * alpha * r[0] + alpha * alpha * v[0], log_lo, log_hi));
                jump.rate = std::exp(
                    std::clamp(t0[1] - 2.0 * alpha * r[1] + alpha * alpha * v[1], log_lo, log_hi));
                if (alpha < -1.0 && safe_loglik(hist, jump) > -std::numeric_limits<double>::infinity()) {
                    const InnerResult settled = em_map(jump);
                    const double ll_settled = safe_loglik(hist, settled.prior);
                    if (ll_settled >= ll_next) {
                        next = settled;
                        ll_next = ll_settled;
                    }
                }
            }
        }

        // Every accepted update raises the truncated likelihood; a decrease can
        // only be round-off once the fixed point is reached.
        if (!(ll_next >= ll)) {
            res.converged = true;
            break;
        }
        res.prior = next.prior;
        res.clamped = next.clamped;
        const double change = ll_next - ll;
        ll = ll_next;
        res.loglik_trace.push_back(ll);
        if (change <= config.outer_tol * std::abs(ll)) {
            res.converged = true;
            break;
        }
    }

    if (config.polish) newton_polish(hist, config, res);

    if (std::isfinite(config.max_c_hat_ratio)) {
        const double max_n0 = (config.max_c_hat_ratio - 1.0) * hist.observed_clones();
        if (estimate_n0(res.prior, hist.observed_clones()).value > max_n0)
            constrained_boundary_fit(hist, config, max_n0, res);
    }

    const N0Estimate n0 = estimate_n0(res.prior, hist.observed_clones());
    res.n0_hat = n0.value;
    res.n0_capped = n0.capped;
    res.c_hat = res.observed_c + static_cast<std::uint64_t>(std::llround(n0.value));
    return res;
}

}  // namespace repdiv
