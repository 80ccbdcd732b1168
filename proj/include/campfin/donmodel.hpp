#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "campfin/money.hpp"
#include "campfin/numerics.hpp"

namespace campfin::donmodel {

class out_of_support_error : public std::runtime_error {
public:
    explicit out_of_support_error(const std::string& what) : std::runtime_error(what) {}
};

class degenerate_input_error : public std::invalid_argument {
public:
    explicit degenerate_input_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Truncated log-logistic donation model: amounts x have log-amount
/// xi = ln(x) supported on (delta, xi_max], with sigmoid CDF of shape gamma
/// and scale xi0 in the shifted log variable. delta is fixed at ln(0.01),
/// one cent being the smallest possible donation.
struct DonationModelFit {
    double gamma = 0.0;
    double xi0 = 0.0;
    double delta = 0.0;
    double xi_max = 0.0;
    std::size_t n = 0;
    double log_likelihood = 0.0;
    bool converged = false;
};

/// How the upper log-bound is derived from the data. MaxLogPlusOne keeps the
/// truncation one log-unit above the largest observed log-amount;
/// LiteralMaxPlusOne places it at max(x)+1 in raw currency, which makes the
/// truncation essentially vacuous and exists for sensitivity checks.
enum class XiMaxRule { MaxLogPlusOne, LiteralMaxPlusOne };

inline constexpr double kDelta = -4.605170185988091;  // ln(0.01)

namespace detail {

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 35.0 ? z : std::log1p(std::exp(z)); }

// e^z / (1 + e^z) without overflow.
inline double logistic(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct LogLikelihoodEval {
    double value = 0.0;
    double d_gamma = 0.0;
    double d_xi0 = 0.0;
};

// Log-likelihood and analytic gradient over precomputed log-amount offsets
// t_i = ln(x_i) - delta, all in (0, T] with T = xi_max - delta. Everything is
// evaluated through ln u = gamma*(ln xi0 - ln t), so near-delta amounts
// cannot overflow the (xi0/t)^gamma power.
inline LogLikelihoodEval eval_log_likelihood(std::span<const double> log_t,
                                             double sum_log_x, double gamma, double xi0,
                                             double big_t) {
    const double n = static_cast<double>(log_t.size());
    const double log_xi0 = std::log(xi0);
    const double log_big_t = std::log(big_t);
    const double z_top = gamma * (log_xi0 - log_big_t);
    const double s_top = logistic(z_top);

    double sum_log_t = 0.0, sum_softplus = 0.0, sum_s = 0.0, sum_s_dz = 0.0;
    for (double lt : log_t) {
        const double z = gamma * (log_xi0 - lt);
        sum_log_t += lt;
        sum_softplus += softplus(z);
        const double s = logistic(z);
        sum_s += s;
        sum_s_dz += s * (log_xi0 - lt);
    }

    LogLikelihoodEval out;
    out.value = n * (std::log(gamma) + softplus(z_top) + gamma * log_xi0) - sum_log_x -
                (gamma + 1.0) * sum_log_t - 2.0 * sum_softplus;
    out.d_gamma = n / gamma + n * s_top * (log_xi0 - log_big_t) + n * log_xi0 - sum_log_t -
                  2.0 * sum_s_dz;
    out.d_xi0 = (gamma / xi0) * (n * s_top + n - 2.0 * sum_s);
    return out;
}

}  // namespace detail

/// Truncated CDF F(x): 0 at or below e^delta, 1 at or above e^xi_max, the
/// renormalized sigmoid in between.
inline double cdf(double x, const DonationModelFit& fit) {
    if (!(x > 0.0)) throw std::domain_error("cdf: x must be positive");
    const double xi = std::log(x);
    if (xi <= fit.delta) return 0.0;
    if (xi >= fit.xi_max) return 1.0;
    const double t = xi - fit.delta;
    const double big_t = fit.xi_max - fit.delta;
    const double z = fit.gamma * (std::log(fit.xi0) - std::log(t));
    const double z_top = fit.gamma * (std::log(fit.xi0) - std::log(big_t));
    // A / (1 + u) with A = 1 + u_top, in log form.
    return std::exp(detail::softplus(z_top) - detail::softplus(z));
}

/// Log-density ln f(x) under the fit; -infinity outside the support.
inline double log_density(double x, const DonationModelFit& fit) {
    if (!(x > 0.0)) throw std::domain_error("log_density: x must be positive");
    const double xi = std::log(x);
    if (xi <= fit.delta || xi > fit.xi_max) return -std::numeric_limits<double>::infinity();
    const double t = xi - fit.delta;
    const double big_t = fit.xi_max - fit.delta;
    const double z = fit.gamma * (std::log(fit.xi0) - std::log(t));
    const double z_top = fit.gamma * (std::log(fit.xi0) - std::log(big_t));
    return std::log(fit.gamma) + detail::softplus(z_top) + fit.gamma * std::log(fit.xi0) -
           xi - (fit.gamma + 1.0) * std::log(t) - 2.0 * detail::softplus(z);
}

/// Sum of ln f(x_i) over currency amounts for the given parameters. Throws
/// out_of_support_error if any amount falls outside (e^delta, e^xi_max].
inline double log_likelihood(std::span<const double> amounts, double gamma, double xi0,
                             double delta, double xi_max) {
    if (!(gamma > 0.0) || !(xi0 > 0.0))
        throw std::domain_error("log_likelihood: gamma and xi0 must be positive");
    if (!(delta < xi_max)) throw std::domain_error("log_likelihood: delta must be < xi_max");
    std::vector<double> log_t;
    log_t.reserve(amounts.size());
    double sum_log_x = 0.0;
    for (double x : amounts) {
        if (!(x > 0.0)) throw std::domain_error("log_likelihood: amounts must be positive");
        const double xi = std::log(x);
        if (xi <= delta || xi > xi_max)
            throw out_of_support_error("amount " + std::to_string(x) +
                                       " outside the model support");
        log_t.push_back(std::log(xi - delta));
        sum_log_x += xi;
    }
    return detail::eval_log_likelihood(log_t, sum_log_x, gamma, xi0, xi_max - delta).value;
}

/// Analytic gradient of the log-likelihood with respect to (gamma, xi0).
struct LogLikelihoodGradient {
    double value;
    double d_gamma;
    double d_xi0;
};

inline LogLikelihoodGradient log_likelihood_gradient(std::span<const double> amounts,
                                                     double gamma, double xi0, double delta,
                                                     double xi_max) {
    if (!(gamma > 0.0) || !(xi0 > 0.0))
        throw std::domain_error("log_likelihood_gradient: gamma and xi0 must be positive");
    std::vector<double> log_t;
    log_t.reserve(amounts.size());
    double sum_log_x = 0.0;
    for (double x : amounts) {
        const double xi = std::log(x);
        if (xi <= delta || xi > xi_max)
            throw out_of_support_error("amount " + std::to_string(x) +
                                       " outside the model support");
        log_t.push_back(std::log(xi - delta));
        sum_log_x += xi;
    }
    const auto e =
        detail::eval_log_likelihood(log_t, sum_log_x, gamma, xi0, xi_max - delta);
    return {e.value, e.d_gamma, e.d_xi0};
}

/// Default optimizer budget for fit(): steepest ascent contracts the
/// gradient slowly once near the optimum, and the fit contract asks for a
/// 1e-8 gradient norm, which ill-conditioned sets only reach well past the
/// general-purpose iteration default.
inline numerics::OptimizerConfig fit_optimizer_defaults() {
    numerics::OptimizerConfig config;
    config.gradient_tolerance = 1e-8;
    config.max_iterations = 300'000;
    config.initial_step = 1.0;
    return config;
}

/// Maximum-likelihood fit of (gamma, xi0) with delta fixed at ln(0.01) and
/// xi_max per the chosen rule, by steepest ascent over log-parameters (which
/// keeps both strictly positive without projection).
inline DonationModelFit fit(std::span<const Cents> amounts,
                            XiMaxRule rule = XiMaxRule::MaxLogPlusOne,
                            const numerics::OptimizerConfig& config = fit_optimizer_defaults()) {
    if (amounts.size() < 2) throw degenerate_input_error("fit: need at least 2 amounts");
    Cents min_c = amounts[0], max_c = amounts[0];
    for (Cents a : amounts) {
        min_c = std::min(min_c, a);
        max_c = std::max(max_c, a);
    }
    if (min_c == max_c) throw degenerate_input_error("fit: all amounts are equal");
    if (min_c <= 1)
        throw out_of_support_error(
            "fit: amounts at or below one cent sit outside the open support above e^delta");

    const double delta = kDelta;
    const double max_x = money::to_currency(max_c);
    const double xi_max = rule == XiMaxRule::MaxLogPlusOne ? std::log(max_x) + 1.0
                                                           : max_x + 1.0;
    const double big_t = xi_max - delta;

    std::vector<double> log_t, t_values;
    log_t.reserve(amounts.size());
    t_values.reserve(amounts.size());
    double sum_log_x = 0.0;
    for (Cents a : amounts) {
        const double xi = std::log(money::to_currency(a));
        log_t.push_back(std::log(xi - delta));
        t_values.push_back(xi - delta);
        sum_log_x += xi;
    }

    std::vector<double> median_buf = t_values;
    std::nth_element(median_buf.begin(), median_buf.begin() + median_buf.size() / 2,
                     median_buf.end());
    const double xi0_start = median_buf[median_buf.size() / 2];

    const auto objective = [&](const std::vector<double>& p, std::vector<double>& grad) {
        const double gamma = std::exp(p[0]);
        const double xi0 = std::exp(p[1]);
        if (!std::isfinite(gamma) || !std::isfinite(xi0) || gamma <= 0.0 || xi0 <= 0.0) {
            grad.assign(2, 0.0);
            return -std::numeric_limits<double>::infinity();
        }
        const auto e = detail::eval_log_likelihood(log_t, sum_log_x, gamma, xi0, big_t);
        grad[0] = e.d_gamma * gamma;  // d/d(ln gamma)
        grad[1] = e.d_xi0 * xi0;      // d/d(ln xi0)
        return e.value;
    };

    const auto result = numerics::steepest_ascent(
        objective, {std::log(2.0), std::log(xi0_start)}, config);

    DonationModelFit out;
    out.gamma = std::exp(result.point[0]);
    out.xi0 = std::exp(result.point[1]);
    out.delta = delta;
    out.xi_max = xi_max;
    out.n = amounts.size();
    out.log_likelihood = result.value;
    out.converged = result.converged;
    return out;
}

/// Inverse CDF: the amount whose cumulative probability is u in (0,1).
/// u is clipped away from 0 by 1e-15 so the quantile stays finite even when
/// the truncation is placed astronomically high.
inline double quantile(const DonationModelFit& fit, double u) {
    u = std::clamp(u, 1e-15, 1.0);
    const double big_t = fit.xi_max - fit.delta;
    const double z_top = fit.gamma * (std::log(fit.xi0) - std::log(big_t));
    const double a = 1.0 + std::exp(z_top);
    // x = exp(delta + xi0 * (A/u - 1)^(-1/gamma))
    const double t = fit.xi0 * std::exp(-std::log(a / u - 1.0) / fit.gamma);
    return std::exp(fit.delta + std::min(t, big_t));
}

enum class SyntheticTag { Rand, Model };

/// A seeded synthetic donation set. Rand sets carry the fit they were drawn
/// from; the combined Model set spans several fits and carries none.
struct SyntheticSet {
    std::vector<Cents> amounts;
    std::optional<DonationModelFit> source_fit;
    std::uint64_t seed = 0;
    SyntheticTag tag = SyntheticTag::Rand;
};

/// Counter-based generator: output i of stream (seed) is a pure function of
/// (seed, i), so draws are reproducible under any parallel schedule and
/// streams can be split per category without coordination.
struct CounterRng {
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed) + (stream + 1) * 0xD1B54A32D192ED03ULL);
    }
    static double uniform(std::uint64_t seed, std::uint64_t counter) {
        const std::uint64_t bits = mix(seed + counter * 0x9E3779B97F4A7C15ULL);
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }
};

/// Draw a synthetic set of the given size by inverse-CDF sampling. Amounts
/// are rounded to whole cents and clamped inside the open-bottom support.
inline SyntheticSet sample(const DonationModelFit& fit, std::size_t count,
                           std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
    SyntheticSet set;
    set.amounts.reserve(count);
    set.source_fit = fit;
    set.seed = seed;
    set.tag = SyntheticTag::Rand;
    const double max_cents = std::exp(fit.xi_max) * 100.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double u = CounterRng::uniform(seed, i);
        const double x = quantile(fit, u);
        Cents c = static_cast<Cents>(std::llround(x * 100.0));
        c = std::max<Cents>(c, 2);  // stay strictly above e^delta = one cent
        if (static_cast<double>(c) > max_cents)
            c = static_cast<Cents>(std::floor(max_cents));
        set.amounts.push_back(c);
    }
    return set;
}

/// One donation category's fitted model and observed size.
struct CategoryFit {
    std::string label;
    DonationModelFit fit;
    std::size_t n = 0;
};

/// Matched synthetic controls: a Rand set per category (same n as observed)
/// and the combined Model set, the concatenation of the per-category draws.
struct Controls {
    std::vector<std::pair<std::string, SyntheticSet>> rand_sets;
    SyntheticSet model_set;
};

inline Controls make_controls(std::span<const CategoryFit> fits, std::uint64_t seed) {
    if (fits.empty()) throw std::invalid_argument("make_controls: no category fits");
    Controls out;
    out.model_set.seed = seed;
    out.model_set.tag = SyntheticTag::Model;
    out.model_set.source_fit = std::nullopt;
    for (std::size_t k = 0; k < fits.size(); ++k) {
        if (!fits[k].fit.converged)
            throw std::invalid_argument("make_controls: fit for category '" + fits[k].label +
                                        "' did not converge");
        const std::uint64_t sub_seed = CounterRng::derive_stream(seed, k);
        SyntheticSet rand_set = sample(fits[k].fit, fits[k].n, sub_seed);
        out.model_set.amounts.insert(out.model_set.amounts.end(), rand_set.amounts.begin(),
                                     rand_set.amounts.end());
        out.rand_sets.emplace_back(fits[k].label, std::move(rand_set));
    }
    return out;
}

}  // namespace campfin::donmodel
