#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "campfin/money.hpp"
#include "campfin/numerics.hpp"

namespace campfin::logit {

class separation_error : public std::runtime_error {
public:
    explicit separation_error(const std::string& what) : std::runtime_error(what) {}
};

/// One candidate's share of the race's donations and the election outcome.
struct RaceRow {
    double fraction = 0.0;  // of all money donated in the race, in [0,1]
    bool elected = false;
};

/// A single race (federal unit x office) ready for regression.
struct RaceDataset {
    std::vector<RaceRow> rows;
    std::string federal_unit;
    std::string office;
    Cents total_money = 0;

    void validate() const {
        if (rows.empty()) throw std::invalid_argument("race dataset is empty");
        double sum = 0.0;
        std::size_t elected = 0;
        for (const auto& r : rows) {
            if (!(r.fraction >= 0.0) || !(r.fraction <= 1.0))
                throw std::invalid_argument("donation fraction outside [0,1]");
            sum += r.fraction;
            elected += r.elected ? 1 : 0;
        }
        if (sum > 1.0 + 1e-9)
            throw std::invalid_argument("donation fractions sum above 1");
        if (elected == 0 || elected == rows.size())
            throw std::invalid_argument(
                "race needs at least one elected and one non-elected candidate");
    }
};

/// Fitted intercept/slope with covariance and the two diagnostics the tables
/// report: per-parameter Wald p-values and the residual deviance p-value.
struct LogitFit {
    double beta0 = 0.0;
    double beta1 = 0.0;
    std::array<double, 4> covariance{};  // row-major 2x2
    std::array<double, 2> wald_p{};
    double deviance = 0.0;
    double deviance_p = 0.0;
    std::size_t n = 0;
    std::size_t n_elected = 0;

    double sigma0() const { return std::sqrt(covariance[0]); }
    double sigma1() const { return std::sqrt(covariance[3]); }
};

namespace detail {

inline double log1p_exp(double z) { return z > 35.0 ? z : std::log1p(std::exp(z)); }

inline double logistic(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace detail

/// Election probability at a donation fraction under the fitted model.
inline double predict(const LogitFit& fit, double fraction) {
    return detail::logistic(fit.beta0 + fit.beta1 * fraction);
}

/// Newton-Raphson maximum likelihood for the two-parameter logistic model.
/// Throws separation_error when the optimum runs away (perfectly separable
/// data) and invalid_argument on degenerate inputs.
inline LogitFit fit_race(const RaceDataset& dataset,
                         const numerics::OptimizerConfig& config = {}) {
    dataset.validate();
    const std::size_t n = dataset.rows.size();
    std::size_t n_elected = 0;
    for (const auto& r : dataset.rows) n_elected += r.elected ? 1 : 0;

    const auto objective = [&](const std::vector<double>& beta, std::vector<double>& grad,
                               std::vector<double>& hess) {
        double ll = 0.0, g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (const auto& r : dataset.rows) {
            const double z = beta[0] + beta[1] * r.fraction;
            const double p = detail::logistic(z);
            const double y = r.elected ? 1.0 : 0.0;
            ll += y * z - detail::log1p_exp(z);
            const double resid = y - p;
            g0 += resid;
            g1 += resid * r.fraction;
            const double w = p * (1.0 - p);
            h00 -= w;
            h01 -= w * r.fraction;
            h11 -= w * r.fraction * r.fraction;
        }
        grad = {g0, g1};
        hess = {h00, h01, h01, h11};
        return ll;
    };

    const double p_bar = static_cast<double>(n_elected) / static_cast<double>(n);
    const std::vector<double> start{std::log(p_bar / (1.0 - p_bar)), 0.0};

    numerics::NewtonResult result;
    try {
        result = numerics::newton_raphson_mle(objective, start, config);
    } catch (const numerics::singular_hessian_error&) {
        throw separation_error("singular information matrix; data may be separable");
    }

    const double beta_norm = std::hypot(result.point[0], result.point[1]);
    if (beta_norm > 1e4)
        throw separation_error("coefficients diverged; data is (quasi-)separable");
    if (!result.converged)
        throw std::runtime_error("logit fit did not converge after " +
                                 std::to_string(result.iterations) + " iterations");

    // Observed information = -Hessian at the optimum; covariance by 2x2
    // inversion, with a condition-number screen for quasi-separation.
    const double i00 = -result.hessian[0], i01 = -result.hessian[1],
                 i11 = -result.hessian[3];
    const double det = i00 * i11 - i01 * i01;
    const double trace = i00 + i11;
    if (det <= 0.0) throw separation_error("observed information is not positive definite");
    const double disc = std::sqrt(std::max(trace * trace - 4.0 * det, 0.0));
    const double cond = (trace + disc) / std::max(trace - disc, 1e-300);
    if (cond > 1e12)
        throw separation_error("information matrix condition number above 1e12");

    LogitFit fit;
    fit.beta0 = result.point[0];
    fit.beta1 = result.point[1];
    fit.covariance = {i11 / det, -i01 / det, -i01 / det, i00 / det};
    fit.n = n;
    fit.n_elected = n_elected;
    fit.wald_p[0] = numerics::chi2_sf(fit.beta0 * fit.beta0 / fit.covariance[0], 1);
    fit.wald_p[1] = numerics::chi2_sf(fit.beta1 * fit.beta1 / fit.covariance[3], 1);
    // Saturated log-likelihood for binary outcomes is 0, so the deviance is
    // -2 ln L at the optimum, referred to chi-squared with n-2 dof.
    fit.deviance = -2.0 * result.value;
    fit.deviance_p = numerics::chi2_sf(fit.deviance, static_cast<int>(n) - 2);
    return fit;
}

/// Odds multiplier for an extra donation of extra_money in a race that moved
/// total_money overall: exp(beta1 * extra/total). Exact for odds; the naive
/// probability ratio p(x+y)/p(x) only approaches this when p is small.
inline double odds_ratio(const LogitFit& fit, Cents extra_money, Cents total_money) {
    if (total_money <= 0) throw std::domain_error("odds_ratio: total money must be positive");
    return std::exp(fit.beta1 * static_cast<double>(extra_money) /
                    static_cast<double>(total_money));
}

/// Outcome of one race's regression: the fit, or the reason it failed.
struct RaceResult {
    std::string federal_unit;
    std::string office;
    std::size_t n = 0;
    std::size_t n_elected = 0;
    Cents total_money = 0;
    std::optional<LogitFit> fit;
    std::string error;  // non-empty iff fit is absent
};

/// Deterministic table rows for all races: sorted by office then unit, with
/// failed fits carried through as marked rows rather than dropped.
inline std::vector<RaceResult> summarize_races(std::vector<RaceResult> results) {
    std::sort(results.begin(), results.end(), [](const RaceResult& a, const RaceResult& b) {
        if (a.office != b.office) return a.office < b.office;
        return a.federal_unit < b.federal_unit;
    });
    return results;
}

}  // namespace campfin::logit
