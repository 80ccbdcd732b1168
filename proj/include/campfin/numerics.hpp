#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace campfin::numerics {

/// A chi-squared test statistic with its degrees of freedom.
struct ChiSquareParams {
    double statistic;
    int dof;

    ChiSquareParams(double statistic_, int dof_) : statistic(statistic_), dof(dof_) {
        if (!(statistic >= 0.0))
            throw std::domain_error("chi-square statistic must be non-negative");
        if (dof < 1) throw std::domain_error("chi-square dof must be >= 1");
    }
};

/// Shared knobs for the iterative maximizers.
struct OptimizerConfig {
    double gradient_tolerance = 1e-8;
    int max_iterations = 10'000;
    double initial_step = 1.0;

    void validate() const {
        if (!(gradient_tolerance > 0.0))
            throw std::domain_error("gradient tolerance must be positive");
        if (max_iterations < 1) throw std::domain_error("max iterations must be >= 1");
        if (!(initial_step > 0.0)) throw std::domain_error("initial step must be positive");
    }
};

class singular_hessian_error : public std::runtime_error {
public:
    explicit singular_hessian_error(const std::string& what) : std::runtime_error(what) {}
};

class nonfinite_objective_error : public std::runtime_error {
public:
    explicit nonfinite_objective_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Lower regularized incomplete gamma P(a,x) by power series; valid for x < a+1.
inline double gamma_p_series(double a, double x) {
    constexpr int kMaxTerms = 10'000;
    constexpr double kEps = 1e-16;
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < kMaxTerms; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps) break;
    }
    const double log_prefix = a * std::log(x) - x - std::lgamma(a);
    return sum * std::exp(log_prefix);
}

// Upper regularized incomplete gamma Q(a,x) by modified Lentz continued
// fraction; valid for x >= a+1.
inline double gamma_q_contfrac(double a, double x) {
    constexpr int kMaxIter = 10'000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) break;
    }
    const double log_prefix = a * std::log(x) - x - std::lgamma(a);
    return h * std::exp(log_prefix);
}

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Solve A x = b for small dense systems by Gaussian elimination with
// partial pivoting. A is row-major n x n, overwritten.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
        if (std::fabs(a[pivot * n + col]) < 1e-300)
            throw singular_hessian_error("singular matrix in Newton step");
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
        x[i] = s / a[i * n + i];
    }
    return x;
}

}  // namespace detail

/// Upper regularized incomplete gamma Q(a,x) = Gamma(a,x)/Gamma(a).
/// Series for x < a+1, continued fraction otherwise; absolute error
/// comfortably below 1e-10 for the dof range used here.
inline double regularized_gamma_upper(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("regularized_gamma_upper: a must be > 0");
    if (x < 0.0) throw std::domain_error("regularized_gamma_upper: x must be >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) {
        const double p = detail::gamma_p_series(a, x);
        return p > 1.0 ? 0.0 : 1.0 - p;
    }
    const double q = detail::gamma_q_contfrac(a, x);
    return q < 0.0 ? 0.0 : (q > 1.0 ? 1.0 : q);
}

/// Chi-squared survival function: probability of a fluctuation at least as
/// large as the observed statistic under the null.
inline double chi2_sf(double statistic, int dof) {
    const ChiSquareParams params(statistic, dof);
    return regularized_gamma_upper(params.dof / 2.0, params.statistic / 2.0);
}

inline double chi2_sf(const ChiSquareParams& params) {
    return regularized_gamma_upper(params.dof / 2.0, params.statistic / 2.0);
}

/// Result of a gradient-following maximization.
struct AscentResult {
    std::vector<double> point;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Maximize f by steepest ascent with a backtracking line search: step along
/// the gradient, halving the step until the objective increases, growing it
/// again after successful moves. The returned objective never falls below
/// the starting value. F has signature double(const vector<double>& x,
/// vector<double>& grad) and must fill grad.
template <typename F>
AscentResult steepest_ascent(F&& f, std::vector<double> start,
                             const OptimizerConfig& config = {}) {
    config.validate();
    const std::size_t dim = start.size();
    std::vector<double> grad(dim), trial(dim), trial_grad(dim);

    double value = f(start, grad);
    if (!std::isfinite(value))
        throw nonfinite_objective_error("objective not finite at the starting point");
    const double start_value = value;

    double step = config.initial_step;
    AscentResult result{std::move(start), value, false, 0};
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        result.iterations = iter;
        for (double g : grad)
            if (!std::isfinite(g))
                throw nonfinite_objective_error("gradient not finite during ascent");
        const double grad_norm = detail::norm2(grad);
        if (grad_norm < config.gradient_tolerance) {
            result.converged = true;
            return result;
        }
        // Line search down the halving ladder, keeping the best rung rather
        // than the first acceptable one: near the optimum true improvements
        // shrink below one ulp of the objective and round to +/- a few ulps,
        // so first-improvement acceptance degenerates into a random walk.
        // Rungs are ranked by objective (with an FP-noise band) and ties
        // broken by gradient norm; the floor at the starting value keeps the
        // returned objective from ever ending below its start.
        const double noise =
            32.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(result.value));
        double best_s = 0.0, best_value = 0.0, best_norm = 0.0;
        std::vector<double> best_point, best_grad;
        int rungs = 0;
        for (double s = step * 4.0; s > 1e-300 && rungs < 160; s *= 0.5, ++rungs) {
            bool unchanged = true;
            for (std::size_t i = 0; i < dim; ++i) {
                trial[i] = result.point[i] + s * grad[i];
                unchanged &= trial[i] == result.point[i];
            }
            if (unchanged) break;  // smaller rungs cannot move the point
            const double trial_value = f(trial, trial_grad);
            if (!std::isfinite(trial_value)) continue;
            const double trial_norm = detail::norm2(trial_grad);
            const bool improves = best_s == 0.0
                                      ? true
                                      : (trial_value > best_value + noise ||
                                         (trial_value >= best_value - noise &&
                                          trial_norm < best_norm));
            if (improves) {
                best_s = s;
                best_value = trial_value;
                best_norm = trial_norm;
                best_point = trial;
                best_grad = trial_grad;
            }
        }
        const bool acceptable =
            best_s != 0.0 &&
            (best_value > result.value ||
             (best_norm < grad_norm && best_value >= result.value - noise &&
              best_value >= start_value));
        if (!acceptable) return result;  // line search exhausted; best point so far
        result.point = std::move(best_point);
        result.value = best_value;
        grad = std::move(best_grad);
        step = best_s;
    }
    result.iterations = config.max_iterations;
    return result;
}

/// Result of a Newton maximization; the Hessian at the solution is kept for
/// covariance estimation downstream.
struct NewtonResult {
    std::vector<double> point;
    std::vector<double> hessian;  // row-major dim x dim at the returned point
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Newton-Raphson maximum-likelihood solver with step halving. F has
/// signature double(const vector<double>& x, vector<double>& grad,
/// vector<double>& hess) filling the gradient and the row-major Hessian.
template <typename F>
NewtonResult newton_raphson_mle(F&& f, std::vector<double> start,
                                const OptimizerConfig& config = {}) {
    config.validate();
    const std::size_t dim = start.size();
    std::vector<double> grad(dim), hess(dim * dim), trial(dim);
    std::vector<double> trial_grad(dim), trial_hess(dim * dim);

    double value = f(start, grad, hess);
    if (!std::isfinite(value))
        throw nonfinite_objective_error("objective not finite at the starting point");
    const double start_value = value;

    NewtonResult result{std::move(start), hess, value, false, 0};
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        result.iterations = iter;
        for (double g : grad)
            if (!std::isfinite(g))
                throw nonfinite_objective_error("gradient not finite during Newton iteration");
        const double grad_norm = detail::norm2(grad);
        if (grad_norm < config.gradient_tolerance) {
            result.converged = true;
            result.hessian = hess;
            return result;
        }
        // Newton direction: solve H d = -g (H is the Hessian of a maximum,
        // so d ascends when H is negative definite). Step halving with the
        // same rounding-tolerant acceptance as the ascent loop.
        std::vector<double> neg_grad(dim);
        for (std::size_t i = 0; i < dim; ++i) neg_grad[i] = -grad[i];
        std::vector<double> direction = detail::solve_linear(hess, neg_grad);

        const double noise =
            32.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(result.value));
        double scale = 1.0;
        bool moved = false;
        while (scale > 1e-12) {
            for (std::size_t i = 0; i < dim; ++i)
                trial[i] = result.point[i] + scale * direction[i];
            const double trial_value = f(trial, trial_grad, trial_hess);
            const bool better =
                std::isfinite(trial_value) &&
                (trial_value > result.value ||
                 (detail::norm2(trial_grad) < grad_norm &&
                  trial_value >= result.value - noise && trial_value >= start_value));
            if (better) {
                result.point = trial;
                result.value = trial_value;
                grad = trial_grad;
                hess = trial_hess;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!moved) {
            result.hessian = hess;
            return result;
        }
    }
    result.iterations = config.max_iterations;
    result.hessian = hess;
    return result;
}

}  // namespace campfin::numerics
