#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "campfin/money.hpp"

namespace campfin::stats {

/// Descriptive statistics for one donation set. Min/max/total are exact
/// integer cents; mean and standard deviation are currency-unit reals.
struct DescriptiveStats {
    std::optional<Cents> min;
    std::optional<Cents> max;
    double mean = 0.0;
    double std_dev = 0.0;
    std::size_t n = 0;
    Cents total = 0;
};

/// Sample (n-1 denominator) descriptive statistics. Empty input yields n=0
/// with absent min/max.
inline DescriptiveStats describe(std::span<const Cents> amounts) {
    DescriptiveStats s;
    s.n = amounts.size();
    if (amounts.empty()) return s;
    Cents mn = amounts[0], mx = amounts[0], total = 0;
    for (Cents a : amounts) {
        mn = std::min(mn, a);
        mx = std::max(mx, a);
        total += a;
    }
    s.min = mn;
    s.max = mx;
    s.total = total;
    s.mean = money::to_currency(total) / static_cast<double>(s.n);
    if (s.n >= 2) {
        double ss = 0.0;
        for (Cents a : amounts) {
            const double d = money::to_currency(a) - s.mean;
            ss += d * d;
        }
        s.std_dev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

struct CurvePoint {
    double log_amount = 0.0;  // natural log of the currency amount
    double fraction = 0.0;    // cumulative fraction <= amount
};

/// Empirical cumulative curve over log-amounts: one point per distinct
/// amount, fractions nondecreasing and ending exactly at 1.
inline std::vector<CurvePoint> cumulative_curve(std::span<const Cents> amounts) {
    if (amounts.empty()) throw std::domain_error("cumulative_curve: empty input");
    std::vector<Cents> sorted(amounts.begin(), amounts.end());
    for (Cents a : sorted)
        if (a <= 0) throw std::domain_error("cumulative_curve: amounts must be positive");
    std::sort(sorted.begin(), sorted.end());
    std::vector<CurvePoint> curve;
    curve.reserve(sorted.size());
    const double n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;  // keep last of ties
        const double fraction =
            (i + 1 == sorted.size()) ? 1.0 : static_cast<double>(i + 1) / n;
        curve.push_back({std::log(money::to_currency(sorted[i])), fraction});
    }
    return curve;
}

}  // namespace campfin::stats
