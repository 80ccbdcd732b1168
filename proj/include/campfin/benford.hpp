#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "campfin/money.hpp"
#include "campfin/numerics.hpp"

namespace campfin::benford {

/// First-significant-digit counts for one set of amounts.
struct DigitHistogram {
    std::array<std::uint64_t, 9> counts{};  // indexed by digit-1

    std::uint64_t n() const {
        std::uint64_t total = 0;
        for (auto c : counts) total += c;
        return total;
    }
};

/// Benford expectation P(d) = log10(1 + 1/d) for d = 1..9.
inline std::array<double, 9> benford_expected() {
    std::array<double, 9> p{};
    for (int d = 1; d <= 9; ++d) p[d - 1] = std::log10(1.0 + 1.0 / d);
    return p;
}

/// Leading nonzero decimal digit of a positive amount. Works on the decimal
/// cents integer, so scale shifts by powers of ten cannot perturb it and no
/// binary floating point is involved.
inline int first_digit(Cents amount) {
    if (amount < 1) throw std::domain_error("first_digit: amount must be >= 1 cent");
    while (amount >= 10) amount /= 10;
    return static_cast<int>(amount);
}

inline DigitHistogram digit_histogram(std::span<const Cents> amounts) {
    DigitHistogram h;
    for (Cents a : amounts) ++h.counts[first_digit(a) - 1];
    return h;
}

struct Chi2Result {
    double chi2 = 0.0;
    double p_value = 1.0;
};

/// Pearson conformance statistic against the Benford expectation, written as
/// N * sum((O_i - E_i)^2 / E_i) over digit proportions, with its survival
/// probability at 8 degrees of freedom (9 digit classes minus 1).
inline Chi2Result chi2_benford(const DigitHistogram& histogram) {
    const std::uint64_t n = histogram.n();
    if (n == 0) throw std::domain_error("chi2_benford: empty histogram");
    const auto expected = benford_expected();
    double chi2 = 0.0;
    for (int d = 0; d < 9; ++d) {
        const double observed = static_cast<double>(histogram.counts[d]) / static_cast<double>(n);
        const double diff = observed - expected[d];
        chi2 += diff * diff / expected[d];
    }
    chi2 *= static_cast<double>(n);
    return {chi2, numerics::chi2_sf(chi2, 8)};
}

/// A complete Benford conformance test for one labeled set.
struct BenfordTest {
    DigitHistogram histogram;
    std::array<double, 9> proportions{};
    double chi2 = 0.0;
    double p_value = 1.0;
    std::string set_label;
};

/// Run the Benford test on a set of amounts, or return nothing when the set
/// is smaller than min_n elements (default 21: sets of more than 20).
inline std::optional<BenfordTest> test_set(std::span<const Cents> amounts,
                                           std::string label, std::uint64_t min_n = 21) {
    if (amounts.size() < min_n) return std::nullopt;
    BenfordTest test;
    test.histogram = digit_histogram(amounts);
    const double n = static_cast<double>(amounts.size());
    for (int d = 0; d < 9; ++d)
        test.proportions[d] = static_cast<double>(test.histogram.counts[d]) / n;
    const Chi2Result r = chi2_benford(test.histogram);
    test.chi2 = r.chi2;
    test.p_value = r.p_value;
    test.set_label = std::move(label);
    return test;
}

}  // namespace campfin::benford
