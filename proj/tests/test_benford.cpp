#include <catch2/catch.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "campfin/benford.hpp"

using namespace campfin;

TEST_CASE("benford expectation matches the canonical three-decimal values", "[benford]") {
    const auto p = benford::benford_expected();
    const std::array<double, 9> rounded_expected{0.301, 0.176, 0.125, 0.097, 0.079,
                                                 0.067, 0.058, 0.051, 0.046};
    double sum = 0.0;
    for (int d = 1; d <= 9; ++d) {
        CHECK(p[d - 1] == Approx(std::log10(1.0 + 1.0 / d)).margin(1e-15));
        CHECK(std::round(p[d - 1] * 1000.0) / 1000.0 == Approx(rounded_expected[d - 1]));
        sum += p[d - 1];
    }
    CHECK(sum == Approx(1.0).margin(1e-12));  // telescoping log sum
}

TEST_CASE("first digit from the decimal cents integer", "[benford]") {
    CHECK(benford::first_digit(156) == 1);         // R$ 1.56
    CHECK(benford::first_digit(2) == 2);           // R$ 0.02
    CHECK(benford::first_digit(1'400'000'000) == 1);  // R$ 14,000,000.00
    CHECK(benford::first_digit(1) == 1);
    CHECK(benford::first_digit(999) == 9);
    CHECK_THROWS_AS(benford::first_digit(0), std::domain_error);
    CHECK_THROWS_AS(benford::first_digit(-5), std::domain_error);
}

TEST_CASE("digit extraction is invariant under decimal rescaling", "[benford]") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<Cents> amount(1, 2'000'000'000 / 10);
    for (int i = 0; i < 2000; ++i) {
        const Cents c = amount(rng);
        CHECK(benford::first_digit(c) == benford::first_digit(c * 10));
    }
}

TEST_CASE("chi2 of an exactly Benford histogram is zero", "[benford]") {
    // counts proportional to the expectation cannot be integral for every
    // digit, so feed the proportions through a large common multiple
    const auto p = benford::benford_expected();
    benford::DigitHistogram h;
    const double scale = 1e9;
    for (int d = 0; d < 9; ++d)
        h.counts[d] = static_cast<std::uint64_t>(std::round(p[d] * scale));
    const auto r = benford::chi2_benford(h);
    CHECK(r.chi2 == Approx(0.0).margin(1e-3));
    CHECK(r.p_value == Approx(1.0).margin(1e-6));
}

TEST_CASE("chi2 anchor: the PSTU-CPF digit counts", "[benford]") {
    // counts recovering the printed proportions (0.546, 0.102, ...) at n=108
    benford::DigitHistogram h;
    h.counts = {59, 11, 15, 8, 9, 3, 1, 0, 2};
    REQUIRE(h.n() == 108);
    const auto r = benford::chi2_benford(h);
    CHECK(r.chi2 == Approx(39.909).margin(0.05));
    CHECK(r.p_value < 5e-4);
}

TEST_CASE("chi2 for an all-ones set equals the direct formula", "[benford]") {
    // 33 amounts, every first digit 1: chi2 = 33*((1-E1)^2/E1 + sum_{d>=2} E_d)
    const auto e = benford::benford_expected();
    double direct = (1.0 - e[0]) * (1.0 - e[0]) / e[0];
    for (int d = 1; d < 9; ++d) direct += e[d];
    direct *= 33.0;

    std::vector<Cents> amounts(33, 100);
    const auto h = benford::digit_histogram(amounts);
    const auto r = benford::chi2_benford(h);
    CHECK(r.chi2 == Approx(direct).margin(1e-10));
}

TEST_CASE("proportions-form chi2 equals the classical count-based Pearson statistic",
          "[benford]") {
    // N * sum((O-E)^2/E) over proportions == sum((c - N*E)^2 / (N*E)) over counts
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<std::uint64_t> count(0, 400);
    const auto e = benford::benford_expected();
    for (int trial = 0; trial < 25; ++trial) {
        benford::DigitHistogram h;
        for (int d = 0; d < 9; ++d) h.counts[d] = count(rng);
        if (h.n() == 0) h.counts[0] = 1;
        const double n = static_cast<double>(h.n());
        double pearson = 0.0;
        for (int d = 0; d < 9; ++d) {
            const double expected_count = n * e[d];
            const double diff = static_cast<double>(h.counts[d]) - expected_count;
            pearson += diff * diff / expected_count;
        }
        CHECK(benford::chi2_benford(h).chi2 == Approx(pearson).epsilon(1e-12));
    }
}

TEST_CASE("chi2 is permutation invariant", "[benford]") {
    std::vector<Cents> amounts{156, 2, 99, 1'400'000'000, 73, 511, 8'000, 31, 22, 901,
                               45,  6, 77, 123,           88, 19,  303,   64, 50, 17, 29};
    auto shuffled = amounts;
    std::mt19937_64 rng(3);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto a = benford::chi2_benford(benford::digit_histogram(amounts));
    const auto b = benford::chi2_benford(benford::digit_histogram(shuffled));
    CHECK(a.chi2 == b.chi2);
    CHECK(a.p_value == b.p_value);
}

TEST_CASE("test_set honors the more-than-20 threshold", "[benford]") {
    std::vector<Cents> twenty(20, 123);
    std::vector<Cents> twenty_one(21, 123);
    CHECK_FALSE(benford::test_set(twenty, "too small"));
    const auto present = benford::test_set(twenty_one, "boundary");
    REQUIRE(present);
    CHECK(present->set_label == "boundary");
    CHECK(present->histogram.n() == 21);
    // override of the default threshold
    CHECK(benford::test_set(twenty, "relaxed", 20));
    CHECK_FALSE(benford::test_set(std::vector<Cents>(49, 5), "strict", 50));
}

TEST_CASE("p-values are uniform for truly Benford sets", "[benford][slow]") {
    // 1000 simulated sets of n=500 drawn from the Benford digit law itself;
    // the rejection rate at 5% must sit near 5%
    const auto p = benford::benford_expected();
    std::array<double, 9> cumulative{};
    double acc = 0.0;
    for (int d = 0; d < 9; ++d) {
        acc += p[d];
        cumulative[d] = acc;
    }
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int below_05 = 0;
    const int kTrials = 1000;
    for (int t = 0; t < kTrials; ++t) {
        benford::DigitHistogram h;
        for (int i = 0; i < 500; ++i) {
            const double u = unit(rng);
            int digit = 0;
            while (digit < 8 && u > cumulative[digit]) ++digit;
            ++h.counts[digit];
        }
        if (benford::chi2_benford(h).p_value < 0.05) ++below_05;
    }
    const double rate = static_cast<double>(below_05) / kTrials;
    CHECK(rate >= 0.03);
    CHECK(rate <= 0.08);
}

TEST_CASE("p-value decreases as chi2 grows", "[benford]") {
    double prev = 1.0;
    for (double chi2 = 0.5; chi2 < 80.0; chi2 += 1.3) {
        const double p = numerics::chi2_sf(chi2, 8);
        CHECK(p < prev);
        prev = p;
    }
}
