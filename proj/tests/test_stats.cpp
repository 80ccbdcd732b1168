#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "campfin/stats.hpp"

using namespace campfin;

TEST_CASE("describe: forced small example", "[stats]") {
    const std::vector<Cents> amounts{100, 200, 300};  // R$ 1.00, 2.00, 3.00
    const auto s = stats::describe(amounts);
    CHECK(s.n == 3);
    CHECK(s.min == Cents{100});
    CHECK(s.max == Cents{300});
    CHECK(s.total == Cents{600});
    CHECK(s.mean == Approx(2.0));
    CHECK(s.std_dev == Approx(1.0));  // sample std of {1,2,3}
}

TEST_CASE("describe: empty and single inputs", "[stats]") {
    const auto empty = stats::describe({});
    CHECK(empty.n == 0);
    CHECK_FALSE(empty.min);
    CHECK_FALSE(empty.max);
    CHECK(empty.total == 0);

    const std::vector<Cents> one{250};
    const auto s = stats::describe(one);
    CHECK(s.n == 1);
    CHECK(s.min == Cents{250});
    CHECK(s.max == Cents{250});
    CHECK(s.std_dev == 0.0);
    CHECK(s.mean == Approx(2.5));
}

TEST_CASE("describe invariants: bounds, total, permutation", "[stats]") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<Cents> amount(1, 5'000'000);
    std::uniform_int_distribution<int> size(1, 200);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Cents> amounts(size(rng));
        for (auto& a : amounts) a = amount(rng);
        const auto s = stats::describe(amounts);
        CHECK(money::to_currency(*s.min) <= s.mean + 1e-9);
        CHECK(s.mean <= money::to_currency(*s.max) + 1e-9);
        CHECK(s.mean * static_cast<double>(s.n) ==
              Approx(money::to_currency(s.total)).margin(1e-6));
        CHECK(s.std_dev >= 0.0);

        auto shuffled = amounts;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto s2 = stats::describe(shuffled);
        CHECK(s2.min == s.min);
        CHECK(s2.max == s.max);
        CHECK(s2.total == s.total);
        CHECK(s2.mean == s.mean);
        CHECK(s2.std_dev == Approx(s.std_dev).margin(1e-12));
    }
}

TEST_CASE("totals and counts are additive across a partition", "[stats]") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<Cents> amount(1, 900'000);
    std::vector<Cents> all(300);
    for (auto& a : all) a = amount(rng);
    // partition into 3 parts
    std::vector<Cents> parts[3];
    for (std::size_t i = 0; i < all.size(); ++i) parts[i % 3].push_back(all[i]);
    const auto s_all = stats::describe(all);
    Cents total = 0;
    std::size_t n = 0;
    for (const auto& part : parts) {
        const auto s = stats::describe(part);
        total += s.total;
        n += s.n;
    }
    CHECK(total == s_all.total);
    CHECK(n == s_all.n);
}

TEST_CASE("cumulative curve: forced examples", "[stats]") {
    const std::vector<Cents> single{1000};  // R$ 10
    const auto c1 = stats::cumulative_curve(single);
    REQUIRE(c1.size() == 1);
    CHECK(c1[0].log_amount == Approx(std::log(10.0)));
    CHECK(c1[0].fraction == 1.0);

    const std::vector<Cents> three{100, 1000, 10000};  // R$ 1, 10, 100
    const auto c3 = stats::cumulative_curve(three);
    REQUIRE(c3.size() == 3);
    CHECK(c3[0].fraction == Approx(1.0 / 3.0));
    CHECK(c3[1].fraction == Approx(2.0 / 3.0));
    CHECK(c3[2].fraction == 1.0);
    CHECK(c3[0].log_amount == Approx(0.0).margin(1e-12));
    CHECK(c3[2].log_amount == Approx(std::log(100.0)));
}

TEST_CASE("cumulative curve: monotone, ends at one, rejects bad input", "[stats]") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<Cents> amount(1, 100'000);
    std::vector<Cents> amounts(500);
    for (auto& a : amounts) a = amount(rng);
    const auto curve = stats::cumulative_curve(amounts);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].fraction >= curve[i - 1].fraction);
        CHECK(curve[i].log_amount > curve[i - 1].log_amount);
    }
    CHECK(curve.back().fraction == 1.0);

    CHECK_THROWS_AS(stats::cumulative_curve({}), std::domain_error);
    CHECK_THROWS_AS(stats::cumulative_curve(std::vector<Cents>{10, 0}), std::domain_error);
    CHECK_THROWS_AS(stats::cumulative_curve(std::vector<Cents>{-5}), std::domain_error);
}

TEST_CASE("cumulative curve spans the full order-of-magnitude range", "[stats]") {
    // endpoints like the headline set: 1.00 up to 14,000,000.00
    const std::vector<Cents> amounts{100, 5'000, 1'234'567, 1'400'000'000};
    const auto curve = stats::cumulative_curve(amounts);
    CHECK(curve.front().log_amount == Approx(std::log(1.0)).margin(1e-12));
    CHECK(curve.back().log_amount == Approx(std::log(14'000'000.0)));
    CHECK(curve.back().log_amount - curve.front().log_amount >
          7.0 * std::log(10.0) - 1e-9);  // seven decades
}
