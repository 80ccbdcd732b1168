#pragma once

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace campfin {

/// Monetary amounts are integer cents throughout. Doubles appear only in
/// derived statistics (means, likelihoods), never in ledger arithmetic.
using Cents = std::int64_t;

namespace money {

/// Parse a decimal currency string ("1234,56" or "1234.56" depending on the
/// separator) into integer cents with no floating-point round trip.
/// Accepts at most two fractional digits; rejects signs, exponents and
/// thousands separators. Returns nullopt on any malformation or overflow.
inline std::optional<Cents> parse_decimal_cents(std::string_view text,
                                                char decimal_separator) {
    // trim ASCII whitespace
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
        text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
        text.remove_suffix(1);
    if (text.empty()) return std::nullopt;

    constexpr Cents kMax = INT64_MAX / 100 - 1;
    Cents units = 0;
    std::size_t i = 0;
    bool any_digit = false;
    for (; i < text.size() && text[i] != decimal_separator; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
        units = units * 10 + (text[i] - '0');
        if (units > kMax) return std::nullopt;
        any_digit = true;
    }
    Cents frac = 0;
    if (i < text.size()) {  // saw the separator
        ++i;
        std::size_t digits = 0;
        for (; i < text.size(); ++i, ++digits) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
            if (digits >= 2) return std::nullopt;  // sub-cent precision rejected
            frac = frac * 10 + (text[i] - '0');
            any_digit = true;
        }
        if (digits == 1) frac *= 10;
    }
    if (!any_digit) return std::nullopt;
    return units * 100 + frac;
}

/// Render cents as a fixed two-decimal currency string with '.' separator
/// ("35050" -> "350.50"). Output format for reports, not for re-ingestion.
inline std::string format_cents(Cents cents) {
    const bool neg = cents < 0;
    std::uint64_t v = neg ? static_cast<std::uint64_t>(-(cents + 1)) + 1
                          : static_cast<std::uint64_t>(cents);
    std::string digits = std::to_string(v);
    if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
    digits.insert(digits.size() - 2, 1, '.');
    if (neg) digits.insert(0, 1, '-');
    return digits;
}

/// Currency value of a cent amount, for statistics on amounts.
inline double to_currency(Cents cents) { return static_cast<double>(cents) / 100.0; }

}  // namespace money
}  // namespace campfin
