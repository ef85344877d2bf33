#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ergolab {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Parses an exact number literal.
///
/// Accepted forms: an integer ("-3"), a fraction ("p/q"), a decimal
/// literal ("0.125") and a truncated square root ("sqrt(2)", "sqrt(2)/2").
/// Decimal literals must not carry more fractional digits than `precision`
/// when a precision is declared. Square roots need a declared precision and
/// are truncated to that many decimal digits.
Rational parse_rational(std::string_view text, std::optional<int> precision = std::nullopt);

/// "p/q" with q > 1, or "p" for integers.
std::string format_rational(const Rational& value);

BigInt floor_of(const Rational& value);

/// Representative of value mod 1 in [0, 1).
Rational frac(const Rational& value);

double to_double(const Rational& value);

bool is_integer(const Rational& value);

/// True iff the reduced denominator is a power of two.
bool is_dyadic(const Rational& value);

/// Checked conversion; throws std::overflow_error when out of range.
std::int64_t to_int64(const BigInt& value);

}  // namespace ergolab
