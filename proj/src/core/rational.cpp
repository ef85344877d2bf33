#include "ergolab/core/rational.hpp"

#include "ergolab/core/errors.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ergolab {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// cpp_int reads a leading 0 as an octal prefix.
BigInt decimal_digits(std::string_view s) {
  while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
  return BigInt{std::string(s)};
}

BigInt parse_integer(std::string_view s, std::string_view whole) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) throw ValidationError("", "not a number: '" + std::string(whole) + "'");
  BigInt value = decimal_digits(s);
  return negative ? BigInt(-value) : value;
}

BigInt pow10(int exponent) {
  BigInt result = 1;
  for (int i = 0; i < exponent; ++i) result *= 10;
  return result;
}

Rational parse_decimal(std::string_view s, std::string_view whole, std::optional<int> precision) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  const std::string_view int_part = s.substr(0, dot);
  const std::string_view frac_part = s.substr(dot + 1);
  if ((!int_part.empty() && !all_digits(int_part)) || !all_digits(frac_part)) {
    throw ValidationError("", "not a decimal literal: '" + std::string(whole) + "'");
  }
  const int digits = static_cast<int>(frac_part.size());
  if (precision && digits > *precision) {
    throw ValidationError("precision", "decimal '" + std::string(whole) + "' has " + std::to_string(digits) +
                                           " fractional digits, more than the declared precision " +
                                           std::to_string(*precision));
  }
  const BigInt numerator = decimal_digits(std::string(int_part.empty() ? "0" : int_part) + std::string(frac_part));
  Rational value(numerator, pow10(digits));
  return negative ? Rational(-value) : value;
}

Rational parse_sqrt(std::string_view s, std::string_view whole, std::optional<int> precision) {
  // sqrt(n) or sqrt(n)/m
  const auto close = s.find(')');
  if (close == std::string_view::npos) throw ValidationError("", "unbalanced sqrt in '" + std::string(whole) + "'");
  const BigInt radicand = parse_integer(trim(s.substr(5, close - 5)), whole);
  if (radicand < 0) throw ValidationError("", "negative radicand in '" + std::string(whole) + "'");
  if (!precision) {
    throw ValidationError("precision", "'" + std::string(whole) + "' needs a declared decimal precision");
  }
  const BigInt scale = pow10(*precision);
  const BigInt root = boost::multiprecision::sqrt(BigInt(radicand * scale * scale));
  Rational value(root, scale);
  std::string_view rest = trim(s.substr(close + 1));
  if (rest.empty()) return value;
  if (rest.front() != '/') throw ValidationError("", "unexpected suffix in '" + std::string(whole) + "'");
  const BigInt divisor = parse_integer(trim(rest.substr(1)), whole);
  if (divisor == 0) throw ValidationError("", "division by zero in '" + std::string(whole) + "'");
  // Truncate again so the result keeps the declared number of digits.
  const Rational scaled = value / Rational(divisor) * Rational(scale);
  return Rational(floor_of(scaled), scale);
}

}  // namespace

Rational parse_rational(std::string_view text, std::optional<int> precision) {
  const std::string_view s = trim(text);
  if (s.empty()) throw ValidationError("", "empty number literal");
  if (precision && *precision < 0) throw ValidationError("precision", "precision must be non-negative");
  if (s.rfind("sqrt(", 0) == 0) return parse_sqrt(s, text, precision);
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const BigInt p = parse_integer(trim(s.substr(0, slash)), text);
    const BigInt q = parse_integer(trim(s.substr(slash + 1)), text);
    if (q == 0) throw ValidationError("", "zero denominator in '" + std::string(text) + "'");
    return Rational(p, q);
  }
  if (s.find('.') != std::string_view::npos) return parse_decimal(s, text, precision);
  return Rational(parse_integer(s, text));
}

std::string format_rational(const Rational& value) {
  const BigInt& num = boost::multiprecision::numerator(value);
  const BigInt& den = boost::multiprecision::denominator(value);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

BigInt floor_of(const Rational& value) {
  const BigInt& num = boost::multiprecision::numerator(value);
  const BigInt& den = boost::multiprecision::denominator(value);
  BigInt q = num / den;
  if (num < 0 && q * den != num) q -= 1;
  return q;
}

Rational frac(const Rational& value) {
  if (value >= 0 && value < 1) return value;
  return value - Rational(floor_of(value));
}

double to_double(const Rational& value) { return value.convert_to<double>(); }

bool is_integer(const Rational& value) { return boost::multiprecision::denominator(value) == 1; }

bool is_dyadic(const Rational& value) {
  BigInt den = boost::multiprecision::denominator(value);
  return (den & (den - 1)) == 0;
}

std::int64_t to_int64(const BigInt& value) {
  if (value > std::numeric_limits<std::int64_t>::max() || value < std::numeric_limits<std::int64_t>::min()) {
    throw std::overflow_error("integer does not fit in 64 bits: " + value.str());
  }
  return value.convert_to<std::int64_t>();
}

}  // namespace ergolab
