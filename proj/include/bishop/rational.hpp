#pragma once

// Exact integer and rational helpers shared by every module.

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "bishop/error.hpp"

namespace bishop {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

inline BigRational make_rational(const BigInt& num, const BigInt& den) {
  require(den != 0, "zero denominator");
  return BigRational(num, den);
}

inline BigInt numer(const BigRational& r) { return boost::multiprecision::numerator(r); }
inline BigInt denom(const BigRational& r) { return boost::multiprecision::denominator(r); }

inline BigInt floor_of(const BigRational& r) {
  BigInt n = numer(r);
  BigInt d = denom(r);  // always positive
  BigInt q = n / d;     // truncates toward zero
  if (n < 0 && q * d != n) q -= 1;
  return q;
}

/// {r} = r - floor(r), always in [0, 1).
inline BigRational frac_part(const BigRational& r) { return r - BigRational(floor_of(r)); }

inline BigInt pow_int(const BigInt& base, unsigned exponent) {
  return boost::multiprecision::pow(base, exponent);
}

inline BigInt gcd_of(const BigInt& a, const BigInt& b) { return boost::multiprecision::gcd(a, b); }

inline BigInt lcm_of(const BigInt& a, const BigInt& b) {
  if (a == 0 || b == 0) return 0;
  return boost::multiprecision::abs(a / gcd_of(a, b) * b);
}

inline std::size_t bit_length(const BigInt& v) {
  if (v == 0) return 0;
  return boost::multiprecision::msb(boost::multiprecision::abs(v)) + 1;
}

/// Nearest-double conversion accurate to one long-double rounding.
inline double to_double(const BigRational& r) {
  BigInt n = numer(r);
  const BigInt d = denom(r);
  if (n == 0) return 0.0;
  const bool negative = n < 0;
  if (negative) n = -n;
  const long shift = 63 - (static_cast<long>(bit_length(n)) - static_cast<long>(bit_length(d)));
  BigInt q = shift >= 0 ? BigInt((n << shift) / d) : BigInt(n / (d << -shift));
  long extra = 0;
  while (bit_length(q) > 64) {
    q >>= 1;
    ++extra;
  }
  const auto mant = static_cast<unsigned long long>(q);
  const long double v = std::ldexp(static_cast<long double>(mant), static_cast<int>(extra - shift));
  return negative ? -static_cast<double>(v) : static_cast<double>(v);
}

/// Exact rational value of a finite double.
inline BigRational from_double(double x) {
  require(std::isfinite(x), "non-finite value cannot be converted to a rational");
  if (x == 0.0) return BigRational(0);
  int exponent = 0;
  const double mant = std::frexp(x, &exponent);  // x = mant * 2^exponent, |mant| in [0.5, 1)
  const auto scaled = static_cast<long long>(std::ldexp(mant, 53));
  exponent -= 53;
  BigInt n(scaled);
  if (exponent >= 0) return BigRational(n << exponent);
  return BigRational(n, BigInt(1) << -exponent);
}

namespace detail {

inline BigInt parse_digits(std::string_view s) {
  BigInt v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace detail

/// Parses an unsigned decimal literal `ddd[.ddd][(e|E)[+-]ddd]` exactly.
/// Returns false when `text` is not entirely such a literal.
inline bool try_parse_decimal(std::string_view text, BigRational& out) {
  std::size_t i = 0;
  const auto digits_from = [&](std::size_t start) {
    std::size_t j = start;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    return j;
  };
  std::size_t int_end = digits_from(0);
  std::string_view int_part = text.substr(0, int_end);
  i = int_end;
  std::string_view frac_digits;
  if (i < text.size() && text[i] == '.') {
    const std::size_t frac_end = digits_from(i + 1);
    frac_digits = text.substr(i + 1, frac_end - i - 1);
    i = frac_end;
  }
  if (int_part.empty() && frac_digits.empty()) return false;
  long exponent = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    std::size_t j = i + 1;
    bool neg = false;
    if (j < text.size() && (text[j] == '+' || text[j] == '-')) neg = text[j++] == '-';
    const std::size_t exp_end = digits_from(j);
    if (exp_end == j || exp_end - j > 6) return false;
    exponent = std::stol(std::string(text.substr(j, exp_end - j)));
    if (neg) exponent = -exponent;
    i = exp_end;
  }
  if (i != text.size()) return false;
  BigInt mantissa = detail::parse_digits(std::string(int_part) + std::string(frac_digits));
  exponent -= static_cast<long>(frac_digits.size());
  const BigInt scale = pow_int(BigInt(10), static_cast<unsigned>(exponent < 0 ? -exponent : exponent));
  out = exponent >= 0 ? BigRational(mantissa * scale) : BigRational(mantissa, scale);
  return true;
}

/// Parses `[-]decimal` or `[-]decimal/decimal` exactly (e.g. "355/113", "0.25").
inline BigRational parse_rational(std::string_view text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  bool negative = false;
  std::string_view body(s);
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  const auto slash = body.find('/');
  BigRational value;
  if (slash == std::string_view::npos) {
    if (!try_parse_decimal(body, value)) throw PreconditionError("not a number: '" + std::string(text) + "'");
  } else {
    BigRational a, b;
    if (!try_parse_decimal(body.substr(0, slash), a) || !try_parse_decimal(body.substr(slash + 1), b))
      throw PreconditionError("not a fraction: '" + std::string(text) + "'");
    require(b != 0, "zero denominator in '" + std::string(text) + "'");
    value = a / b;
  }
  return negative ? BigRational(-value) : value;
}

inline std::string to_string(const BigInt& v) { return v.str(); }

inline std::string to_string(const BigRational& r) {
  if (denom(r) == 1) return numer(r).str();
  return numer(r).str() + "/" + denom(r).str();
}

}  // namespace bishop
