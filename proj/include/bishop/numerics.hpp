#pragma once

// Exact rotation arithmetic {x + n*alpha}, midpoint quadrature for L^p
// norms, and sampled Lebesgue measure on [0, 1].

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bishop/error.hpp"
#include "bishop/expr.hpp"
#include "bishop/rational.hpp"

namespace bishop {

/// Working precision (bits) for irrational parameters supplied as decimals or
/// by name. Read from BISHOP_PRECISION_BITS, default 256.
inline int precision_bits() {
  if (const char* env = std::getenv("BISHOP_PRECISION_BITS")) {
    const int bits = std::atoi(env);
    require(bits >= 32 && bits <= 1 << 20, "BISHOP_PRECISION_BITS must lie in [32, 2^20]");
    return bits;
  }
  return 256;
}

/// The rotation parameter: an exact rational r/q, or a continued-fraction
/// truncation [0; a_1, ..., a_L] carrying its exact value p_L/q_L.
class AlphaValue {
 public:
  AlphaValue() : value_(0) {}

  static AlphaValue rational(const BigRational& v) {
    require(v >= 0 && v <= 1, "alpha must lie in [0, 1], got " + bishop::to_string(v));
    AlphaValue a;
    a.value_ = v;
    return a;
  }

  static AlphaValue rational(const BigInt& numerator, const BigInt& denominator) {
    return rational(make_rational(numerator, denominator));
  }

  static AlphaValue continued_fraction(std::vector<BigInt> quotients) {
    require(!quotients.empty(), "continued fraction needs at least one partial quotient");
    for (const auto& a : quotients) require(a >= 1, "partial quotients must be >= 1");
    // Backward evaluation of [0; a_1, ..., a_L].
    BigRational v(0);
    for (auto it = quotients.rbegin(); it != quotients.rend(); ++it) v = BigRational(1) / (BigRational(*it) + v);
    AlphaValue a;
    a.value_ = v;
    a.quotients_ = std::move(quotients);
    return a;
  }

  bool is_truncation() const noexcept { return !quotients_.empty(); }
  const BigRational& value() const noexcept { return value_; }
  BigInt numerator() const { return numer(value_); }
  BigInt denominator() const { return denom(value_); }
  const std::vector<BigInt>& partial_quotients() const noexcept { return quotients_; }
  double to_double() const { return bishop::to_double(value_); }

  std::string to_string() const {
    if (!is_truncation()) return bishop::to_string(value_);
    std::string s = "[0; ";
    for (std::size_t i = 0; i < quotients_.size(); ++i) s += (i ? ", " : "") + quotients_[i].str();
    return s + "]";
  }

 private:
  BigRational value_;
  std::vector<BigInt> quotients_;
};

/// x_j = (offset + stride*j) / denominator, j < count.
struct PointLattice {
  BigInt offset;
  BigInt stride;
  BigInt denominator;
  std::size_t count = 0;

  static PointLattice single(const BigRational& x) { return {numer(x), 0, denom(x), 1}; }
};

/// Midpoint sampling x_j = (j + 1/2)/N of [0, 1).
class GridSpec {
 public:
  explicit GridSpec(std::size_t n) : n_(n) { require(n >= 2, "grid needs N >= 2"); }

  std::size_t size() const noexcept { return n_; }
  double point(std::size_t j) const { return (static_cast<double>(j) + 0.5) / static_cast<double>(n_); }
  double spacing() const { return 1.0 / static_cast<double>(n_); }

  std::vector<double> points() const {
    std::vector<double> xs(n_);
    for (std::size_t j = 0; j < n_; ++j) xs[j] = point(j);
    return xs;
  }

  PointLattice lattice() const { return {1, 2, BigInt(2) * n_, n_}; }
  GridSpec refined(std::size_t factor = 2) const { return GridSpec(n_ * factor); }

 private:
  std::size_t n_;
};

namespace detail {

using u128 = unsigned __int128;

inline u128 to_u128(const BigInt& v) {
  u128 r = 0;
  for (int shift = 0; shift < 128; shift += 64) {
    const BigInt part = (v >> shift) & BigInt(std::numeric_limits<std::uint64_t>::max());
    r |= static_cast<u128>(static_cast<std::uint64_t>(part)) << shift;
  }
  return r;
}

inline BigInt mod_nonneg(const BigInt& a, const BigInt& m) {
  BigInt r = a % m;
  if (r < 0) r += m;
  return r;
}

inline double residue_to_double(u128 r, u128 d) {
  return static_cast<double>(static_cast<long double>(r) / static_cast<long double>(d));
}

inline double residue_to_double(const BigInt& r, const BigInt& d) { return to_double(BigRational(r, d)); }

template <class Int, class Visitor>
void walk_impl(const Int& denominator, std::vector<Int> start, const Int& increment, std::size_t steps,
               Visitor& visit) {
  for (std::size_t j = 0; j < start.size(); ++j) {
    Int r = start[j];
    for (std::size_t k = 0;; ++k) {
      visit(j, k, residue_to_double(r, denominator));
      if (k == steps) break;
      r += increment;
      if (r >= denominator) r -= denominator;
    }
  }
}

}  // namespace detail

/// Visits y(j, k) = {x_j + k*step} for every lattice point j (outer loop) and
/// k = 0..steps (inner loop). Positions are tracked as exact residues modulo
/// a common denominator and rounded to double once per visit.
template <class Visitor>
void walk_orbits(const PointLattice& base, const BigRational& step, std::size_t steps, Visitor&& visit) {
  const BigInt d = lcm_of(base.denominator, denom(step));
  const BigInt base_scale = d / base.denominator;
  const BigInt step_scale = d / denom(step);
  const BigInt increment = detail::mod_nonneg(numer(step) * step_scale, d);
  const auto start_of = [&](std::size_t j) {
    return detail::mod_nonneg((base.offset + base.stride * j) * base_scale, d);
  };
  if (bit_length(d) <= 120) {
    std::vector<detail::u128> start(base.count);
    for (std::size_t j = 0; j < base.count; ++j) start[j] = detail::to_u128(start_of(j));
    detail::walk_impl(detail::to_u128(d), std::move(start), detail::to_u128(increment), steps, visit);
  } else {
    std::vector<BigInt> start(base.count);
    for (std::size_t j = 0; j < base.count; ++j) start[j] = start_of(j);
    detail::walk_impl(d, std::move(start), increment, steps, visit);
  }
}

/// {x + n*alpha} computed exactly, rounded once.
inline double frac_shift(const BigRational& x, long long n, const AlphaValue& alpha) {
  return to_double(frac_part(x + BigRational(n) * alpha.value()));
}

/// Composite midpoint estimate of ||f||_p from grid samples.
inline double lp_norm(std::span<const Complex> samples, double p) {
  require(p > 1.0 && std::isfinite(p), "L^p exponent must satisfy 1 < p < inf");
  require(!samples.empty(), "no samples");
  double acc = 0.0;
  if (p == 2.0) {
    for (const auto& v : samples) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw NumericalError("non-finite sample");
      acc += std::norm(v);
    }
    return std::sqrt(acc / static_cast<double>(samples.size()));
  }
  for (const auto& v : samples) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw NumericalError("non-finite sample");
    acc += std::pow(std::abs(v), p);
  }
  return std::pow(acc / static_cast<double>(samples.size()), 1.0 / p);
}

inline std::vector<Complex> sample(const FuncExpr& f, const GridSpec& grid) {
  std::vector<Complex> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = f(grid.point(j));
  return out;
}

struct MeasureEstimate {
  double value = 0.0;
  double tolerance = 0.0;  // (#breakpoints + 2)/N
};

/// Fraction of samples with a positive real part.
inline MeasureEstimate measure_positive_real(std::span<const Complex> samples, std::size_t breakpoints = 0) {
  require(!samples.empty(), "no samples");
  std::size_t count = 0;
  for (const auto& v : samples)
    if (v.real() > 0.0) ++count;
  const double n = static_cast<double>(samples.size());
  return {static_cast<double>(count) / n, (static_cast<double>(breakpoints) + 2.0) / n};
}

inline MeasureEstimate measure_positive_real(const FuncExpr& f, const GridSpec& grid, std::size_t breakpoints = 0) {
  const auto s = sample(f, grid);
  return measure_positive_real(s, breakpoints);
}

/// Fraction of samples for which `pred` holds, with the same error budget.
template <class Pred>
MeasureEstimate measure_where(std::span<const Complex> samples, Pred pred, std::size_t breakpoints = 0) {
  std::size_t count = 0;
  for (const auto& v : samples)
    if (pred(v)) ++count;
  const double n = static_cast<double>(samples.size());
  return {static_cast<double>(count) / n, (static_cast<double>(breakpoints) + 2.0) / n};
}

}  // namespace bishop
