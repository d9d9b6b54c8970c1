#pragma once

// Continued fractions with big-integer convergents, Dirichlet and Liouville
// checks, and the gap condition q_{n+1} > psi(q_n).

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bishop/error.hpp"
#include "bishop/expr.hpp"
#include "bishop/numerics.hpp"
#include "bishop/rational.hpp"

namespace bishop {

/// [0; a_1, ..., a_L] with convergents p_n/q_n for n = -1..L.
class ContinuedFraction {
 public:
  ContinuedFraction() : p_{1, 0}, q_{0, 1} {}

  explicit ContinuedFraction(const std::vector<BigInt>& quotients) : ContinuedFraction() {
    for (const auto& a : quotients) push_back(a);
  }

  void push_back(const BigInt& a) {
    require(a >= 1, "partial quotients must be >= 1, got " + a.str());
    quotients_.push_back(a);
    const std::size_t m = p_.size();
    p_.push_back(a * p_[m - 1] + p_[m - 2]);
    q_.push_back(a * q_[m - 1] + q_[m - 2]);
  }

  /// Number of partial quotients L.
  std::size_t length() const noexcept { return quotients_.size(); }
  const std::vector<BigInt>& quotients() const noexcept { return quotients_; }

  /// a_n for 1 <= n <= L.
  const BigInt& a(std::size_t n) const { return quotients_.at(n - 1); }
  /// p_n, q_n for -1 <= n <= L.
  const BigInt& p(long n) const { return p_.at(static_cast<std::size_t>(n + 1)); }
  const BigInt& q(long n) const { return q_.at(static_cast<std::size_t>(n + 1)); }

  BigRational convergent(long n) const { return BigRational(p(n), q(n)); }
  BigRational value() const { return convergent(static_cast<long>(length())); }

  AlphaValue alpha() const {
    require(!quotients_.empty(), "empty continued fraction");
    return AlphaValue::continued_fraction(quotients_);
  }

  /// Recurrence, coprimality, determinant identity and growth of q_n, all
  /// checked exactly. Returns an empty string when every check holds.
  std::string verify_invariants() const {
    for (long n = 1; n <= static_cast<long>(length()); ++n) {
      const BigInt& an = a(static_cast<std::size_t>(n));
      if (p(n) != an * p(n - 1) + p(n - 2) || q(n) != an * q(n - 1) + q(n - 2))
        return "recurrence fails at n = " + std::to_string(n);
      const BigInt sign = (n - 1) % 2 == 0 ? 1 : -1;
      if (p(n) * q(n - 1) - p(n - 1) * q(n) != sign) return "determinant identity fails at n = " + std::to_string(n);
      // The identity above is a Bezout certificate for gcd(p_n, q_n) = 1; the
      // direct gcd is only recomputed where it is cheap.
      if (bit_length(q(n)) <= 4096 && gcd_of(p(n), q(n)) != 1)
        return "p_n, q_n not coprime at n = " + std::to_string(n);
      if (q(n) < q(n - 1)) return "q_n decreases at n = " + std::to_string(n);
      if (n >= 2 && q(n) <= q(n - 1)) return "q_n not strictly increasing at n = " + std::to_string(n);
    }
    return {};
  }

  /// Quotients with the implied a_0 = 0 in front, as decimal strings.
  std::vector<std::string> to_strings() const {
    std::vector<std::string> out{"0"};
    for (const auto& a : quotients_) out.push_back(a.str());
    return out;
  }

 private:
  std::vector<BigInt> quotients_;
  std::vector<BigInt> p_;  // p_[n + 1] = p_n
  std::vector<BigInt> q_;
};

/// Expansion of an exact rational in (0, 1); stops early when it terminates.
inline ContinuedFraction cf_expand(const BigRational& alpha, std::size_t depth) {
  require(alpha > 0 && alpha < 1, "cf_expand needs 0 < alpha < 1, got " + to_string(alpha));
  require(depth >= 1, "depth must be >= 1");
  ContinuedFraction cf;
  BigRational xi = alpha;
  while (cf.length() < depth && xi != 0) {
    const BigRational inv = 1 / xi;
    const BigInt a = floor_of(inv);
    cf.push_back(a);
    xi = inv - BigRational(a);
  }
  return cf;
}

/// Expansion of every number in the open interval (lo, hi) at once. Quotients
/// are emitted only while all points of the interval agree on them; when fewer
/// than `depth` are certain and `allow_short` is false, the expansion fails.
inline ContinuedFraction cf_expand_interval(BigRational lo, BigRational hi, std::size_t depth,
                                            bool allow_short = false) {
  require(lo > 0 && hi < 1 && lo < hi, "cf_expand_interval needs 0 < lo < hi < 1");
  require(depth >= 1, "depth must be >= 1");
  ContinuedFraction cf;
  while (cf.length() < depth) {
    if (lo <= 0) break;
    const BigRational inv_hi = 1 / hi;
    const BigRational inv_lo = 1 / lo;
    const BigInt a = floor_of(inv_hi);
    if (a < 1 || inv_lo > BigRational(a + 1)) break;
    cf.push_back(a);
    const BigRational new_lo = inv_hi - BigRational(a);
    const BigRational new_hi = inv_lo - BigRational(a);
    if (new_hi >= 1) break;
    lo = new_lo;
    hi = new_hi;
  }
  if (cf.length() < depth && !allow_short)
    throw NumericalError("precision exhausted after " + std::to_string(cf.length()) + " of " +
                         std::to_string(depth) + " partial quotients; raise BISHOP_PRECISION_BITS");
  return cf;
}

/// floor(sqrt(v)) for v >= 0.
inline BigInt isqrt(const BigInt& v) {
  require(v >= 0, "isqrt of a negative number");
  return boost::multiprecision::sqrt(v);
}

/// Interval of width 2^-bits enclosing (sqrt(k) - c)/d.
inline std::pair<BigRational, BigRational> quadratic_surd_interval(unsigned k, long c, long d, int bits) {
  const BigInt scale = BigInt(1) << bits;
  const BigInt s = isqrt(BigInt(k) * scale * scale);  // s <= sqrt(k)*2^bits < s + 1
  const BigRational lo = (BigRational(s, scale) - c) / d;
  const BigRational hi = (BigRational(s + 1, scale) - c) / d;
  return {lo, hi};
}

/// (sqrt 5 - 1)/2 enclosed at `bits` of precision.
inline std::pair<BigRational, BigRational> golden_conjugate_interval(int bits) {
  return quadratic_surd_interval(5, 1, 2, bits);
}

/// sqrt 2 - 1 enclosed at `bits` of precision.
inline std::pair<BigRational, BigRational> sqrt2_minus_one_interval(int bits) {
  return quadratic_surd_interval(2, 1, 1, bits);
}

/// Per-index Dirichlet check |alpha - p_n/q_n| < 1/(q_n q_{n+1}) for
/// n = 1..L, by exact cross-multiplication. At n = L the next denominator is
/// recovered from alpha itself. When alpha equals p_L/q_L the bound at
/// n = L-1 is attained exactly, which is accepted.
inline std::vector<bool> check_dirichlet(const ContinuedFraction& cf, const BigRational& alpha) {
  const long L = static_cast<long>(cf.length());
  std::vector<bool> out;
  const bool terminal = L >= 1 && alpha == cf.value();
  for (long n = 1; n <= L; ++n) {
    const BigRational gap = abs(alpha * cf.q(n) - BigRational(cf.p(n)));  // |alpha q_n - p_n|
    BigInt next;
    if (n < L) {
      next = cf.q(n + 1);
    } else if (gap == 0) {
      out.push_back(true);
      continue;
    } else {
      // Complete quotient alpha' with alpha = (p_L alpha' + p_{L-1})/(q_L alpha' + q_{L-1}).
      const BigRational complete = (BigRational(cf.p(n - 1)) - alpha * cf.q(n - 1)) / (alpha * cf.q(n) - cf.p(n));
      if (complete < 1) {
        out.push_back(false);
        continue;
      }
      next = floor_of(complete) * cf.q(n) + cf.q(n - 1);
    }
    const BigRational lhs = gap * next;
    out.push_back(lhs < 1 || (terminal && n == L - 1 && lhs == 1));
  }
  return out;
}

/// |alpha - p_n/q_n| < 1/q_n^n, decided through the convergent bound
/// 1/(q_n q_{n+1}): a witness when q_{n+1} >= q_n^{n-1}. Needs n < L.
inline bool is_liouville_witness(const ContinuedFraction& cf, std::size_t n) {
  require(n >= 1, "Liouville level must be >= 1");
  require(n < cf.length(), "Liouville level " + std::to_string(n) + " needs q_{n+1}; expansion has length " +
                               std::to_string(cf.length()));
  const long k = static_cast<long>(n);
  return cf.q(k + 1) >= pow_int(cf.q(k), static_cast<unsigned>(n - 1));
}

/// A growth function q -> psi(q), evaluated exactly.
class GrowthFunction {
 public:
  using Fn = std::function<BigRational(const BigInt&)>;

  GrowthFunction(Fn fn, std::string description) : fn_(std::move(fn)), description_(std::move(description)) {}

  /// psi given as an expression in the variable q (e.g. "q^2", "2^q").
  /// Rational-arithmetic expressions are evaluated exactly; others in double
  /// precision, converted exactly to a rational.
  static GrowthFunction from_expression(const FuncExpr& e) {
    return GrowthFunction(
        [e](const BigInt& q) {
          if (auto v = e.evaluate_exact(BigRational(q))) return *v;
          return from_double(e.evaluate_unrestricted(static_cast<double>(q)).real());
        },
        e.to_string());
  }

  static GrowthFunction from_text(std::string_view text) { return from_expression(parse_function(text, "q")); }

  /// Tabulated psi, zero outside the table.
  static GrowthFunction from_table(std::map<BigInt, BigRational> table) {
    std::string desc = "table{";
    bool first = true;
    for (const auto& [q, v] : table) {
      desc += (first ? "" : ", ") + q.str() + ": " + to_string(v);
      first = false;
    }
    desc += "}";
    return GrowthFunction(
        [t = std::move(table)](const BigInt& q) {
          const auto it = t.find(q);
          return it == t.end() ? BigRational(0) : it->second;
        },
        desc);
  }

  BigRational operator()(const BigInt& q) const { return fn_(q); }
  const std::string& description() const noexcept { return description_; }

 private:
  Fn fn_;
  std::string description_;
};

struct GapCondition {
  std::string psi;
  std::vector<std::size_t> indices;  // n in 1..L-1 with q_{n+1} > psi(q_n)
  std::vector<bool> holds;           // holds[n - 1]
  bool tail_condition = false;       // the last checkable index is a gap
  double chamizo_ratio = 0.0;        // max_n log(q_{n+1}) log(q_n)^3 / q_n, reported only

  bool contains(std::size_t n) const { return n >= 1 && n <= holds.size() && holds[n - 1]; }
};

inline double log_of(const BigInt& v) {
  const std::size_t bits = bit_length(v);
  if (bits <= 1000) return std::log(static_cast<double>(v));
  const std::size_t shift = bits - 64;
  return std::log(static_cast<double>(BigInt(v >> shift))) + static_cast<double>(shift) * std::log(2.0);
}

inline GapCondition gap_indices(const ContinuedFraction& cf, const GrowthFunction& psi) {
  GapCondition g;
  g.psi = psi.description();
  const long L = static_cast<long>(cf.length());
  for (long n = 1; n + 1 <= L; ++n) {
    const BigRational bound = psi(cf.q(n));
    const bool ok = cf.q(n + 1) * denom(bound) > numer(bound);
    g.holds.push_back(ok);
    if (ok) g.indices.push_back(static_cast<std::size_t>(n));
    if (cf.q(n) >= 2) {
      const double lq = log_of(cf.q(n));
      g.chamizo_ratio = std::max(g.chamizo_ratio, log_of(cf.q(n + 1)) * lq * lq * lq / to_double(BigRational(cf.q(n))));
    }
  }
  g.tail_condition = !g.holds.empty() && g.holds.back();
  return g;
}

/// Extends `base_quotients` by `levels` quotients a_{n+1} = floor(psi(q_n)/q_n) + 1,
/// which forces q_{n+1} > psi(q_n); each gap is re-verified exactly.
inline ContinuedFraction build_alpha_with_gaps(const GrowthFunction& psi, std::size_t levels,
                                               const std::vector<BigInt>& base_quotients = {BigInt(1)}) {
  ContinuedFraction cf(base_quotients);
  require(cf.length() >= 1, "build_alpha_with_gaps needs at least one seed quotient");
  for (std::size_t level = 0; level < levels; ++level) {
    const long n = static_cast<long>(cf.length());
    const BigRational bound = psi(cf.q(n));
    // floor(psi/q_n) by integer division, avoiding a gcd on huge values.
    const BigInt scaled_den = denom(bound) * cf.q(n);
    BigInt a = numer(bound) / scaled_den;
    if (numer(bound) < 0 && a * scaled_den != numer(bound)) a -= 1;
    a += 1;
    if (a < 1) a = 1;
    cf.push_back(a);
    if (!(cf.q(n + 1) * denom(bound) > numer(bound)))
      throw NumericalError("gap construction failed at level " + std::to_string(n));
  }
  return cf;
}

/// Parses an alpha specification:
///   "3/4", "0.25"          exact rational
///   "golden[:depth]"       [0; 1, 1, ...] (default depth 40)
///   "sqrt2[:depth]"        [0; 2, 2, ...]
///   "cf:a1,a2,..."         explicit partial quotients
///   "~0.7071067811865476"  decimal known to its printed digits; expanded as
///                          far as the uncertainty allows
inline AlphaValue parse_alpha(std::string_view text) {
  const auto named_depth = [&](std::string_view name) -> std::optional<std::size_t> {
    if (text.substr(0, name.size()) != name) return std::nullopt;
    const std::string_view rest = text.substr(name.size());
    if (rest.empty()) return std::size_t{40};
    if (rest.front() != ':') return std::nullopt;
    const BigRational d = parse_rational(rest.substr(1));
    require(denom(d) == 1 && d >= 1 && d <= 100000, "bad depth in '" + std::string(text) + "'");
    return static_cast<std::size_t>(numer(d));
  };
  if (auto depth = named_depth("golden")) return AlphaValue::continued_fraction(std::vector<BigInt>(*depth, 1));
  if (auto depth = named_depth("sqrt2")) return AlphaValue::continued_fraction(std::vector<BigInt>(*depth, 2));
  if (text.substr(0, 3) == "cf:") {
    std::vector<BigInt> quotients;
    std::string_view rest = text.substr(3);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const BigRational a = parse_rational(rest.substr(0, comma));
      require(denom(a) == 1 && a >= 1, "partial quotients must be integers >= 1 in '" + std::string(text) + "'");
      quotients.push_back(numer(a));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return AlphaValue::continued_fraction(std::move(quotients));
  }
  if (!text.empty() && text.front() == '~') {
    const std::string_view digits = text.substr(1);
    BigRational v;
    require(try_parse_decimal(digits, v), "not a decimal: '" + std::string(text) + "'");
    const auto dot = digits.find('.');
    const std::size_t places = dot == std::string_view::npos ? 0 : digits.size() - dot - 1;
    BigRational radius(1, pow_int(BigInt(10), static_cast<unsigned>(places)) * 2);
    const BigRational floor_radius(1, BigInt(1) << precision_bits());
    if (radius < floor_radius) radius = floor_radius;
    require(v - radius > 0 && v + radius < 1, "approximate alpha must lie well inside (0, 1)");
    const auto cf = cf_expand_interval(v - radius, v + radius, 100000, true);
    require(cf.length() >= 1, "no partial quotient of '" + std::string(text) + "' is certain");
    return cf.alpha();
  }
  return AlphaValue::rational(parse_rational(text));
}

}  // namespace bishop
