#pragma once

// Numerical probes of structural facts about weighted translations:
// monotonicity of the periodic weight and the level sets behind eigenvalue
// absence, the rational spectral radius, the convex-product measure bound,
// rotation invariance of the positive-real-part measure, the obstruction
// from a vanishing weight, and the unit-function determinant probe.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bishop/cyclicity.hpp"
#include "bishop/diophantine.hpp"
#include "bishop/error.hpp"
#include "bishop/expr.hpp"
#include "bishop/numerics.hpp"
#include "bishop/operator.hpp"
#include "bishop/rational.hpp"

namespace bishop {

/// w(x) = prod_{k<q} phi({x + k/q}) at x_m = m/(Mq), m < M, covering [0, 1/q).
struct PeriodicWeightProduct {
  long q = 0;
  std::vector<double> x;
  std::vector<double> w;
  double min_forward_difference = 0.0;
  std::size_t violations = 0;  // forward differences below -1e-12
};

namespace detail {

/// w at x + k/q for 0 <= x < 1/q, where no factor wraps around.
inline Complex periodic_weight_at(long q, const FuncExpr& weight, double x) {
  Complex prod(1.0, 0.0);
  for (long k = 0; k < q; ++k) prod *= weight(x + static_cast<double>(k) / static_cast<double>(q));
  return prod;
}

}  // namespace detail

inline PeriodicWeightProduct periodic_weight(long q, const FuncExpr& weight, std::size_t samples) {
  require(q >= 2, "periodic weight needs q >= 2");
  require(samples >= 2, "need at least two samples");
  PeriodicWeightProduct out;
  out.q = q;
  const double den = static_cast<double>(samples) * static_cast<double>(q);
  out.min_forward_difference = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < samples; ++m) {
    // (m + k M)/(M q) is formed as one division, so it never rounds up to 1.
    Complex prod(1.0, 0.0);
    for (long k = 0; k < q; ++k)
      prod *= weight((static_cast<double>(m) + static_cast<double>(k) * static_cast<double>(samples)) / den);
    require(prod.imag() == 0.0, "periodic weight must be real for the monotonicity probe");
    out.x.push_back(static_cast<double>(m) / den);
    out.w.push_back(prod.real());
    if (m > 0) {
      const double d = out.w[m] - out.w[m - 1];
      out.min_forward_difference = std::min(out.min_forward_difference, d);
      if (d < -1e-12) ++out.violations;
    }
  }
  return out;
}

struct LevelSetRow {
  Complex lambda;
  Complex level;          // lambda^q
  double measure = 0.0;   // sampled m({x : |w(x) - lambda^q| < tol})
  double bound = 0.0;     // 2 tol / min slope + 2/N
  double predicted = 0.0; // 2 tol / w'(root) when a real root exists, else 0
  bool empty = false;     // lambda^q outside the closed range of w, or off the real axis by >= tol
};

struct EigenProbe {
  long q = 0;
  double tol = 0.0;
  std::size_t samples = 0;
  double min_slope = 0.0;  // in the period coordinate u = q x
  double w_sup = 0.0;
  std::vector<LevelSetRow> rows;
};

/// Uniform random points of the closed unit disk.
inline std::vector<Complex> random_disk_points(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Complex> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = std::sqrt(unit(rng));
    const double t = 2.0 * std::numbers::pi * unit(rng);
    out.push_back(std::polar(r, t));
  }
  return out;
}

/// For each lambda, the sampled measure of the near-level set
/// {|w - lambda^q| < tol} against the bound from strict monotonicity of w
/// on a period. Slopes use the period coordinate u = q x in [0, 1), so the
/// measure on [0, 1) and on one period agree.
inline EigenProbe eigen_levelset_probe(long q, const FuncExpr& weight, const std::vector<Complex>& lambdas, double tol,
                                       std::size_t samples) {
  require(tol > 0.0, "tol must be positive");
  require(samples >= 16, "need at least 16 samples per period");
  EigenProbe out;
  out.q = q;
  out.tol = tol;
  out.samples = samples;
  const double qd = static_cast<double>(q);
  // Midpoints of the period, in u.
  std::vector<double> w(samples);
  for (std::size_t m = 0; m < samples; ++m) {
    const double u = (static_cast<double>(m) + 0.5) / static_cast<double>(samples);
    const Complex v = detail::periodic_weight_at(q, weight, u / qd);
    require(v.imag() == 0.0, "periodic weight must be real");
    w[m] = v.real();
  }
  const double du = 1.0 / static_cast<double>(samples);
  out.min_slope = std::numeric_limits<double>::infinity();
  for (std::size_t m = 1; m < samples; ++m) out.min_slope = std::min(out.min_slope, (w[m] - w[m - 1]) / du);
  require(out.min_slope > 0.0, "periodic weight is not strictly increasing on the period");
  out.w_sup = detail::periodic_weight_at(q, weight, std::nextafter(1.0 / qd, 0.0)).real();
  for (const Complex& lambda : lambdas) {
    LevelSetRow row;
    row.lambda = lambda;
    row.level = std::pow(lambda, static_cast<int>(q));
    std::size_t hits = 0;
    for (double v : w)
      if (std::abs(Complex(v, 0.0) - row.level) < tol) ++hits;
    row.measure = static_cast<double>(hits) / static_cast<double>(samples);
    row.bound = 2.0 * tol / out.min_slope + 2.0 / static_cast<double>(samples);
    const double c = row.level.real();
    row.empty = std::abs(row.level.imag()) >= tol || c < w.front() - tol || c > out.w_sup + tol;
    if (std::abs(row.level.imag()) < tol && c > w.front() && c < w.back()) {
      // Local slope at the sampled root of w = Re lambda^q.
      const auto it = std::lower_bound(w.begin(), w.end(), c);
      const auto m = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - w.begin(), 1, static_cast<std::ptrdiff_t>(samples) - 1));
      const double slope = (w[m] - w[m - 1]) / du;
      const double half_width = std::sqrt(std::max(0.0, tol * tol - row.level.imag() * row.level.imag()));
      row.predicted = 2.0 * half_width / slope;
    }
    out.rows.push_back(row);
  }
  return out;
}

/// (q!/q^q)^{1/q}, the sup of w^{1/q} for the Bishop weight at alpha = r/q.
inline double rational_spectral_radius(long q) {
  require(q >= 1, "q must be >= 1");
  const double qd = static_cast<double>(q);
  return std::exp((std::lgamma(qd + 1.0) - qd * std::log(qd)) / qd);
}

/// Stirling's form e^{-1} (2 pi q)^{1/(2q)} of the same quantity.
inline double stirling_spectral_radius(long q) {
  const double qd = static_cast<double>(q);
  return std::exp(-1.0) * std::pow(2.0 * std::numbers::pi * qd, 1.0 / (2.0 * qd));
}

struct ConvexCheck {
  double a = 0.0;
  double b = 1.0;
  double measure = 0.0;  // sampled m({x in [a, b] : |1 - f(x)| > 1/2})
  double bound = 0.0;    // (b - a)/3
  double slack = 0.0;    // 10/N
  bool preconditions_ok = false;
  std::string precondition_failure;
  bool pass = false;
};

/// The measure bound from samples f(x_i) at the N midpoints of [a, b].
/// Preconditions (f(a) = 0 given separately, nonnegative, nondecreasing,
/// convex) are checked on the samples with second differences allowed to
/// dip to -1e-9 relative to max |f|.
inline ConvexCheck convex_product_bound_check(std::span<const double> f, double f_at_a, double a, double b) {
  require(b > a, "need a < b");
  require(f.size() >= 3, "need at least three samples");
  ConvexCheck out;
  out.a = a;
  out.b = b;
  const double n = static_cast<double>(f.size());
  out.bound = (b - a) / 3.0;
  out.slack = 10.0 / n;
  double scale = std::abs(f_at_a);
  for (double v : f) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, 1.0);
  const auto fail = [&](const std::string& why) {
    if (out.precondition_failure.empty()) out.precondition_failure = why;
  };
  if (std::abs(f_at_a) > 1e-12 * scale) fail("f(a) is not 0");
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) fail("f is not finite on [a, b]");
    if (f[i] < 0.0) fail("f is negative on [a, b]");
    if (i > 0 && f[i] - f[i - 1] < -1e-12 * scale) fail("f is not nondecreasing on [a, b]");
    if (i > 1 && f[i] - 2.0 * f[i - 1] + f[i - 2] < -1e-9 * scale) fail("f is not convex on [a, b]");
  }
  out.preconditions_ok = out.precondition_failure.empty();
  if (!out.preconditions_ok) return out;
  std::size_t count = 0;
  for (double v : f)
    if (std::abs(1.0 - v) > 0.5) ++count;
  out.measure = (b - a) * static_cast<double>(count) / n;
  out.pass = out.measure >= out.bound - out.slack;
  return out;
}

inline ConvexCheck convex_product_bound_check(const FuncExpr& f, double a, double b, std::size_t samples) {
  require(b > a, "need a < b");
  require(samples >= 3, "need at least three samples");
  std::vector<double> v(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const Complex y = f.evaluate_unrestricted(a + (b - a) * (static_cast<double>(i) + 0.5) / static_cast<double>(samples));
    if (y.imag() != 0.0) {
      ConvexCheck out;
      out.a = a;
      out.b = b;
      out.precondition_failure = "f is not real-valued";
      return out;
    }
    v[i] = y.real();
  }
  return convex_product_bound_check(v, f.evaluate_unrestricted(a).real(), a, b);
}

struct RandomConvexProduct {
  std::string expression;
  double a = 0.0;
  double b = 1.0;
};

/// Products of 1 to 4 nonnegative, nondecreasing, convex factors on [a, b],
/// the first of which vanishes at a.
inline std::vector<RandomConvexProduct> random_convex_products(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<int> nfactors(1, 4);
  std::uniform_int_distribution<int> power(1, 3);
  std::vector<RandomConvexProduct> out;
  const auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  for (std::size_t i = 0; i < count; ++i) {
    RandomConvexProduct p;
    p.a = 0.5 * unit(rng);
    p.b = p.a + 0.1 + (1.0 - p.a - 0.1) * unit(rng);
    const std::string shifted = "(x - " + num(p.a) + ")";
    const int factors = nfactors(rng);
    std::string expr;
    for (int k = 0; k < factors; ++k) {
      const double c = 0.5 + 9.5 * unit(rng);
      std::string factor;
      switch (k == 0 ? kind(rng) % 2 : kind(rng)) {
        case 0: factor = num(c) + "*" + shifted + "^" + std::to_string(power(rng)); break;
        case 1: factor = "(exp(" + num(c) + "*" + shifted + ") - 1)"; break;
        case 2: factor = "(" + num(c) + "*" + shifted + " + " + num(unit(rng)) + ")"; break;
        default: factor = "exp(" + num(0.2 * c) + "*" + shifted + ")"; break;
      }
      expr += (k ? "*" : "") + factor;
    }
    p.expression = expr;
    out.push_back(p);
  }
  return out;
}

struct CocycleConvexRow {
  std::size_t level = 0;  // convergent index n
  BigInt q;               // the cocycle length q_n
  std::size_t intervals = 0;
  std::size_t passed = 0;
  double min_margin = 0.0;  // min over intervals of measure - (bound - slack)
  bool pass = false;
};

/// |F_{q_n}(x)| = lambda^{-q_n} prod_{k<q_n} {x + k alpha} on every interval
/// between consecutive zeros {-k alpha}, for each convergent denominator
/// q_n <= q_max. On such an interval every factor is affine, nonnegative and
/// increasing, so the product meets the convex-product preconditions.
inline std::vector<CocycleConvexRow> cocycle_convex_checks(const ContinuedFraction& cf, double lambda, long q_max,
                                                           std::size_t samples) {
  require(lambda > 0.0, "lambda must be positive");
  const BigRational alpha = cf.value();
  std::vector<CocycleConvexRow> rows;
  const double inv_lambda = 1.0 / lambda;
  require(static_cast<double>(q_max) * std::log(std::max(inv_lambda, lambda)) < 600.0, "lambda^{-q_max} is out of double range");
  for (long n = 1; n <= static_cast<long>(cf.length()) && cf.q(n) <= q_max; ++n) {
    if (n > 1 && cf.q(n) == cf.q(n - 1)) continue;
    CocycleConvexRow row;
    row.level = static_cast<std::size_t>(n);
    row.q = cf.q(n);
    const long len = static_cast<long>(cf.q(n));
    std::vector<BigRational> zeros;
    for (long k = 0; k < len; ++k) zeros.push_back(frac_part(-BigRational(k) * alpha));
    std::sort(zeros.begin(), zeros.end());
    zeros.push_back(zeros.front() + 1);
    row.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t z = 0; z + 1 < zeros.size(); ++z) {
      const BigRational& a = zeros[z];
      const double width = to_double(zeros[z + 1] - a);
      if (width <= 0.0) continue;
      // c_k = {a + k alpha}; on (a, a + width) the factor is c_k + (x - a).
      std::vector<double> c(static_cast<std::size_t>(len));
      for (long k = 0; k < len; ++k) c[static_cast<std::size_t>(k)] = to_double(frac_part(a + BigRational(k) * alpha));
      std::vector<double> v(samples);
      for (std::size_t i = 0; i < samples; ++i) {
        const double s = width * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
        // Each factor (c_k + s)/lambda lies in (0, 1/lambda], so the direct
        // product stays in range for the lengths probed here.
        double prod = 1.0;
        for (double ck : c) prod *= (ck + s) * inv_lambda;
        v[i] = prod;
      }
      const auto check = convex_product_bound_check(v, 0.0, 0.0, width);
      ++row.intervals;
      if (check.pass) ++row.passed;
      row.min_margin = std::min(row.min_margin, check.measure - (check.bound - check.slack));
    }
    row.pass = row.passed == row.intervals;
    rows.push_back(row);
  }
  return rows;
}

struct InvarianceResult {
  double measure_f = 0.0;
  double measure_iterate = 0.0;
  double deviation = 0.0;
  std::size_t breakpoints = 0;  // sign changes of Re f around the grid
  double tolerance = 0.0;       // (breakpoints + 2)/N
  bool pass = false;
};

/// |m({Re(a T^n f) > 0}) - m({Re f > 0})| on the grid. Signs come from the
/// scaled cocycle, so they survive underflow of |T^n f|.
inline InvarianceResult supercyclicity_invariance(const FuncExpr& f, const OperatorSpec& spec, std::size_t n, double a,
                                                  const GridSpec& grid) {
  require(a > 0.0, "scale a must be positive");
  if (!spec.is_bishop()) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const Complex v = spec.weight(grid.point(j));
      require(v.imag() == 0.0 && v.real() > 0.0, "weight must be positive on the grid");
    }
  }
  const auto fs = sample(f, grid);
  std::size_t positive_f = 0;
  std::size_t changes = 0;
  for (std::size_t j = 0; j < fs.size(); ++j) {
    if (fs[j].real() > 0.0) ++positive_f;
    if ((fs[j].real() > 0.0) != (fs[(j + 1) % fs.size()].real() > 0.0)) ++changes;
  }
  std::size_t positive_it = 0;
  Cocycle w;
  walk_orbits(grid.lattice(), spec.alpha.value(), n, [&](std::size_t, std::size_t k, double y) {
    if (k == 0) w = Cocycle();
    if (k < n) {
      w.multiply(detail::weight_at(spec, y));
      return;
    }
    Cocycle full = w;
    full.multiply(a * f(y));
    if (std::isfinite(full.log_magnitude()) && full.phase().real() > 0.0) ++positive_it;
  });
  InvarianceResult out;
  const double N = static_cast<double>(grid.size());
  out.measure_f = static_cast<double>(positive_f) / N;
  out.measure_iterate = static_cast<double>(positive_it) / N;
  out.deviation = std::abs(out.measure_iterate - out.measure_f);
  out.breakpoints = changes;
  out.tolerance = (static_cast<double>(changes) + 2.0) / N;
  out.pass = out.deviation <= out.tolerance;
  return out;
}

struct ObstructionResult {
  double lhs = 0.0;             // ||T^n f - 1_{weight = 0}||_p^p
  double rhs = 0.0;             // m({weight = 0})
  double tolerance = 0.0;
  bool vacuous = false;         // zero set has sampled measure 0
  bool pass = false;
};

/// On the zero set Z of the weight, T^n f vanishes for n >= 1, so
/// ||T^n f - 1_Z||_p^p >= m(Z) for every f.
inline ObstructionResult orbit_obstruction(const OperatorSpec& spec, const FuncExpr& f, std::size_t n,
                                           const GridSpec& grid) {
  require(n >= 1, "the obstruction needs n >= 1");
  const auto it = iterate(spec, f, n, grid);
  const double N = static_cast<double>(grid.size());
  std::size_t zeros = 0;
  double acc = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const bool in_z = detail::weight_at(spec, grid.point(j)) == Complex(0.0, 0.0);
    if (in_z) ++zeros;
    const Complex d = it.values[j] - Complex(in_z ? 1.0 : 0.0, 0.0);
    if (!std::isfinite(d.real()) || !std::isfinite(d.imag())) throw NumericalError("non-finite iterate sample");
    acc += std::pow(std::abs(d), spec.p);
  }
  ObstructionResult out;
  out.lhs = acc / N;
  out.rhs = static_cast<double>(zeros) / N;
  out.tolerance = 1e-12;
  out.vacuous = zeros == 0;
  out.pass = out.lhs >= out.rhs - out.tolerance;
  return out;
}

struct UnitDeltaRow {
  long r = 0;
  long q = 0;
  double min_abs = 0.0;
  double log_min_abs = 0.0;
  double argmin_t = 0.0;
  int direction = 0;  // +1 increasing, -1 decreasing (by endpoint comparison), 0 flat
  std::size_t violations = 0;
  Complex delta0_lu;
  Complex delta0_closed;
  double closed_form_error = 0.0;  // relative
  bool closed_form_ok = false;
};

/// For every coprime r/q with 2 <= q <= q_max: min |Delta(1, r/q)| over the
/// sampled period, count of steps where Re Delta moves against its overall
/// direction by more than 1e-12 relative to max |Re Delta|, and Delta(0)
/// from the LU determinant against the closed form. Reported, not asserted.
inline std::vector<UnitDeltaRow> unit_delta_conjecture_probe(long q_max, std::size_t samples) {
  require(q_max >= 2, "q_max must be >= 2");
  const FuncExpr one = parse_function("1");
  const FuncExpr x = parse_function("x");
  std::vector<UnitDeltaRow> rows;
  for (long q = 2; q <= q_max; ++q) {
    for (long r = 1; r < q; ++r) {
      if (std::gcd(r, q) != 1) continue;
      const auto rot = RationalRotation::from(r, q);
      const auto prof = delta_profile(one, x, rot, samples);
      UnitDeltaRow row;
      row.r = r;
      row.q = q;
      row.min_abs = prof.min_abs;
      row.log_min_abs = prof.min_log_abs;
      row.argmin_t = prof.argmin_t;
      std::vector<double> re(prof.t.size());
      double scale = 0.0;
      for (std::size_t m = 0; m < re.size(); ++m) {
        re[m] = DeltaValue{prof.log_abs[m], prof.phase[m]}.value().real();
        scale = std::max(scale, std::abs(re[m]));
      }
      row.direction = re.back() > re.front() ? 1 : (re.back() < re.front() ? -1 : 0);
      for (std::size_t m = 1; m < re.size(); ++m) {
        const double step = (re[m] - re[m - 1]) * (row.direction == 0 ? 1.0 : row.direction);
        if (row.direction == 0 ? std::abs(step) > 1e-12 * scale : step < -1e-12 * scale) ++row.violations;
      }
      row.delta0_lu = delta_sample(one, x, rot, 0.0).value();
      row.delta0_closed = delta_at_zero_closed_form(one, x, rot);
      row.closed_form_error = std::abs(row.delta0_lu - row.delta0_closed) / std::abs(row.delta0_closed);
      row.closed_form_ok = row.closed_form_error < 1e-9;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace bishop
