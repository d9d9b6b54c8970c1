#pragma once

// Weighted translation operators T f(x) = phi(x) f({x + alpha}): pointwise
// application, closed-form iterates through the cocycle
// W_n(x) = prod_{k<n} phi({x + k alpha}), adjoints, polynomial evaluation and
// power-norm estimates.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "bishop/error.hpp"
#include "bishop/expr.hpp"
#include "bishop/numerics.hpp"
#include "bishop/rational.hpp"

namespace bishop {

struct OperatorSpec {
  FuncExpr weight = parse_function("x");
  AlphaValue alpha;
  double p = 2.0;

  bool is_bishop() const { return weight.is_identity(); }
};

inline OperatorSpec bishop_operator(const AlphaValue& alpha, double p = 2.0) {
  return {parse_function("x"), alpha, p};
}

/// A product of many factors kept as mantissa * 2^exponent so that products
/// decaying like e^{-n} never underflow. Rescaling is by exact powers of two,
/// so while no rescale happens the mantissa is the plain running product.
class Cocycle {
 public:
  void multiply(Complex v) {
    if (v.imag() == 0.0 && mantissa_.imag() == 0.0) {
      mantissa_ = Complex(mantissa_.real() * v.real(), 0.0);
    } else {
      mantissa_ *= v;
    }
    const double m = std::max(std::abs(mantissa_.real()), std::abs(mantissa_.imag()));
    if (m != 0.0 && (m < kLow || m > kHigh)) {
      int e = 0;
      std::frexp(m, &e);
      mantissa_ = Complex(std::ldexp(mantissa_.real(), -e), std::ldexp(mantissa_.imag(), -e));
      exponent_ += e;
    }
  }

  /// The product as a double (0 once it underflows).
  Complex value() const {
    if (exponent_ == 0) return mantissa_;
    const int e = static_cast<int>(std::clamp<long>(exponent_, -100000, 100000));
    return {std::ldexp(mantissa_.real(), e), std::ldexp(mantissa_.imag(), e)};
  }

  /// value() * v, formed without leaving the scaled representation first.
  Complex times(Complex v) const {
    Cocycle c = *this;
    c.multiply(v);
    return c.value();
  }

  double log_magnitude() const {
    const double a = std::abs(mantissa_);
    if (a == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(a) + static_cast<double>(exponent_) * std::numbers::ln2;
  }

  Complex phase() const {
    const double a = std::abs(mantissa_);
    return a == 0.0 ? Complex(1.0, 0.0) : mantissa_ / a;
  }

 private:
  static constexpr double kLow = 0x1p-256;
  static constexpr double kHigh = 0x1p256;
  Complex mantissa_{1.0, 0.0};
  long exponent_ = 0;
};

/// Log-magnitude / phase form of a cocycle value.
struct CocycleProduct {
  double log_magnitude = 0.0;
  Complex phase{1.0, 0.0};
};

/// T^n f sampled at lattice points.
struct IterateSamples {
  std::vector<double> x;
  std::vector<Complex> values;           // 0 where the value underflows
  std::vector<double> log_magnitude;     // log |T^n f(x)|, -inf at zeros
  std::vector<CocycleProduct> cocycle;   // W_n(x)
};

namespace detail {

inline std::vector<double> lattice_points(const PointLattice& lattice) {
  std::vector<double> xs(lattice.count);
  walk_orbits(lattice, BigRational(0), 0, [&](std::size_t j, std::size_t, double y) { xs[j] = y; });
  return xs;
}

inline Complex weight_at(const OperatorSpec& spec, double y) {
  return spec.is_bishop() ? Complex(y, 0.0) : spec.weight(y);
}

}  // namespace detail

/// T^n f at each lattice point via the closed-form product; n = 0 returns f.
inline IterateSamples iterate(const OperatorSpec& spec, const FuncExpr& f, std::size_t n, const PointLattice& lattice) {
  IterateSamples out;
  out.x = detail::lattice_points(lattice);
  out.values.resize(lattice.count);
  out.log_magnitude.resize(lattice.count);
  out.cocycle.resize(lattice.count);
  Cocycle w;
  walk_orbits(lattice, spec.alpha.value(), n, [&](std::size_t j, std::size_t k, double y) {
    if (k == 0) w = Cocycle();
    if (k < n) {
      w.multiply(detail::weight_at(spec, y));
      return;
    }
    Cocycle full = w;
    out.cocycle[j] = {w.log_magnitude(), w.phase()};
    full.multiply(f(y));
    out.values[j] = full.value();
    out.log_magnitude[j] = full.log_magnitude();
  });
  return out;
}

inline IterateSamples iterate(const OperatorSpec& spec, const FuncExpr& f, std::size_t n, const GridSpec& grid) {
  return iterate(spec, f, n, grid.lattice());
}

/// T f = phi(x) f({x + alpha}); literally iterate(f, 1).
inline std::vector<Complex> apply(const OperatorSpec& spec, const FuncExpr& f, const PointLattice& lattice) {
  return iterate(spec, f, 1, lattice).values;
}

inline std::vector<Complex> apply(const OperatorSpec& spec, const FuncExpr& f, const GridSpec& grid) {
  return apply(spec, f, grid.lattice());
}

/// Transpose of T for the bilinear pairing <u, v> = int u v:
/// T' f(x) = phi({x - alpha}) f({x - alpha}). For real weights this is the
/// Hilbert-space adjoint at p = 2.
inline std::vector<Complex> apply_adjoint(const OperatorSpec& spec, const FuncExpr& f, const PointLattice& lattice) {
  std::vector<Complex> out(lattice.count);
  walk_orbits(lattice, -spec.alpha.value(), 1, [&](std::size_t j, std::size_t k, double y) {
    if (k == 1) out[j] = detail::weight_at(spec, y) * f(y);
  });
  return out;
}

inline std::vector<Complex> apply_adjoint(const OperatorSpec& spec, const FuncExpr& f, const GridSpec& grid) {
  return apply_adjoint(spec, f, grid.lattice());
}

/// Columns T^k f, k = 0..K-1, at the lattice points.
inline Eigen::MatrixXcd orbit_matrix(const OperatorSpec& spec, const FuncExpr& f, std::size_t K,
                                     const PointLattice& lattice) {
  require(K >= 1, "orbit needs K >= 1");
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(lattice.count), static_cast<Eigen::Index>(K));
  Cocycle w;
  walk_orbits(lattice, spec.alpha.value(), K - 1, [&](std::size_t j, std::size_t k, double y) {
    if (k == 0) w = Cocycle();
    m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = w.times(f(y));
    if (k + 1 < K) w.multiply(detail::weight_at(spec, y));
  });
  return m;
}

inline Eigen::MatrixXcd orbit_matrix(const OperatorSpec& spec, const FuncExpr& f, std::size_t K, const GridSpec& grid) {
  return orbit_matrix(spec, f, K, grid.lattice());
}

/// Q(T) f = sum_k c_k T^k f at the lattice points, coefficients ascending.
inline std::vector<Complex> apply_polynomial(const OperatorSpec& spec, const FuncExpr& f,
                                             std::span<const Complex> coeffs, const PointLattice& lattice) {
  std::vector<Complex> out(lattice.count, Complex(0.0, 0.0));
  if (coeffs.empty()) return out;
  const std::size_t degree = coeffs.size() - 1;
  Cocycle w;
  walk_orbits(lattice, spec.alpha.value(), degree, [&](std::size_t j, std::size_t k, double y) {
    if (k == 0) w = Cocycle();
    if (coeffs[k] != Complex(0.0, 0.0)) out[j] += coeffs[k] * w.times(f(y));
    if (k < degree) w.multiply(detail::weight_at(spec, y));
  });
  return out;
}

inline std::vector<Complex> apply_polynomial(const OperatorSpec& spec, const FuncExpr& f,
                                             std::span<const Complex> coeffs, const GridSpec& grid) {
  return apply_polynomial(spec, f, coeffs, grid.lattice());
}

struct NormEstimate {
  double value = 0.0;          // grid maximum of |W_n| (a lower bound for the ess-sup)
  double log_value = 0.0;
  double refined_value = 0.0;  // the same on the 2N grid
  double refined_log_value = 0.0;
  bool refined = false;
  bool converged = true;       // N and 2N agree within 1% (log-relative for tiny norms)
  double argmax = 0.0;
};

namespace detail {

inline std::pair<double, double> max_log_cocycle(const OperatorSpec& spec, std::size_t n, const GridSpec& grid) {
  double best = -std::numeric_limits<double>::infinity();
  double where = 0.0;
  Cocycle w;
  walk_orbits(grid.lattice(), spec.alpha.value(), n, [&](std::size_t j, std::size_t k, double y) {
    if (k == 0) w = Cocycle();
    if (k < n) {
      w.multiply(detail::weight_at(spec, y));
      return;
    }
    const double lm = w.log_magnitude();
    if (lm > best) {
      best = lm;
      where = grid.point(j);
    }
  });
  return {best, where};
}

}  // namespace detail

/// ||T^n|| = ess-sup |W_n| estimated by the grid maximum in log space.
inline NormEstimate power_norm(const OperatorSpec& spec, std::size_t n, const GridSpec& grid, bool refine = true) {
  require(n >= 1, "power_norm needs n >= 1");
  NormEstimate est;
  const auto [log_max, where] = detail::max_log_cocycle(spec, n, grid);
  est.log_value = log_max;
  est.value = std::exp(log_max);
  est.argmax = where;
  if (refine) {
    const auto [log_fine, unused] = detail::max_log_cocycle(spec, n, grid.refined());
    (void)unused;
    est.refined = true;
    est.refined_log_value = log_fine;
    est.refined_value = std::exp(log_fine);
    // Compare the values when they are representable, else their logs.
    if (est.value > 1e-300 && est.refined_value > 1e-300) {
      est.converged = std::abs(est.refined_value - est.value) <= 0.01 * std::max(est.value, est.refined_value);
    } else {
      est.converged = std::abs(log_fine - log_max) <= 0.01 * std::max(std::abs(log_fine), std::abs(log_max));
    }
  }
  return est;
}

/// ||T^n||^{1/n} from the log-space norm estimate.
inline double spectral_radius_estimate(const OperatorSpec& spec, std::size_t n, const GridSpec& grid,
                                       bool refine = false) {
  const auto est = power_norm(spec, n, grid, refine);
  return std::exp(est.log_value / static_cast<double>(n));
}

}  // namespace bishop
