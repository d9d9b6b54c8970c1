#pragma once

// The determinant criterion for rational rotations and the constructive
// approximation Q(T)f ~ g that it licenses.
//
// For alpha = r/q the matrix [T^j f({t + i r/q})]_{i,j<q} has determinant
// Delta(f, r/q)(t). Where Delta does not vanish, any h splits as
// h = sum_j h_j T^j f with 1/q-periodic h_j, and each h_j is approximated by a
// polynomial in the periodic weight w = prod_k phi({t + k/q}) because
// T^q u = w u. Interleaving the pieces gives Q = sum_j Q_j(xi^q) xi^j.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bishop/error.hpp"
#include "bishop/expr.hpp"
#include "bishop/numerics.hpp"
#include "bishop/operator.hpp"
#include "bishop/rational.hpp"

namespace bishop {

using Polynomial = std::vector<Complex>;  // ascending coefficients

/// A reduced rational r/q with 0 < r < q.
struct RationalRotation {
  long r = 0;
  long q = 1;

  static RationalRotation from(const BigRational& v) {
    require(v > 0 && v < 1, "rational rotation needs 0 < r/q < 1, got " + bishop::to_string(v));
    require(denom(v) <= 100000, "denominator too large for a rational-rotation computation: " + bishop::to_string(v));
    return {static_cast<long>(numer(v)), static_cast<long>(denom(v))};
  }

  static RationalRotation from(long r, long q) {
    require(q >= 2, "q must be >= 2");
    return from(BigRational(r, q));
  }

  BigRational value() const { return BigRational(r, q); }
  AlphaValue alpha() const { return AlphaValue::rational(value()); }
  std::string to_string() const { return std::to_string(r) + "/" + std::to_string(q); }
};

struct DeltaValue {
  double log_abs = -std::numeric_limits<double>::infinity();
  Complex phase{1.0, 0.0};

  Complex value() const { return std::isinf(log_abs) ? Complex(0.0, 0.0) : std::exp(log_abs) * phase; }
};

namespace detail {

/// Scales every column by a power of two so its largest entry lies in
/// [0.5, 1); returns the sum of the applied log-scales (log of the factor by
/// which the determinant shrank). Zero columns are left alone.
inline double equilibrate_columns(Eigen::MatrixXcd& a, std::vector<int>* exponents = nullptr) {
  double log_scale = 0.0;
  if (exponents) exponents->assign(static_cast<std::size_t>(a.cols()), 0);
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    double m = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) m = std::max({m, std::abs(a(r, c).real()), std::abs(a(r, c).imag())});
    if (m == 0.0) continue;
    int e = 0;
    std::frexp(m, &e);
    for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = Complex(std::ldexp(a(r, c).real(), -e), std::ldexp(a(r, c).imag(), -e));
    log_scale += static_cast<double>(e) * std::numbers::ln2;
    if (exponents) (*exponents)[static_cast<std::size_t>(c)] = e;
  }
  return log_scale;
}

/// log|det| and phase by LU with partial pivoting on the equilibrated matrix.
inline DeltaValue log_det(Eigen::MatrixXcd a) {
  const double log_scale = equilibrate_columns(a);
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const auto& m = lu.matrixLU();
  DeltaValue d;
  double acc = 0.0;
  Complex phase(lu.permutationP().determinant(), 0.0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mag = std::abs(m(i, i));
    if (mag == 0.0) return d;
    acc += std::log(mag);
    phase *= m(i, i) / mag;
  }
  d.log_abs = acc + log_scale;
  d.phase = phase / std::abs(phase);
  return d;
}

/// sigma_min / sigma_max of the column-equilibrated matrix.
inline double equilibrated_rcond(Eigen::MatrixXcd a) {
  equilibrate_columns(a);
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

}  // namespace detail

/// Orbit columns T^j f (j < q) on the midpoint grid of N = M q points. The
/// t-samples t_m = (2m + 1)/(2 M q) of [0, 1/q) satisfy
/// t_m + i/q = x_{m + M i}, so every q x q system is read off these columns.
struct RationalOrbit {
  RationalRotation rot;
  std::size_t M = 0;
  Eigen::MatrixXcd columns;     // N x q
  std::vector<double> weights;  // phi at the grid points

  std::size_t grid_size() const { return M * static_cast<std::size_t>(rot.q); }
  double t(std::size_t m) const { return (2.0 * static_cast<double>(m) + 1.0) / (2.0 * static_cast<double>(grid_size())); }
  /// Grid index of t_m + i/q.
  std::size_t index(std::size_t m, long i) const { return m + M * static_cast<std::size_t>(i); }

  /// Rows ordered by the rotation orbit {t + i r/q}, i = 0..q-1.
  Eigen::MatrixXcd delta_matrix(std::size_t m) const {
    const long q = rot.q;
    Eigen::MatrixXcd a(q, q);
    for (long i = 0; i < q; ++i) a.row(i) = columns.row(static_cast<Eigen::Index>(index(m, (i * rot.r) % q)));
    return a;
  }

  /// Rows ordered by t + i/q (used for the decomposition solves).
  Eigen::MatrixXcd natural_matrix(std::size_t m) const {
    const long q = rot.q;
    Eigen::MatrixXcd a(q, q);
    for (long i = 0; i < q; ++i) a.row(i) = columns.row(static_cast<Eigen::Index>(index(m, i)));
    return a;
  }

  /// w(t_m) = prod_k phi(t_m + k/q).
  Complex periodic_weight(std::size_t m) const {
    Cocycle w;
    for (long k = 0; k < rot.q; ++k) w.multiply(weights[index(m, k)]);
    return w.value();
  }
};

inline RationalOrbit rational_orbit(const FuncExpr& f, const FuncExpr& weight, const RationalRotation& rot,
                                    std::size_t samples_per_period) {
  require(samples_per_period >= 1, "need at least one sample per period");
  RationalOrbit orbit;
  orbit.rot = rot;
  orbit.M = samples_per_period;
  const GridSpec grid(orbit.grid_size());
  const OperatorSpec spec{weight, rot.alpha(), 2.0};
  orbit.columns = orbit_matrix(spec, f, static_cast<std::size_t>(rot.q), grid);
  orbit.weights.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) orbit.weights[j] = detail::weight_at(spec, grid.point(j)).real();
  return orbit;
}

/// Delta(f, r/q)(t) by LU in log-magnitude/phase form; t is taken exactly.
inline DeltaValue delta_sample(const FuncExpr& f, const FuncExpr& weight, const RationalRotation& rot, double t) {
  require(t >= 0.0 && t < 1.0, "t must lie in [0, 1)");
  const BigRational tx = from_double(t);
  // Points (a q + i r b)/(b q) = {t + i r/q}.
  const PointLattice rows{numer(tx) * rot.q, BigInt(rot.r) * denom(tx), denom(tx) * rot.q,
                          static_cast<std::size_t>(rot.q)};
  const OperatorSpec spec{weight, rot.alpha(), 2.0};
  return detail::log_det(orbit_matrix(spec, f, static_cast<std::size_t>(rot.q), rows));
}

/// (-1)^{(q-1)(q-2)/2} f(0)^q prod_{m=1}^{q-1} phi({m r/q})^m, valid when
/// phi(0) = 0 (row t = 0 then has a single nonzero entry and the remaining
/// minor is anti-triangular).
inline Complex delta_at_zero_closed_form(const FuncExpr& f, const FuncExpr& weight, const RationalRotation& rot) {
  require(weight(0.0) == Complex(0.0, 0.0), "the closed form needs phi(0) = 0");
  const long q = rot.q;
  Cocycle prod;
  const Complex f0 = f(0.0);
  for (long k = 0; k < q; ++k) prod.multiply(f0);
  for (long m = 1; m < q; ++m) {
    const Complex phi = weight(to_double(frac_part(BigRational(m * rot.r, q))));
    for (long k = 0; k < m; ++k) prod.multiply(phi);
  }
  const long s = (q - 1) * (q - 2) / 2;
  const Complex v = prod.value();
  return s % 2 == 0 ? v : -v;
}

struct DeltaProfile {
  RationalRotation rot;
  std::vector<double> t;
  std::vector<double> log_abs;
  std::vector<Complex> phase;
  std::vector<double> rcond;  // of the column-equilibrated matrix
  double min_log_abs = std::numeric_limits<double>::infinity();
  double min_abs = 0.0;
  double argmin_t = 0.0;
  double min_rcond = 1.0;
};

inline DeltaProfile delta_profile(const RationalOrbit& orbit) {
  DeltaProfile p;
  p.rot = orbit.rot;
  for (std::size_t m = 0; m < orbit.M; ++m) {
    const auto a = orbit.delta_matrix(m);
    const DeltaValue d = detail::log_det(a);
    p.t.push_back(orbit.t(m));
    p.log_abs.push_back(d.log_abs);
    p.phase.push_back(d.phase);
    p.rcond.push_back(std::isinf(d.log_abs) ? 0.0 : detail::equilibrated_rcond(a));
    if (d.log_abs < p.min_log_abs) {
      p.min_log_abs = d.log_abs;
      p.argmin_t = orbit.t(m);
    }
    p.min_rcond = std::min(p.min_rcond, p.rcond.back());
  }
  p.min_abs = std::exp(p.min_log_abs);
  return p;
}

inline DeltaProfile delta_profile(const FuncExpr& f, const FuncExpr& weight, const RationalRotation& rot,
                                  std::size_t samples) {
  return delta_profile(rational_orbit(f, weight, rot, samples));
}

enum class Verdict { Cyclic, NotCyclic, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Cyclic: return "cyclic";
    case Verdict::NotCyclic: return "not-cyclic";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct CyclicityReport {
  Verdict verdict = Verdict::Inconclusive;
  DeltaProfile profile;
  double tol = 0.0;
  double degenerate_fraction = 0.0;  // share of t-samples with rcond <= tol
  std::size_t longest_degenerate_run = 0;
};

/// Samples Delta on [0, 1/q). Cyclic when every sample is well conditioned
/// (rcond > tol); not cyclic when a run of more than 10 consecutive samples
/// is degenerate; inconclusive otherwise.
inline CyclicityReport cyclicity_test(const FuncExpr& f, const FuncExpr& weight, const RationalRotation& rot,
                                      std::size_t samples, double tol = 1e-10) {
  require(samples >= 1, "need at least one sample");
  require(tol >= 0.0, "tol must be >= 0");
  CyclicityReport rep;
  rep.tol = tol;
  rep.profile = delta_profile(f, weight, rot, samples);
  std::size_t bad = 0, run = 0;
  for (double rc : rep.profile.rcond) {
    if (rc <= tol) {
      ++bad;
      rep.longest_degenerate_run = std::max(rep.longest_degenerate_run, ++run);
    } else {
      run = 0;
    }
  }
  rep.degenerate_fraction = static_cast<double>(bad) / static_cast<double>(samples);
  if (bad == 0) {
    rep.verdict = Verdict::Cyclic;
  } else if (rep.longest_degenerate_run > 10) {
    rep.verdict = Verdict::NotCyclic;
  } else {
    rep.verdict = Verdict::Inconclusive;
  }
  return rep;
}

/// The bad set Omega_n = {|Delta| < 1/n} u {some |T^j f(t + i/q)| > n},
/// sampled at the t-samples of an orbit.
struct TruncationSet {
  double n = 0.0;
  std::vector<bool> member;

  double measure() const {
    if (member.empty()) return 0.0;
    return static_cast<double>(std::count(member.begin(), member.end(), true)) / static_cast<double>(member.size());
  }
};

inline TruncationSet truncation_set(const RationalOrbit& orbit, const DeltaProfile& profile, double n) {
  require(n > 0.0, "truncation threshold must be positive");
  TruncationSet s;
  s.n = n;
  s.member.resize(orbit.M);
  const double log_inv_n = -std::log(n);
  for (std::size_t m = 0; m < orbit.M; ++m) {
    bool bad = profile.log_abs[m] < log_inv_n;
    for (long i = 0; i < orbit.rot.q && !bad; ++i)
      for (long j = 0; j < orbit.rot.q && !bad; ++j)
        bad = std::abs(orbit.columns(static_cast<Eigen::Index>(orbit.index(m, i)), j)) > n;
    s.member[m] = bad;
  }
  return s;
}

struct PeriodicComponents {
  RationalRotation rot;
  std::size_t M = 0;
  double p = 2.0;
  std::vector<double> t;
  std::vector<double> s;             // w(t_m), the polynomial variable
  Eigen::MatrixXcd h;                // M x q, h(m, j) = h_j(t_m)
  Eigen::MatrixXd F;                 // M x q, (sum_i |T^j f(t_m + i/q)|^p)^{1/p}
  std::vector<double> cond;          // 1/rcond of each solve (inf on Omega)
  std::vector<bool> in_omega;
  std::size_t flagged = 0;           // singular outside Omega, excluded
  double reconstruction_error = 0.0; // max |sum_j h_j T^j f - h| off Omega
};

/// Solves h(t + i/q) = sum_j h_j(t) T^j f(t + i/q) at every t-sample; on
/// Omega the components are set to zero.
inline PeriodicComponents decompose_target(const std::vector<Complex>& h_grid, const RationalOrbit& orbit,
                                           const TruncationSet& omega, double p = 2.0) {
  require(h_grid.size() == orbit.grid_size(), "target samples do not match the orbit grid");
  const long q = orbit.rot.q;
  PeriodicComponents pc;
  pc.rot = orbit.rot;
  pc.M = orbit.M;
  pc.p = p;
  pc.h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(orbit.M), q);
  pc.F = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(orbit.M), q);
  pc.cond.assign(orbit.M, std::numeric_limits<double>::infinity());
  pc.in_omega = omega.member;
  for (std::size_t m = 0; m < orbit.M; ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    pc.t.push_back(orbit.t(m));
    pc.s.push_back(orbit.periodic_weight(m).real());
    for (long j = 0; j < q; ++j) {
      double acc = 0.0;
      for (long i = 0; i < q; ++i) acc += std::pow(std::abs(orbit.columns(static_cast<Eigen::Index>(orbit.index(m, i)), j)), p);
      pc.F(mi, j) = std::pow(acc, 1.0 / p);
    }
    if (omega.member[m]) continue;
    Eigen::MatrixXcd a = orbit.natural_matrix(m);
    Eigen::VectorXcd b(q);
    for (long i = 0; i < q; ++i) b(i) = h_grid[orbit.index(m, i)];
    std::vector<int> exps;
    Eigen::MatrixXcd scaled = a;
    detail::equilibrate_columns(scaled, &exps);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(scaled);
    Eigen::VectorXcd c = lu.solve(b);
    for (long j = 0; j < q; ++j) c(j) = Complex(std::ldexp(c(j).real(), -exps[static_cast<std::size_t>(j)]),
                                                std::ldexp(c(j).imag(), -exps[static_cast<std::size_t>(j)]));
    const double rc = lu.rcond();
    bool finite = rc > 0.0;
    for (long j = 0; j < q; ++j) finite = finite && std::isfinite(c(j).real()) && std::isfinite(c(j).imag());
    if (!finite) {
      ++pc.flagged;
      continue;
    }
    pc.cond[m] = 1.0 / rc;
    pc.h.row(mi) = c.transpose();
    const Eigen::VectorXcd back = a * c;
    for (long i = 0; i < q; ++i) pc.reconstruction_error = std::max(pc.reconstruction_error, std::abs(back(i) - b(i)));
  }
  return pc;
}

struct PeriodicFit {
  Polynomial coeffs;          // monomials in s = w(t)
  Polynomial chebyshev;       // in u = 2 s / s_max - 1
  double s_max = 0.0;
  std::size_t degree = 0;     // requested degree
  double weighted_residual = 0.0;  // || (Q_j(w) - h_j) T^j f ||_p on the grid
  double conversion_error = 0.0;   // max |monomial - Chebyshev evaluation|
};

namespace detail {

inline Eigen::MatrixXd chebyshev_design(const std::vector<double>& u, std::size_t degree) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(u.size()), static_cast<Eigen::Index>(degree + 1));
  for (std::size_t m = 0; m < u.size(); ++m) {
    const auto r = static_cast<Eigen::Index>(m);
    v(r, 0) = 1.0;
    if (degree >= 1) v(r, 1) = u[m];
    for (std::size_t k = 2; k <= degree; ++k)
      v(r, static_cast<Eigen::Index>(k)) = 2.0 * u[m] * v(r, static_cast<Eigen::Index>(k - 1)) - v(r, static_cast<Eigen::Index>(k - 2));
  }
  return v;
}

/// Chebyshev series in u = a s - 1 to monomials in s, in long double.
inline Polynomial chebyshev_to_monomial(const Polynomial& cheb, double s_max) {
  const std::size_t n = cheb.size();
  // Monomial coefficients (in u) of T_0..T_{n-1}.
  std::vector<std::vector<long double>> t(n, std::vector<long double>(n, 0.0L));
  if (n >= 1) t[0][0] = 1.0L;
  if (n >= 2) t[1][1] = 1.0L;
  for (std::size_t k = 2; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) t[k][i] = (i ? 2.0L * t[k - 1][i - 1] : 0.0L) - t[k - 2][i];
  std::vector<std::complex<long double>> in_u(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i <= k; ++i) in_u[i] += std::complex<long double>(cheb[k]) * t[k][i];
  // (a s - 1)^k = sum_m C(k, m) a^m s^m (-1)^{k-m}.
  const long double a = 2.0L / static_cast<long double>(s_max);
  std::vector<std::complex<long double>> in_s(n);
  for (std::size_t k = 0; k < n; ++k) {
    long double binom = 1.0L;  // C(k, m)
    for (std::size_t m = 0; m <= k; ++m) {
      const long double sign = (k - m) % 2 == 0 ? 1.0L : -1.0L;
      in_s[m] += in_u[k] * (binom * sign * std::pow(a, static_cast<long double>(m)));
      binom = binom * static_cast<long double>(k - m) / static_cast<long double>(m + 1);
    }
  }
  Polynomial out(n);
  for (std::size_t m = 0; m < n; ++m) out[m] = Complex(static_cast<double>(in_s[m].real()), static_cast<double>(in_s[m].imag()));
  return out;
}

inline Complex horner(const Polynomial& c, double s) {
  Complex acc(0.0, 0.0);
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
  return acc;
}

}  // namespace detail

/// Drops coefficients whose largest contribution |c_m| s_max^m is below
/// rel * scale, then trims trailing zeros.
inline void prune_polynomial(Polynomial& c, double s_max, double scale, double rel = 1e-13) {
  for (std::size_t m = 0; m < c.size(); ++m)
    if (std::abs(c[m]) * std::pow(s_max, static_cast<double>(m)) < rel * scale) c[m] = Complex(0.0, 0.0);
  while (!c.empty() && c.back() == Complex(0.0, 0.0)) c.pop_back();
}

/// Weighted least-squares fit of h_j as a polynomial of degree <= `degree`
/// in s = w(t), one fit per j. Each fit minimizes
/// sum_m F_j(t_m)^p |Q_j(s_m) - h_j(t_m)|^p over samples off Omega
/// (directly for p = 2, by reweighting otherwise). Throws NumericalError when
/// the monomial form drifts from the stable Chebyshev form by more than
/// `conversion_tol` (default 1e-8 * max(max |h_j|, 1)).
inline std::vector<PeriodicFit> fit_periodic_polynomials(const PeriodicComponents& pc, std::size_t degree,
                                                         double conversion_tol = -1.0) {
  const long q = pc.rot.q;
  const double p = pc.p;
  const double N = static_cast<double>(pc.M) * static_cast<double>(q);
  double s_max = 0.0;
  for (double v : pc.s) s_max = std::max(s_max, v);
  require(s_max > 0.0, "periodic weight vanishes on every sample");
  for (std::size_t m = 1; m < pc.s.size(); ++m)
    require(pc.s[m] > pc.s[m - 1], "periodic weight is not strictly increasing on [0, 1/q); polynomial fitting needs it");
  double scale = 0.0;
  for (Eigen::Index m = 0; m < pc.h.rows(); ++m)
    for (Eigen::Index j = 0; j < q; ++j) scale = std::max(scale, std::abs(pc.h(m, j)));

  std::vector<std::size_t> rows;
  for (std::size_t m = 0; m < pc.M; ++m)
    if (!pc.in_omega[m]) rows.push_back(m);
  std::vector<double> u;
  for (std::size_t m : rows) u.push_back(2.0 * pc.s[m] / s_max - 1.0);
  const Eigen::MatrixXd design = detail::chebyshev_design(u, degree);

  std::vector<PeriodicFit> fits;
  for (long j = 0; j < q; ++j) {
    PeriodicFit fit;
    fit.s_max = s_max;
    fit.degree = degree;
    const auto R = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXcd target(R);
    Eigen::VectorXd weight(R);
    for (Eigen::Index k = 0; k < R; ++k) {
      target(k) = pc.h(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]), j);
      weight(k) = pc.F(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]), j);
    }
    Eigen::VectorXcd coef = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(degree + 1));
    // The design is real, so one real factorization serves both parts of h_j.
    const auto solve = [&](const Eigen::VectorXd& sqrt_w) {
      const Eigen::MatrixXd a = sqrt_w.asDiagonal() * design;
      const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
      const Eigen::VectorXd re = qr.solve(Eigen::VectorXd(sqrt_w.cwiseProduct(target.real())));
      const Eigen::VectorXd im = qr.solve(Eigen::VectorXd(sqrt_w.cwiseProduct(target.imag())));
      Eigen::VectorXcd c(re.size());
      for (Eigen::Index k = 0; k < re.size(); ++k) c(k) = Complex(re(k), im(k));
      return c;
    };
    const auto residual = [&](const Eigen::VectorXcd& c) {
      return Eigen::VectorXcd(design * c.real() + Complex(0.0, 1.0) * (design * c.imag()) - target);
    };
    const auto objective = [&](const Eigen::VectorXcd& c) {
      const Eigen::VectorXcd r = residual(c);
      double acc = 0.0;
      for (Eigen::Index k = 0; k < R; ++k) acc += std::pow(weight(k) * std::abs(r(k)), p);
      return acc;
    };
    if (R > 0 && weight.maxCoeff() > 0.0) {
      coef = solve(weight);
      if (p != 2.0) {
        // Iteratively reweighted least squares for the weighted l^p objective.
        double prev = objective(coef);
        const double floor_r = 1e-12 * std::max(scale, 1e-300);
        for (int sweep = 0; sweep < 100; ++sweep) {
          const Eigen::VectorXcd r = residual(coef);
          Eigen::VectorXd sw(R);
          for (Eigen::Index k = 0; k < R; ++k)
            sw(k) = std::sqrt(std::pow(weight(k), p) * std::pow(std::max(std::abs(r(k)), floor_r), p - 2.0));
          const Eigen::VectorXcd next = solve(sw);
          const double obj = objective(next);
          if (obj <= prev) coef = next;
          if (std::abs(prev - obj) <= 1e-8 * std::max(prev, 1e-300)) break;
          prev = std::min(prev, obj);
        }
      }
    }
    fit.chebyshev.assign(coef.data(), coef.data() + coef.size());
    fit.weighted_residual = std::pow(objective(coef) / N, 1.0 / p);
    fit.coeffs = detail::chebyshev_to_monomial(fit.chebyshev, s_max);
    const Eigen::VectorXcd cheb_values = residual(coef) + target;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Complex cheb = cheb_values(static_cast<Eigen::Index>(k));
      fit.conversion_error = std::max(fit.conversion_error, std::abs(detail::horner(fit.coeffs, pc.s[rows[k]]) - cheb));
    }
    if (fit.conversion_error > (conversion_tol > 0.0 ? conversion_tol : 1e-8 * std::max(scale, 1.0)))
      throw NumericalError("monomial form of the degree-" + std::to_string(degree) +
                           " fit is ill-conditioned (error " + std::to_string(fit.conversion_error) +
                           "); lower the degree or re-orthogonalize the basis");
    prune_polynomial(fit.coeffs, s_max, scale);
    fits.push_back(std::move(fit));
  }
  return fits;
}

/// Q = sum_j Q_j(xi^q) xi^j: coefficient m of Q_j lands at xi^{m q + j}.
inline Polynomial assemble_polynomial(const std::vector<Polynomial>& parts, long q) {
  require(q >= 2, "assemble_polynomial needs q >= 2");
  require(static_cast<long>(parts.size()) == q, "need exactly q component polynomials");
  std::size_t len = 0;
  for (long j = 0; j < q; ++j)
    if (!parts[static_cast<std::size_t>(j)].empty())
      len = std::max(len, (parts[static_cast<std::size_t>(j)].size() - 1) * static_cast<std::size_t>(q) + static_cast<std::size_t>(j) + 1);
  Polynomial out(len, Complex(0.0, 0.0));
  for (long j = 0; j < q; ++j) {
    const auto& part = parts[static_cast<std::size_t>(j)];
    for (std::size_t m = 0; m < part.size(); ++m) out[m * static_cast<std::size_t>(q) + static_cast<std::size_t>(j)] = part[m];
  }
  while (!out.empty() && out.back() == Complex(0.0, 0.0)) out.pop_back();
  return out;
}

struct ApproxConfig {
  std::size_t samples = 1 << 14;  // construction grid size N (rounded to a multiple of q)
  double p = 2.0;
  std::size_t degree_cap = 64;
  double tol = 1e-10;             // cyclicity verdict threshold
};

struct ApproxReport {
  RationalRotation rot;
  Polynomial Q;
  double eps = 0.0;
  double p = 2.0;
  std::size_t construction_grid = 0;
  std::size_t verification_grid = 0;
  double truncation_n = 0.0;
  double truncation_residual = 0.0;  // ||g - h||_p
  double omega_measure = 0.0;
  std::size_t flagged_samples = 0;
  double reconstruction_error = 0.0;
  std::vector<std::size_t> component_degrees;
  std::vector<double> component_residuals;  // ||(Q_j(w) - h_j) T^j f||_p
  double stage_bound = 0.0;                 // truncation + sum of components
  double construction_residual = 0.0;       // ||Q(T)f - g||_p on the construction grid
  double verified_residual = 0.0;           // same on the 2x grid
  bool meets_eps = false;
  bool best_effort = false;
  std::vector<std::string> notes;
};

inline void check_cyclicity_weight(const FuncExpr& weight, std::size_t n = 4096) {
  const GridSpec grid(n);
  require(weight(0.0) == Complex(0.0, 0.0), "weight must vanish at 0");
  double prev = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Complex v = weight(grid.point(j));
    require(v.imag() == 0.0, "weight must be real-valued");
    require(v.real() > prev, "weight must be strictly increasing");
    prev = v.real();
  }
}

/// Builds Q with ||Q(T_{r/q}) f - g||_p < eps: truncate g off Omega_n for the
/// smallest n in {2, 4, 8, ...} with ||g - h||_p < eps/2, decompose, fit each
/// component with degrees 0, 1, 2, 4, ... until its weighted residual drops
/// below eps/(2q), assemble, and verify on a grid twice as fine.
inline ApproxReport approx_polynomial(const FuncExpr& f, const FuncExpr& weight, const RationalRotation& rot,
                                      const FuncExpr& g, double eps, const ApproxConfig& cfg = {}) {
  require(eps > 0.0, "eps must be positive");
  require(cfg.p > 1.0 && std::isfinite(cfg.p), "p must satisfy 1 < p < inf");
  check_cyclicity_weight(weight);
  const long q = rot.q;
  const std::size_t M = std::max<std::size_t>(1, (cfg.samples + static_cast<std::size_t>(q) / 2) / static_cast<std::size_t>(q));
  ApproxReport rep;
  rep.rot = rot;
  rep.eps = eps;
  rep.p = cfg.p;
  const RationalOrbit orbit = rational_orbit(f, weight, rot, M);
  const GridSpec grid(orbit.grid_size());
  const GridSpec fine = grid.refined();
  rep.construction_grid = grid.size();
  rep.verification_grid = fine.size();

  const DeltaProfile profile = delta_profile(orbit);
  std::size_t bad = 0;
  for (double rc : profile.rcond) bad += rc <= cfg.tol ? 1 : 0;
  require(bad == 0, "f is not verified cyclic for " + rot.to_string() + " (" + std::to_string(bad) +
                        " degenerate Delta samples); approximation needs a cyclic verdict");

  // Truncation: the smallest n = 2^k with ||g 1_Omega||_p < eps/2.
  const auto gs = sample(g, grid);
  TruncationSet omega;
  std::vector<Complex> h(gs.size());
  bool found = false;
  for (int k = 1; k <= 1000 && !found; ++k) {
    omega = truncation_set(orbit, profile, std::ldexp(1.0, k));
    std::vector<Complex> diff(gs.size(), Complex(0.0, 0.0));
    for (std::size_t m = 0; m < M; ++m)
      for (long i = 0; i < q; ++i) {
        const std::size_t idx = orbit.index(m, i);
        if (omega.member[m]) diff[idx] = gs[idx];
        h[idx] = omega.member[m] ? Complex(0.0, 0.0) : gs[idx];
      }
    rep.truncation_residual = lp_norm(diff, cfg.p);
    if (rep.truncation_residual < eps / 2) {
      found = true;
      rep.truncation_n = omega.n;
    }
  }
  if (!found) throw NumericalError("no truncation level n <= 2^1000 brings ||g - h|| below eps/2");
  rep.omega_measure = omega.measure();

  const PeriodicComponents pc = decompose_target(h, orbit, omega, cfg.p);
  rep.flagged_samples = pc.flagged;
  rep.reconstruction_error = pc.reconstruction_error;

  // Degree escalation, independently per component.
  const double target = eps / (2.0 * static_cast<double>(q));
  std::vector<Polynomial> parts(static_cast<std::size_t>(q));
  rep.component_degrees.assign(static_cast<std::size_t>(q), 0);
  rep.component_residuals.assign(static_cast<std::size_t>(q), std::numeric_limits<double>::infinity());
  std::vector<bool> done(static_cast<std::size_t>(q), false);
  std::vector<std::size_t> degrees{0};
  for (std::size_t d = 1; d <= cfg.degree_cap; d *= 2) degrees.push_back(d);
  // A monomial drift of e moves a weighted residual by at most e * max F_j,
  // so a tenth of the component budget is safe to spend on it.
  double scale = 0.0;
  for (Eigen::Index m = 0; m < pc.h.rows(); ++m)
    for (Eigen::Index j = 0; j < q; ++j) scale = std::max(scale, std::abs(pc.h(m, j)));
  const double f_max = pc.F.size() ? pc.F.maxCoeff() : 0.0;
  const double conversion_tol =
      std::max(1e-8 * std::max(scale, 1.0), f_max > 0.0 ? 0.1 * target / f_max : 0.0);
  for (std::size_t d : degrees) {
    std::vector<PeriodicFit> fits;
    try {
      fits = fit_periodic_polynomials(pc, d, conversion_tol);
    } catch (const NumericalError& e) {
      rep.notes.push_back(std::string("degree escalation stopped: ") + e.what());
      break;
    }
    for (long j = 0; j < q; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (done[ju]) continue;
      if (fits[ju].weighted_residual < rep.component_residuals[ju]) {
        parts[ju] = fits[ju].coeffs;
        rep.component_residuals[ju] = fits[ju].weighted_residual;
        rep.component_degrees[ju] = d;
      }
      if (fits[ju].weighted_residual < target) done[ju] = true;
    }
    if (std::all_of(done.begin(), done.end(), [](bool b) { return b; })) break;
  }
  if (!std::all_of(done.begin(), done.end(), [](bool b) { return b; })) {
    rep.best_effort = true;
    rep.notes.push_back("degree cap reached before every component met eps/(2q)");
  }
  rep.stage_bound = rep.truncation_residual;
  for (double r : rep.component_residuals) rep.stage_bound += r;

  rep.Q = assemble_polynomial(parts, q);
  const OperatorSpec spec{weight, rot.alpha(), cfg.p};
  const auto residual_on = [&](const GridSpec& gr) {
    auto v = apply_polynomial(spec, f, rep.Q, gr);
    const auto gv = sample(g, gr);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= gv[j];
    return lp_norm(v, cfg.p);
  };
  rep.construction_residual = residual_on(grid);
  rep.verified_residual = residual_on(fine);
  rep.meets_eps = rep.verified_residual < eps;
  if (!rep.meets_eps) rep.best_effort = true;
  return rep;
}

struct SpanResidual {
  double residual = 0.0;
  Polynomial coeffs;
  long rank = 0;
  bool regularized = false;
};

/// min over c of ||sum_{k<K} c_k T^k f - g||_p on the grid by direct least
/// squares (p = 2) or reweighted least squares (p != 2).
inline SpanResidual orbit_span_residual(const FuncExpr& f, const OperatorSpec& spec, const FuncExpr& g,
                                        std::size_t K, const GridSpec& grid) {
  require(K >= 1, "K must be >= 1");
  require(spec.p > 1.0 && std::isfinite(spec.p), "p must satisfy 1 < p < inf");
  Eigen::MatrixXcd a = orbit_matrix(spec, f, K, grid);
  const auto gs = sample(g, grid);
  const Eigen::VectorXcd b = Eigen::Map<const Eigen::VectorXcd>(gs.data(), static_cast<Eigen::Index>(gs.size()));
  // Unit-norm columns; zero columns stay zero.
  Eigen::VectorXd colscale = Eigen::VectorXd::Ones(a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double n = a.col(k).norm();
    if (n > 0.0) {
      colscale(k) = 1.0 / n;
      a.col(k) *= colscale(k);
    }
  }
  SpanResidual out;
  const auto solve = [&](const Eigen::VectorXd& sw) {
    const Eigen::MatrixXcd aw = sw.cast<Complex>().asDiagonal() * a;
    const Eigen::VectorXcd bw = sw.cast<Complex>().asDiagonal() * b;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(aw);
    out.rank = qr.rank();
    out.regularized = qr.rank() < aw.cols();
    return Eigen::VectorXcd(qr.solve(bw));
  };
  const auto residual_of = [&](const Eigen::VectorXcd& c) {
    const Eigen::VectorXcd r = a * c - b;
    std::vector<Complex> rv(r.data(), r.data() + r.size());
    return lp_norm(rv, spec.p);
  };
  Eigen::VectorXcd c = solve(Eigen::VectorXd::Ones(a.rows()));
  double best = residual_of(c);
  if (spec.p != 2.0) {
    const double floor_r = 1e-12 * std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    for (int sweep = 0; sweep < 100; ++sweep) {
      const Eigen::VectorXcd r = a * c - b;
      Eigen::VectorXd sw(a.rows());
      for (Eigen::Index k = 0; k < a.rows(); ++k) sw(k) = std::sqrt(std::pow(std::max(std::abs(r(k)), floor_r), spec.p - 2.0));
      const Eigen::VectorXcd next = solve(sw);
      const double res = residual_of(next);
      const bool improved = res < best;
      if (improved) c = next;
      if (std::abs(best - res) <= 1e-8 * std::max(best, 1e-300)) break;
      if (improved) best = res;
    }
  }
  out.residual = best;
  out.coeffs.resize(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < a.cols(); ++k) out.coeffs[static_cast<std::size_t>(k)] = c(k) * colscale(k);
  return out;
}

}  // namespace bishop
