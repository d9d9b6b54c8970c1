#include <gtest/gtest.h>

#include <cmath>

#include "bishop/probes.hpp"

using namespace bishop;

namespace {

const FuncExpr kX = parse_function("x");
const ContinuedFraction kGolden(std::vector<BigInt>(40, 1));

}  // namespace

TEST(PeriodicWeight, Examples) {
  const auto pw = periodic_weight(2, kX, 1000);
  EXPECT_EQ(pw.w[0], 0.0);
  EXPECT_NEAR(pw.w[500], 0.25 * 0.75, 1e-15);  // x = 1/4
  EXPECT_DOUBLE_EQ(pw.x[500], 0.25);
}

TEST(PeriodicWeight, StrictlyIncreasingUpTo10) {
  for (long q = 2; q <= 10; ++q) {
    const auto pw = periodic_weight(q, kX, 5000);
    EXPECT_GT(pw.min_forward_difference, 0.0) << q;
    EXPECT_EQ(pw.violations, 0u);
  }
}

TEST(PeriodicWeight, IterateQEqualsWTimesF) {
  const auto f = parse_function("exp(x) + i*x");
  for (long q = 2; q <= 8; ++q) {
    for (const auto& w : {kX, parse_function("x^2"), parse_function("sqrt(x)")}) {
      const OperatorSpec spec{w, AlphaValue::rational(1, q)};
      const GridSpec grid(997);
      const auto it = iterate(spec, f, static_cast<std::size_t>(q), grid);
      for (std::size_t j = 0; j < grid.size(); j += 13) {
        const double x = grid.point(j);
        // w is 1/q-periodic: reduce x into [0, 1/q) first.
        const double xr = x - std::floor(x * static_cast<double>(q)) / static_cast<double>(q);
        const Complex expected = detail::periodic_weight_at(q, w, xr) * f(x);
        EXPECT_LT(std::abs(it.values[j] - expected), 1e-12 * std::abs(expected) + 1e-300) << q;
      }
    }
  }
}

TEST(EigenProbe, QuadraticRootExample) {
  // x^2 + x/2 = 0.09 at x = (-1/2 + sqrt(0.61))/2.
  const double root = (-0.5 + std::sqrt(0.61)) / 2.0;
  EXPECT_NEAR(root, 0.1405, 1e-4);
  double prev = 1.0;
  for (double tol : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const auto probe = eigen_levelset_probe(2, kX, {0.3}, tol, 200000);
    const auto& row = probe.rows[0];
    EXPECT_FALSE(row.empty);
    EXPECT_LE(row.measure, row.bound);
    EXPECT_LT(row.measure, prev);
    prev = row.measure;
  }
  EXPECT_LT(prev, 1e-4);
}

TEST(EigenProbe, OutOfRangeLevelIsEmpty) {
  // sup w = 1/2 for q = 2; lambda^2 = 0.81 lies beyond it.
  const auto probe = eigen_levelset_probe(2, kX, {0.9, Complex(0.0, 0.9), Complex(0.5, 0.5)}, 1e-3, 10000);
  for (const auto& row : probe.rows) {
    EXPECT_TRUE(row.empty);
    EXPECT_EQ(row.measure, 0.0);
  }
}

TEST(EigenProbe, MeasureScalesLinearlyInTol) {
  for (long q = 2; q <= 6; ++q) {
    const double lam = std::pow(0.5 * rational_spectral_radius(q) * rational_spectral_radius(q), 0.5);
    const auto a = eigen_levelset_probe(q, kX, {lam}, 1e-4, 400000);
    const auto b = eigen_levelset_probe(q, kX, {lam}, 4e-4, 400000);
    ASSERT_GT(a.rows[0].measure, 0.0) << q;
    EXPECT_NEAR(b.rows[0].measure / a.rows[0].measure, 4.0, 0.8) << q;
    EXPECT_NEAR(a.rows[0].measure / a.rows[0].predicted, 1.0, 0.2) << q;
    EXPECT_LE(a.rows[0].measure, a.rows[0].bound);
  }
}

TEST(EigenProbe, RandomLambdasStayInDisk) {
  const auto pts = random_disk_points(500, 7);
  for (const auto& z : pts) EXPECT_LE(std::abs(z), 1.0);
  EXPECT_EQ(pts, random_disk_points(500, 7));
  const auto probe = eigen_levelset_probe(3, kX, pts, 1e-3, 20000);
  for (const auto& row : probe.rows) {
    EXPECT_GE(row.measure, 0.0);
    EXPECT_LE(row.measure, row.bound);
  }
}

TEST(SpectralRadius, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(rational_spectral_radius(1), 1.0);
  EXPECT_NEAR(rational_spectral_radius(3), std::cbrt(6.0 / 27.0), 1e-14);
  EXPECT_NEAR(rational_spectral_radius(3), 0.60571, 1e-5);
  EXPECT_NEAR(rational_spectral_radius(50), stirling_spectral_radius(50), 0.02 * stirling_spectral_radius(50));
}

TEST(SpectralRadius, MonotoneTowardInverseE) {
  for (long q = 2; q < 60; ++q) {
    EXPECT_LE(rational_spectral_radius(q + 1), rational_spectral_radius(q));
    EXPECT_GT(rational_spectral_radius(q), std::exp(-1.0));
    EXPECT_NEAR(rational_spectral_radius(q) / stirling_spectral_radius(q), 1.0, 1.01 / (12.0 * static_cast<double>(q * q)));
  }
}

TEST(SpectralRadius, MatchesPowerNorm) {
  for (long q = 2; q <= 10; ++q) {
    const auto est = power_norm(bishop_operator(AlphaValue::rational(1, q)), static_cast<std::size_t>(q), GridSpec(100000), false);
    EXPECT_NEAR(std::pow(est.value, 1.0 / static_cast<double>(q)), rational_spectral_radius(q), 1e-4) << q;
  }
}

TEST(ConvexBound, Examples) {
  const auto lin = convex_product_bound_check(kX, 0.0, 1.0, 10000);
  EXPECT_TRUE(lin.preconditions_ok);
  EXPECT_NEAR(lin.measure, 0.5, 1e-3);
  EXPECT_TRUE(lin.pass);
  const auto zero = convex_product_bound_check(parse_function("0"), 0.0, 0.3, 10000);
  EXPECT_TRUE(zero.pass);
  EXPECT_NEAR(zero.measure, 0.3, 1e-12);
  const auto sq = convex_product_bound_check(parse_function("x^2"), 0.0, 1.0, 10000);
  EXPECT_NEAR(sq.measure, std::sqrt(0.5), 1e-3);
  EXPECT_TRUE(sq.pass);
}

TEST(ConvexBound, PreconditionsReported) {
  EXPECT_FALSE(convex_product_bound_check(parse_function("sqrt(x)"), 0.0, 1.0, 1000).preconditions_ok);
  EXPECT_FALSE(convex_product_bound_check(parse_function("x + 1"), 0.0, 1.0, 1000).preconditions_ok);
  EXPECT_FALSE(convex_product_bound_check(parse_function("1 - x"), 0.0, 1.0, 1000).preconditions_ok);
  const auto skipped = convex_product_bound_check(parse_function("sqrt(x)"), 0.0, 1.0, 1000);
  EXPECT_FALSE(skipped.pass);
  EXPECT_FALSE(skipped.precondition_failure.empty());
}

TEST(ConvexBound, SeededRandomProducts) {
  const auto products = random_convex_products(20, 0);
  ASSERT_EQ(products.size(), 20u);
  for (const auto& p : products) {
    const auto c = convex_product_bound_check(parse_function(p.expression), p.a, p.b, 20000);
    EXPECT_TRUE(c.preconditions_ok) << p.expression << ": " << c.precondition_failure;
    EXPECT_TRUE(c.pass) << p.expression;
  }
  EXPECT_EQ(random_convex_products(20, 0)[7].expression, products[7].expression);
  EXPECT_NE(random_convex_products(20, 1)[7].expression, products[7].expression);
}

TEST(ConvexBound, GoldenCocycles) {
  const auto rows = cocycle_convex_checks(kGolden, std::exp(-1.0), 233, 1000);
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows.back().q, 233);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.pass) << r.q;
    EXPECT_EQ(r.intervals, static_cast<std::size_t>(r.q));
  }
}

TEST(Invariance, ConstantIsExact) {
  const auto r = supercyclicity_invariance(parse_function("1"), bishop_operator(AlphaValue::rational(1, 3)), 5, 3.0,
                                           GridSpec(1000));
  EXPECT_EQ(r.measure_f, 1.0);
  EXPECT_EQ(r.measure_iterate, 1.0);
  EXPECT_EQ(r.deviation, 0.0);
}

TEST(Invariance, WithinFiveOverN) {
  const GridSpec grid(20000);
  const double N = 20000.0;
  for (const char* f : {"x - 1/2", "cos(2*pi*x) - 0.3"}) {
    for (const auto& alpha : {AlphaValue::rational(1, 3), kGolden.alpha()}) {
      for (std::size_t n : {1u, 7u, 100u}) {
        for (double a : {0.5, 2.0, 7.0}) {
          const auto r = supercyclicity_invariance(parse_function(f), bishop_operator(alpha), n, a, grid);
          EXPECT_LE(r.deviation, 5.0 / N) << f << " n=" << n;
          EXPECT_TRUE(r.pass);
        }
      }
    }
  }
}

TEST(Invariance, SignSurvivesUnderflow) {
  // |T^n f| ~ e^{-n} underflows long before n = 5000; the sign must not.
  const auto r = supercyclicity_invariance(parse_function("x - 1/2"), bishop_operator(kGolden.alpha()), 5000, 1.0,
                                           GridSpec(4000));
  EXPECT_LE(r.deviation, 5.0 / 4000.0);
}

TEST(Invariance, Preconditions) {
  EXPECT_THROW(supercyclicity_invariance(kX, bishop_operator(AlphaValue::rational(1, 3)), 1, 0.0, GridSpec(100)),
               PreconditionError);
  const OperatorSpec signed_weight{parse_function("x - 1/2"), AlphaValue::rational(1, 3)};
  EXPECT_THROW(supercyclicity_invariance(kX, signed_weight, 1, 1.0, GridSpec(100)), PreconditionError);
}

TEST(Obstruction, HalfZeroSet) {
  const OperatorSpec spec{parse_function("indicator(1/2, 1)*(x - 1/2)"), kGolden.alpha()};
  for (const char* f : {"1", "exp(x)", "sin(2*pi*x)"}) {
    const auto r = orbit_obstruction(spec, parse_function(f), 3, GridSpec(10000));
    EXPECT_NEAR(r.rhs, 0.5, 1e-3);
    EXPECT_GE(r.lhs, 0.5 - 1e-3);
    EXPECT_TRUE(r.pass);
    EXPECT_FALSE(r.vacuous);
  }
}

TEST(Obstruction, ZeroFunctionIsExact) {
  const OperatorSpec spec{parse_function("indicator(1/2, 1)*(x - 1/2)"), AlphaValue::rational(1, 3)};
  const auto r = orbit_obstruction(spec, parse_function("0"), 2, GridSpec(1000));
  EXPECT_EQ(r.lhs, r.rhs);
}

TEST(Obstruction, Contract) {
  const OperatorSpec spec{parse_function("indicator(1/2, 1)"), AlphaValue::rational(1, 3)};
  EXPECT_THROW(orbit_obstruction(spec, kX, 0, GridSpec(100)), PreconditionError);
  const auto vacuous = orbit_obstruction(bishop_operator(AlphaValue::rational(1, 3)), kX, 1, GridSpec(100));
  EXPECT_TRUE(vacuous.vacuous);
}

TEST(UnitDelta, Examples) {
  const auto rows = unit_delta_conjecture_probe(3, 400);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].q, 2);
  EXPECT_NEAR(rows[0].min_abs, 0.5, 1e-14);
  EXPECT_EQ(rows[0].violations, 0u);
  EXPECT_EQ(rows[1].r, 1);
  EXPECT_EQ(rows[1].q, 3);
  EXPECT_NEAR(rows[1].delta0_closed.real(), -4.0 / 27.0, 1e-15);
  EXPECT_TRUE(rows[1].closed_form_ok);
}

TEST(UnitDelta, ClosedFormsUpTo12) {
  const auto rows = unit_delta_conjecture_probe(12, 200);
  std::size_t expected = 0;
  for (long q = 2; q <= 12; ++q)
    for (long r = 1; r < q; ++r) expected += std::gcd(r, q) == 1 ? 1 : 0;
  ASSERT_EQ(rows.size(), expected);
  for (const auto& row : rows) {
    EXPECT_TRUE(row.closed_form_ok) << row.r << "/" << row.q;
    EXPECT_GT(row.min_abs, 0.0);
  }
}
