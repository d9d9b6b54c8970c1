#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bishop/cyclicity.hpp"

using namespace bishop;

namespace {

const FuncExpr kOne = parse_function("1");
const FuncExpr kX = parse_function("x");
const FuncExpr kSquare = parse_function("x^2");
const FuncExpr kSplit = parse_function("indicator(1/4, 1/2) + indicator(3/4, 1)");

RationalRotation rot(long r, long q) { return RationalRotation::from(r, q); }

double rel(Complex a, Complex b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(RationalRotation, AutoReduces) {
  const auto r = RationalRotation::from(BigRational(4, 6));
  EXPECT_EQ(r.r, 2);
  EXPECT_EQ(r.q, 3);
  EXPECT_THROW(RationalRotation::from(0, 5), PreconditionError);
  EXPECT_THROW(RationalRotation::from(5, 5), PreconditionError);
}

TEST(DeltaSample, Examples) {
  EXPECT_NEAR(delta_sample(kOne, kX, rot(1, 2), 0.0).value().real(), 0.5, 1e-15);
  EXPECT_TRUE(std::isinf(delta_sample(kX, kX, rot(2, 5), 0.0).log_abs));
  EXPECT_EQ(delta_sample(parse_function("sin(x)"), kSquare, rot(1, 3), 0.0).value(), Complex(0.0, 0.0));
  EXPECT_NEAR(delta_sample(kOne, kX, rot(1, 3), 0.0).value().real(), -4.0 / 27.0, 1e-15);
}

// Delta(x, 1/2)(t) = -t (t + 1/2)/2 by direct 2x2 expansion.
TEST(DeltaSample, LinearFunctionOracle) {
  for (double t : {0.01, 0.1, 0.25, 0.3, 0.49}) {
    EXPECT_NEAR(delta_sample(kX, kX, rot(1, 2), t).value().real(), -t * (t + 0.5) / 2.0, 1e-15);
  }
}

// Delta(1, 1/2)(t) = (t + 1/2) - t = 1/2.
TEST(DeltaSample, ConstantOneHalf) {
  for (double t : {0.0, 0.1, 0.2, 0.3, 0.4, 0.49}) EXPECT_NEAR(delta_sample(kOne, kX, rot(1, 2), t).value().real(), 0.5, 1e-15);
}

TEST(ClosedForm, Examples) {
  EXPECT_NEAR(delta_at_zero_closed_form(kOne, kX, rot(1, 2)).real(), 0.5, 1e-16);
  EXPECT_NEAR(delta_at_zero_closed_form(kOne, kX, rot(1, 3)).real(), -4.0 / 27.0, 1e-16);
  EXPECT_EQ(delta_at_zero_closed_form(kX, kX, rot(1, 3)), Complex(0.0, 0.0));
  EXPECT_THROW(delta_at_zero_closed_form(kOne, parse_function("x + 1"), rot(1, 3)), PreconditionError);
}

TEST(ClosedForm, MatchesLuForSmallQ) {
  for (const char* ft : {"1", "exp(x)", "1 + x", "2 + i*x"}) {
    const auto f = parse_function(ft);
    for (const auto& w : {kX, kSquare}) {
      for (long q = 2; q <= 8; ++q) {
        for (long r = 1; r < q; ++r) {
          if (std::gcd(r, q) != 1) continue;
          const Complex closed = delta_at_zero_closed_form(f, w, rot(r, q));
          const Complex lu = delta_sample(f, w, rot(r, q), 0.0).value();
          ASSERT_GT(std::abs(lu), 0.0);
          EXPECT_LT(rel(closed, lu), 1e-9) << ft << " " << r << "/" << q;
        }
      }
    }
  }
}

TEST(DeltaSample, AbsoluteValueIsPeriodic) {
  for (const char* ft : {"1", "exp(x)", "1 + x^2"}) {
    const auto f = parse_function(ft);
    for (long q : {2L, 3L, 5L, 7L}) {
      for (long r = 1; r < q; ++r) {
        if (std::gcd(r, q) != 1) continue;
        for (double t : {0.013, 0.07, 0.11}) {
          const double tt = t / static_cast<double>(q) * 2.0;
          const double a = delta_sample(f, kX, rot(r, q), tt).log_abs;
          for (long k = 1; k < q; ++k) {
            const double b = delta_sample(f, kX, rot(r, q), tt + static_cast<double>(k) / static_cast<double>(q)).log_abs;
            EXPECT_LT(std::abs(std::expm1(a - b)), 1e-9) << ft << " " << r << "/" << q << " t=" << tt;
          }
        }
      }
    }
  }
}

TEST(DeltaProfile, AgreesWithPointSamples) {
  const auto f = parse_function("exp(x)");
  const auto prof = delta_profile(f, kSquare, rot(2, 5), 40);
  for (std::size_t m = 0; m < prof.t.size(); m += 7) {
    const auto d = delta_sample(f, kSquare, rot(2, 5), prof.t[m]);
    // The grid point and the directly evaluated point differ by one rounding.
    EXPECT_NEAR(d.log_abs, prof.log_abs[m], 1e-12);
    EXPECT_LT(std::abs(d.phase - prof.phase[m]), 1e-12);
  }
}

TEST(CyclicityTest, ConstantOneIsCyclicUpTo12) {
  for (long q = 2; q <= 12; ++q) {
    for (long r = 1; r < q; ++r) {
      if (std::gcd(r, q) != 1) continue;
      const auto rep = cyclicity_test(kOne, kX, rot(r, q), 500);
      EXPECT_EQ(rep.verdict, Verdict::Cyclic) << r << "/" << q;
      // The minimum sits at t -> 0 and approaches the closed form.
      const double closed = std::log(std::abs(delta_at_zero_closed_form(kOne, kX, rot(r, q))));
      EXPECT_GE(rep.profile.min_log_abs, closed - 1e-9);
      EXPECT_NEAR(rep.profile.min_log_abs, closed, 0.05 * std::abs(closed) + 0.05);
    }
  }
}

TEST(CyclicityTest, LinearIsCyclic) {
  EXPECT_EQ(cyclicity_test(kX, kX, rot(1, 2), 1000).verdict, Verdict::Cyclic);
}

TEST(CyclicityTest, SplitIndicatorIsNotCyclic) {
  const auto rep = cyclicity_test(kSplit, kX, rot(1, 2), 1000);
  EXPECT_EQ(rep.verdict, Verdict::NotCyclic);
  for (std::size_t m = 0; m < rep.profile.t.size(); ++m) {
    if (rep.profile.t[m] < 0.25) {
      EXPECT_TRUE(std::isinf(rep.profile.log_abs[m]));
    }
  }
}

TEST(CyclicityTest, IsolatedZeroIsInconclusive) {
  // Delta(t) vanishes iff f(t) = f(t + 1/2) = 0, i.e. for t in [0.1, 0.103):
  // a run of about 3 samples, too short for a not-cyclic verdict.
  const auto f = parse_function("1 - indicator(0.1, 0.103) - indicator(0.6, 0.603)");
  const auto rep = cyclicity_test(f, kX, rot(1, 2), 500);
  EXPECT_EQ(rep.verdict, Verdict::Inconclusive);
  EXPECT_GT(rep.degenerate_fraction, 0.0);
}

TEST(Decompose, OrbitElementTarget) {
  const auto orbit = rational_orbit(kOne, kX, rot(1, 2), 64);
  const auto prof = delta_profile(orbit);
  const auto omega = truncation_set(orbit, prof, 8.0);
  EXPECT_EQ(omega.measure(), 0.0);
  const auto h = sample(kX, GridSpec(orbit.grid_size()));
  const auto pc = decompose_target(h, orbit, omega);
  for (Eigen::Index m = 0; m < pc.h.rows(); ++m) {
    EXPECT_LT(std::abs(pc.h(m, 0)), 1e-14);
    EXPECT_LT(std::abs(pc.h(m, 1) - 1.0), 1e-14);
  }
}

TEST(Decompose, ZeroTarget) {
  const auto orbit = rational_orbit(parse_function("exp(x)"), kX, rot(2, 5), 32);
  const auto prof = delta_profile(orbit);
  const auto omega = truncation_set(orbit, prof, 1e12);
  const auto pc = decompose_target(std::vector<Complex>(orbit.grid_size()), orbit, omega);
  EXPECT_EQ(pc.h.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Decompose, ReconstructionOffOmega) {
  const auto orbit = rational_orbit(parse_function("1 + x"), kSquare, rot(3, 7), 100);
  const auto prof = delta_profile(orbit);
  const auto omega = truncation_set(orbit, prof, 1e20);
  const auto h = sample(parse_function("sin(2*pi*x)*exp(x)"), GridSpec(orbit.grid_size()));
  const auto pc = decompose_target(h, orbit, omega);
  EXPECT_EQ(pc.flagged, 0u);
  EXPECT_LT(pc.reconstruction_error, 1e-9);
  // Independent recombination of the periodic pieces at every grid point.
  double worst = 0.0;
  for (std::size_t m = 0; m < orbit.M; ++m) {
    if (omega.member[m]) continue;
    for (long i = 0; i < 7; ++i) {
      Complex sum(0.0, 0.0);
      for (long j = 0; j < 7; ++j) sum += pc.h(static_cast<Eigen::Index>(m), j) * orbit.columns(static_cast<Eigen::Index>(orbit.index(m, i)), j);
      worst = std::max(worst, std::abs(sum - h[orbit.index(m, i)]));
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Decompose, ComponentsVanishOnOmega) {
  const auto orbit = rational_orbit(kOne, kX, rot(1, 3), 60);
  const auto prof = delta_profile(orbit);
  auto omega = truncation_set(orbit, prof, 8.0);
  for (std::size_t m = 0; m < 10; ++m) omega.member[m] = true;
  const auto pc = decompose_target(sample(kOne, GridSpec(orbit.grid_size())), orbit, omega);
  for (std::size_t m = 0; m < 10; ++m) EXPECT_EQ(pc.h.row(static_cast<Eigen::Index>(m)).cwiseAbs().maxCoeff(), 0.0);
}

namespace {

PeriodicComponents components_for(const FuncExpr& g, long r, long q, std::size_t M = 200) {
  const auto orbit = rational_orbit(kOne, kX, rot(r, q), M);
  const auto prof = delta_profile(orbit);
  const auto omega = truncation_set(orbit, prof, 1e6);
  return decompose_target(sample(g, GridSpec(orbit.grid_size())), orbit, omega);
}

}  // namespace

TEST(Fit, ConstantComponent) {
  const auto pc = components_for(parse_function("2.5"), 1, 3);
  const auto fits = fit_periodic_polynomials(pc, 0);
  ASSERT_EQ(fits[0].coeffs.size(), 1u);
  EXPECT_NEAR(std::abs(fits[0].coeffs[0] - 2.5), 0.0, 1e-12);
  EXPECT_TRUE(fits[1].coeffs.empty());
  EXPECT_LT(fits[0].weighted_residual, 1e-12);
}

TEST(Fit, IdentityInS) {
  // T^2 1 = x {x + 1/2} = w(x) * 1, so h_0 = w.
  const auto pc = components_for(parse_function("x*frac(x + 1/2)"), 1, 2);
  const auto fits = fit_periodic_polynomials(pc, 3);
  ASSERT_EQ(fits[0].coeffs.size(), 2u);
  EXPECT_NEAR(std::abs(fits[0].coeffs[0]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(fits[0].coeffs[1] - 1.0), 0.0, 1e-12);
  EXPECT_LT(fits[0].weighted_residual, 1e-12);
}

TEST(Fit, ResidualNonIncreasingInDegree) {
  for (const char* g : {"sin(2*pi*x)", "exp(x)*cos(5*x)", "indicator(0.2, 0.6)"}) {
    const auto pc = components_for(parse_function(g), 1, 3, 300);
    std::vector<double> prev(3, std::numeric_limits<double>::infinity());
    for (std::size_t d = 0; d <= 12; ++d) {
      const auto fits = fit_periodic_polynomials(pc, d);
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_LE(fits[j].weighted_residual, prev[j] * (1.0 + 1e-9) + 1e-15) << g << " d=" << d;
        prev[j] = fits[j].weighted_residual;
      }
    }
  }
}

TEST(Fit, IllConditionedDegreeThrows) {
  const auto pc = components_for(parse_function("sin(2*pi*x)"), 1, 7, 100);
  EXPECT_THROW(fit_periodic_polynomials(pc, 64), NumericalError);
}

TEST(Assemble, Examples) {
  EXPECT_EQ(assemble_polynomial({{2.0}, {0.0}}, 2), (Polynomial{2.0}));
  EXPECT_EQ(assemble_polynomial({{0.0, 1.0}, {1.0}}, 2), (Polynomial{0.0, 1.0, 1.0}));
  EXPECT_EQ(assemble_polynomial({{}, {}, {}}, 3), Polynomial{});
  EXPECT_THROW(assemble_polynomial({{1.0}}, 2), PreconditionError);
}

TEST(Assemble, DegreeBoundAndInterleaving) {
  for (long q = 2; q <= 6; ++q) {
    std::vector<Polynomial> parts;
    std::size_t maxdeg = 0;
    for (long j = 0; j < q; ++j) {
      Polynomial p;
      for (long m = 0; m <= (j * 3 + 1) % 4; ++m) p.push_back(Complex(static_cast<double>(100 * j + m + 1), 0.0));
      maxdeg = std::max(maxdeg, p.size() - 1);
      parts.push_back(p);
    }
    const auto Q = assemble_polynomial(parts, q);
    EXPECT_LE(Q.size() - 1, static_cast<std::size_t>(q) * maxdeg + static_cast<std::size_t>(q) - 1);
    for (long j = 0; j < q; ++j)
      for (std::size_t m = 0; m < parts[static_cast<std::size_t>(j)].size(); ++m)
        EXPECT_EQ(Q[m * static_cast<std::size_t>(q) + static_cast<std::size_t>(j)], parts[static_cast<std::size_t>(j)][m]);
  }
}

TEST(Approx, TargetEqualsF) {
  const auto rep = approx_polynomial(kOne, kX, rot(1, 3), kOne, 0.05, {.samples = 3000});
  ASSERT_EQ(rep.Q.size(), 1u);
  EXPECT_NEAR(std::abs(rep.Q[0] - 1.0), 0.0, 1e-12);
  EXPECT_LT(rep.verified_residual, 1e-12);
}

TEST(Approx, TargetIsTf) {
  const auto rep = approx_polynomial(kOne, kX, rot(1, 3), kX, 0.05, {.samples = 3000});
  ASSERT_EQ(rep.Q.size(), 2u);
  EXPECT_NEAR(std::abs(rep.Q[0]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(rep.Q[1] - 1.0), 0.0, 1e-12);
  EXPECT_LT(rep.verified_residual, 1e-12);
}

TEST(Approx, SineTargetVerifiedOnFinerGrid) {
  const auto g = parse_function("sin(2*pi*x)");
  const auto rep = approx_polynomial(kOne, kX, rot(1, 3), g, 0.05, {.samples = 6000});
  EXPECT_TRUE(rep.meets_eps);
  EXPECT_LT(rep.verified_residual, 0.05);
  EXPECT_GE(rep.verification_grid, 2 * rep.construction_grid);
  // Independent recomputation of the verified residual.
  const GridSpec fine(rep.verification_grid);
  auto v = apply_polynomial(bishop_operator(rot(1, 3).alpha()), kOne, rep.Q, fine);
  const auto gs = sample(g, fine);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] -= gs[j];
  EXPECT_NEAR(lp_norm(v, 2.0), rep.verified_residual, 1e-12);
  // The orbit span of the same length can only do better.
  const auto span = orbit_span_residual(kOne, bishop_operator(rot(1, 3).alpha()), g, rep.Q.size(), fine);
  EXPECT_LE(span.residual, rep.verified_residual + 1e-9);
}

TEST(Approx, WeightedAndNonQuadratic) {
  const auto rep = approx_polynomial(parse_function("1 + x"), kSquare, rot(1, 2), parse_function("cos(2*pi*x)"), 0.1,
                                     {.samples = 4000, .p = 3.0});
  EXPECT_LT(rep.verified_residual, 0.1);
}

TEST(Approx, Preconditions) {
  EXPECT_THROW(approx_polynomial(kOne, kX, rot(1, 3), kX, 0.0), PreconditionError);
  EXPECT_THROW(approx_polynomial(kOne, kX, rot(1, 3), kX, -1.0), PreconditionError);
  EXPECT_THROW(approx_polynomial(kSplit, kX, rot(1, 2), kOne, 0.1, {.samples = 2000}), PreconditionError);
  EXPECT_THROW(approx_polynomial(kOne, parse_function("1 - x"), rot(1, 2), kOne, 0.1), PreconditionError);
}

TEST(SpanResidual, TargetInSpan) {
  const GridSpec grid(2048);
  EXPECT_LT(orbit_span_residual(kOne, bishop_operator(rot(1, 3).alpha()), kOne, 1, grid).residual, 1e-14);
  EXPECT_LT(orbit_span_residual(kOne, bishop_operator(rot(1, 3).alpha()), kX, 2, grid).residual, 1e-14);
}

TEST(SpanResidual, NestedSpansNeverWorse) {
  const GridSpec grid(3000);
  for (const char* g : {"sin(2*pi*x)", "x^2", "indicator(0.1, 0.4)"}) {
    for (const auto& alpha : {rot(1, 3).alpha(), rot(2, 7).alpha(), AlphaValue::continued_fraction(std::vector<BigInt>(20, 1))}) {
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t K = 1; K <= 30; ++K) {
        const double r = orbit_span_residual(parse_function("1 + x"), bishop_operator(alpha), parse_function(g), K, grid).residual;
        EXPECT_LE(r, prev + 1e-12) << g << " K=" << K;
        prev = std::min(prev, r);
      }
    }
  }
}

TEST(SpanResidual, VanishingSetObstruction) {
  const GridSpec grid(4000);
  for (std::size_t K : {1u, 5u, 20u, 50u}) {
    const auto res = orbit_span_residual(kSplit, bishop_operator(rot(1, 2).alpha()), kOne, K, grid);
    EXPECT_GE(res.residual, 0.5);
  }
}
