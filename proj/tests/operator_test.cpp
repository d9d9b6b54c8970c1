#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "bishop/operator.hpp"

using namespace bishop;

namespace {

AlphaValue rat(long n, long d) { return AlphaValue::rational(BigRational(n, d)); }

PointLattice at(long n, long d) { return PointLattice::single(BigRational(n, d)); }

OperatorSpec weighted(const char* weight, const AlphaValue& alpha) { return {parse_function(weight), alpha, 2.0}; }

const char* kFunctions[] = {"1", "x", "exp(x)", "sin(2*pi*x) + 2", "indicator(1/4, 1/2) + x^3", "(1 + i)*x - 1/3"};

}  // namespace

TEST(Apply, Examples) {
  EXPECT_EQ(apply(bishop_operator(rat(1, 4)), parse_function("1"), at(1, 2))[0], Complex(0.5, 0.0));
  EXPECT_DOUBLE_EQ(apply(bishop_operator(rat(1, 4)), parse_function("x"), at(9, 10))[0].real(), 0.135);
  EXPECT_DOUBLE_EQ(apply(weighted("x^2", rat(1, 2)), parse_function("1"), at(3, 10))[0].real(), 0.09);
}

TEST(Iterate, Examples) {
  const auto s = iterate(bishop_operator(rat(1, 2)), parse_function("1"), 2, at(1, 4));
  EXPECT_DOUBLE_EQ(s.values[0].real(), 0.1875);
  const GridSpec grid(64);
  const auto f = parse_function("exp(x)");
  const auto zero = iterate(bishop_operator(rat(2, 7)), f, 0, grid);
  for (std::size_t j = 0; j < grid.size(); ++j) EXPECT_EQ(zero.values[j], f(grid.point(j)));
}

TEST(Iterate, DeepIteratesStayInLogForm) {
  const GridSpec grid(256);
  const auto s = iterate(bishop_operator(AlphaValue::continued_fraction(std::vector<BigInt>(40, 1))),
                         parse_function("1"), 2000, grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    EXPECT_TRUE(std::isfinite(s.log_magnitude[j]));
    EXPECT_LT(s.log_magnitude[j], -700.0);
    EXPECT_EQ(s.values[j], Complex(0.0, 0.0));
    EXPECT_NEAR(std::abs(s.cocycle[j].phase), 1.0, 1e-15);
  }
}

TEST(Iterate, LogFormMatchesDirectProduct) {
  const GridSpec grid(50);
  const auto alpha = rat(3, 11);
  const auto s = iterate(bishop_operator(alpha), parse_function("1"), 40, grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const BigRational x(2 * static_cast<long>(j) + 1, 100);
    double log_direct = 0.0;
    for (long k = 0; k < 40; ++k) log_direct += std::log(frac_shift(x, k, alpha));
    EXPECT_NEAR(s.log_magnitude[j], log_direct, 1e-11 * std::abs(log_direct));
  }
}

TEST(Iterate, OneStepIsApplyBitForBit) {
  const GridSpec grid(301);
  for (const char* text : kFunctions) {
    for (const char* weight : {"x", "x^2", "exp(x) - 1", "1 + i*x"}) {
      const auto spec = weighted(weight, rat(5, 13));
      const auto a = apply(spec, parse_function(text), grid);
      const auto b = iterate(spec, parse_function(text), 1, grid).values;
      ASSERT_EQ(a.size(), b.size());
      EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(Complex)), 0) << text << " / " << weight;
    }
  }
}

// T^q f = w f for rational alpha = r/q, with w(x) = prod_k phi({x + k/q}).
TEST(Iterate, RationalPeriodIsMultiplication) {
  const GridSpec grid(997);
  for (long q = 2; q <= 9; ++q) {
    for (long r = 1; r < q; ++r) {
      if (std::gcd(r, q) != 1) continue;
      for (const char* weight : {"x", "x^2", "sqrt(x)"}) {
        const auto spec = weighted(weight, rat(r, q));
        const auto phi = parse_function(weight);
        const auto f = parse_function("exp(x) + x");
        const auto s = iterate(spec, f, static_cast<std::size_t>(q), grid);
        for (std::size_t j = 0; j < grid.size(); ++j) {
          const BigRational x(2 * static_cast<long>(j) + 1, 2 * 997);
          Complex w(1.0, 0.0);
          for (long k = 0; k < q; ++k) w *= phi(to_double(frac_part(x + BigRational(k, q))));
          const Complex expected = w * f(grid.point(j));
          EXPECT_LE(std::abs(s.values[j] - expected), 1e-12 * std::abs(expected)) << r << "/" << q;
        }
      }
    }
  }
}

TEST(Iterate, BishopOrbitsAreBounded) {
  const GridSpec grid(4000);
  for (const char* text : kFunctions) {
    const auto f = parse_function(text);
    const auto fs = sample(f, grid);
    double sup = 0.0;
    for (const auto& v : fs) sup = std::max(sup, std::abs(v));
    const double base = lp_norm(fs, 2.0);
    for (const auto& alpha : {rat(1, 3), rat(7, 19), AlphaValue::continued_fraction(std::vector<BigInt>(30, 1))}) {
      for (std::size_t n : {1u, 2u, 5u, 17u, 100u}) {
        const double norm = lp_norm(iterate(bishop_operator(alpha), f, n, grid).values, 2.0);
        EXPECT_LE(norm, base + 4.0 * sup / static_cast<double>(grid.size())) << text << " n=" << n;
      }
    }
  }
}

TEST(Apply, NormBoundedBySupOfWeight) {
  const GridSpec grid(4000);
  for (const char* weight : {"x", "2*x^2", "1 + sin(2*pi*x)"}) {
    const auto spec = weighted(weight, rat(2, 5));
    const auto wsamples = sample(spec.weight, grid);
    double sup_w = 0.0;
    for (const auto& v : wsamples) sup_w = std::max(sup_w, std::abs(v));
    for (const char* text : kFunctions) {
      const auto fs = sample(parse_function(text), grid);
      double sup_f = 0.0;
      for (const auto& v : fs) sup_f = std::max(sup_f, std::abs(v));
      const double lhs = lp_norm(apply(spec, parse_function(text), grid), 2.0);
      EXPECT_LE(lhs, sup_w * lp_norm(fs, 2.0) + 4.0 * sup_w * sup_f / 4000.0) << weight << " " << text;
    }
  }
}

TEST(Adjoint, Examples) {
  EXPECT_DOUBLE_EQ(apply_adjoint(bishop_operator(rat(1, 4)), parse_function("1"), at(1, 10))[0].real(), 0.85);
  EXPECT_EQ(apply_adjoint(bishop_operator(rat(1, 4)), parse_function("1"), at(1, 4))[0], Complex(0.0, 0.0));
  EXPECT_DOUBLE_EQ(apply_adjoint(weighted("x^2", rat(1, 2)), parse_function("1"), at(3, 4))[0].real(), 0.0625);
}

TEST(Adjoint, DualityAtP2) {
  const GridSpec grid(8192);
  const char* gs[] = {"x", "cos(2*pi*x)", "exp(-x)", "indicator(0.2, 0.7)"};
  for (const auto& alpha : {rat(1, 4), rat(3, 7), AlphaValue::continued_fraction(std::vector<BigInt>(25, 1))}) {
    for (const char* weight : {"x", "x^2 + 1"}) {
      const auto spec = weighted(weight, alpha);
      for (const char* ft : kFunctions) {
        for (const char* gt : gs) {
          const auto tf = apply(spec, parse_function(ft), grid);
          const auto g = sample(parse_function(gt), grid);
          const auto f = sample(parse_function(ft), grid);
          const auto tg = apply_adjoint(spec, parse_function(gt), grid);
          Complex lhs(0.0, 0.0), rhs(0.0, 0.0);
          for (std::size_t j = 0; j < grid.size(); ++j) {
            lhs += tf[j] * g[j];
            rhs += f[j] * tg[j];
          }
          lhs /= static_cast<double>(grid.size());
          rhs /= static_cast<double>(grid.size());
          EXPECT_LE(std::abs(lhs - rhs), 8.0 * 4.0 / static_cast<double>(grid.size())) << ft << " " << gt;
        }
      }
    }
  }
}

TEST(OrbitMatrix, ColumnsAreIterates) {
  const GridSpec grid(123);
  const auto spec = weighted("x^2 + x", rat(5, 17));
  const auto f = parse_function("cos(x) + i*x");
  const auto m = orbit_matrix(spec, f, 9, grid);
  for (std::size_t k = 0; k < 9; ++k) {
    const auto s = iterate(spec, f, k, grid).values;
    for (std::size_t j = 0; j < grid.size(); ++j)
      EXPECT_EQ(m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)), s[j]);
  }
}

TEST(ApplyPolynomial, MatchesOrbitCombination) {
  const GridSpec grid(200);
  const auto spec = bishop_operator(rat(2, 9));
  const auto f = parse_function("1 + x");
  const std::vector<Complex> c{{1.0, 0.0}, {0.0, 0.0}, {-2.0, 0.5}, {3.0, 0.0}};
  const auto q = apply_polynomial(spec, f, c, grid);
  const auto m = orbit_matrix(spec, f, 4, grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    Complex expected(0.0, 0.0);
    for (Eigen::Index k = 0; k < 4; ++k) expected += c[static_cast<std::size_t>(k)] * m(static_cast<Eigen::Index>(j), k);
    EXPECT_NEAR(std::abs(q[j] - expected), 0.0, 1e-15);
  }
}

TEST(PowerNorm, Examples) {
  const GridSpec grid(100000);
  EXPECT_NEAR(power_norm(bishop_operator(rat(1, 3)), 3, grid).value, 6.0 / 27.0, 1e-4);
  const auto one = power_norm(bishop_operator(rat(2, 5)), 1, grid);
  EXPECT_NEAR(one.value, 1.0, 1e-5);
  EXPECT_TRUE(one.converged);
  EXPECT_NEAR(power_norm(bishop_operator(rat(0, 1)), 25, grid).value, 1.0, 1e-3);
}

TEST(SpectralRadius, Rational) {
  const GridSpec grid(100000);
  for (std::size_t n : {3u, 6u, 30u}) {
    EXPECT_NEAR(spectral_radius_estimate(bishop_operator(rat(1, 3)), n, grid), std::cbrt(6.0 / 27.0), 1e-4);
  }
  EXPECT_NEAR(spectral_radius_estimate(bishop_operator(rat(0, 1)), 10, grid), 1.0, 1e-5);
}

TEST(SpectralRadius, GoldenSmallScale) {
  const auto golden = AlphaValue::continued_fraction(std::vector<BigInt>(40, 1));
  const double rho = spectral_radius_estimate(bishop_operator(golden), 500, GridSpec(20000));
  EXPECT_GT(rho, 0.35);
  EXPECT_LT(rho, 0.42);
}
