#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "bishop/expr.hpp"

using bishop::Complex;
using bishop::parse_function;

namespace {

bool same_bits(Complex a, Complex b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

}  // namespace

TEST(Parse, ConstantLiteral) {
  const auto e = parse_function("1");
  ASSERT_EQ(e.nodes().size(), 1u);
  EXPECT_EQ(e.nodes()[0].op, bishop::FuncExpr::Op::Constant);
  EXPECT_EQ(e(0.37), Complex(1.0, 0.0));
}

TEST(Parse, PolynomialEvaluates) {
  EXPECT_DOUBLE_EQ(parse_function("x^2 + 1")(0.5).real(), 1.25);
}

TEST(Parse, TrailingOperatorReportsOffset) {
  try {
    parse_function("x +");
    FAIL() << "expected ParseError";
  } catch (const bishop::ParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
  }
}

TEST(Parse, RejectsBadIndicatorBounds) {
  EXPECT_THROW(parse_function("indicator(0.5, 0.25)"), bishop::ParseError);
  EXPECT_THROW(parse_function("indicator(-0.1, 0.5)"), bishop::ParseError);
  EXPECT_THROW(parse_function("indicator(0, 1.5)"), bishop::ParseError);
  EXPECT_THROW(parse_function("indicator(x, 1)"), bishop::ParseError);
}

TEST(Parse, RejectsMalformedInput) {
  EXPECT_THROW(parse_function(""), bishop::ParseError);
  EXPECT_THROW(parse_function("foo(x)"), bishop::ParseError);
  EXPECT_THROW(parse_function("(x"), bishop::ParseError);
  EXPECT_THROW(parse_function("x y"), bishop::ParseError);
}

TEST(Parse, WhitespaceInsensitive) {
  const auto a = parse_function("  x ^ 2+sin( x )");
  const auto b = parse_function("x^2 + sin(x)");
  EXPECT_EQ(a.to_string(), b.to_string());
}

TEST(Evaluate, Indicator) {
  const auto e = parse_function("indicator(0.25, 0.5)");
  EXPECT_EQ(e(0.3), Complex(1.0, 0.0));
  EXPECT_EQ(e(0.6), Complex(0.0, 0.0));
  EXPECT_EQ(e(0.25), Complex(1.0, 0.0));
  EXPECT_EQ(e(0.5), Complex(0.0, 0.0));
}

TEST(Evaluate, ExpAtOne) {
  EXPECT_NEAR(parse_function("exp(x)")(1.0).real(), 2.718281828459045, 1e-15);
}

TEST(Evaluate, ComplexUnit) {
  const auto v = parse_function("exp(2*pi*i*x)")(0.25);
  EXPECT_NEAR(v.real(), 0.0, 1e-15);
  EXPECT_NEAR(v.imag(), 1.0, 1e-15);
}

TEST(Evaluate, FractionLiteralIsExact) {
  EXPECT_EQ(parse_function("3/7")(0.0).real(), 3.0 / 7.0);
  EXPECT_EQ(parse_function("frac(x + 3/4)")(0.5).real(), 0.25);
}

TEST(Evaluate, DomainErrors) {
  EXPECT_THROW(parse_function("log(x)")(0.0), bishop::DomainError);
  EXPECT_THROW(parse_function("log(x - 1)")(0.5), bishop::DomainError);
  EXPECT_THROW(parse_function("1/x")(0.0), bishop::DomainError);
  EXPECT_THROW(parse_function("sqrt(x - 1)")(0.5), bishop::DomainError);
  EXPECT_THROW(parse_function("x")(1.5), bishop::DomainError);
}

TEST(Evaluate, ExactRationalPath) {
  const auto e = parse_function("x^2 + 1/3");
  const auto v = e.evaluate_exact(bishop::BigRational(1, 2));
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(*v, bishop::BigRational(7, 12));
  EXPECT_FALSE(parse_function("exp(x)").evaluate_exact(bishop::BigRational(1, 2)).has_value());
}

TEST(Evaluate, ExpressionExponentInVariableQ) {
  const auto psi = parse_function("2^q", "q");
  EXPECT_EQ(psi.evaluate_exact(bishop::BigRational(10)), bishop::BigRational(1024));
}

TEST(Print, RoundTripIsFixedPoint) {
  const char* inputs[] = {
      "1", "x", "x^2 + 1", "-x^2", "(-x)^2", "x - (x - 1)", "x/(2*x + 1)", "2^-3*x",
      "exp(x)*sin(2*pi*x) - cos(x)/3", "indicator(1/4, 1/2) + indicator(3/4, 1)",
      "frac(x + 0.3)", "sqrt(x + 1)^3", "(1 + i)*x", "-(x + 1)", "x - -x", "1/(x*x + 1)",
  };
  for (const char* text : inputs) {
    const auto e = parse_function(text);
    const std::string once = e.to_string();
    const auto again = parse_function(once);
    EXPECT_EQ(again.to_string(), once) << text;
    for (double x : {0.0, 0.125, 0.3, 0.5, 0.77, 1.0}) {
      EXPECT_TRUE(same_bits(e(x), again(x))) << text << " at " << x;
    }
  }
}

// Seeded random expression trees: printing then reparsing must preserve
// values bit-for-bit.
TEST(Print, RandomTreesRoundTrip) {
  std::mt19937_64 rng(7);
  const auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    if (depth == 0 || pick(3) == 0) {
      switch (pick(4)) {
        case 0: return "x";
        case 1: return std::to_string(pick(9) + 1);
        case 2: return std::to_string(pick(9) + 1) + "/" + std::to_string(pick(9) + 1);
        default: return "0.5";
      }
    }
    switch (pick(7)) {
      case 0: return "(" + gen(depth - 1) + " + " + gen(depth - 1) + ")";
      case 1: return "(" + gen(depth - 1) + " - " + gen(depth - 1) + ")";
      case 2: return gen(depth - 1) + "*" + gen(depth - 1);
      case 3: return "-" + gen(depth - 1);
      case 4: return "(" + gen(depth - 1) + ")^" + std::to_string(pick(3) + 1);
      case 5: return "sin(" + gen(depth - 1) + ")";
      default: return "exp(" + gen(depth - 1) + ")/" + std::to_string(pick(5) + 2);
    }
  };
  for (int trial = 0; trial < 300; ++trial) {
    const std::string text = gen(4);
    const auto e = parse_function(text);
    const auto again = parse_function(e.to_string());
    EXPECT_EQ(again.to_string(), e.to_string()) << text;
    for (double x : {0.0, 0.3, 0.9}) {
      Complex a, b;
      try {
        a = e(x);
      } catch (const bishop::DomainError&) {
        EXPECT_THROW(again(x), bishop::DomainError);
        continue;
      }
      b = again(x);
      EXPECT_TRUE(same_bits(a, b)) << text;
    }
  }
}
