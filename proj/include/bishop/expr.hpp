#pragma once

// Complex-valued functions of one real variable: parse, print, evaluate.
//
// Grammar (whitespace-insensitive):
//   expr     := term (('+' | '-') term)*
//   term     := factor (('*' | '/') factor)*
//   factor   := '-' factor | power
//   power    := base ('^' exponent)?
//   exponent := '-'? base
//   base     := number | 'i' | 'pi' | var | name '(' args ')' | '(' expr ')'
// Names: exp, log, sqrt, sin, cos, frac, indicator.  indicator(a, b) is the
// half-open set [a, b) with constant bounds 0 <= a < b <= 1.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bishop/error.hpp"
#include "bishop/rational.hpp"

namespace bishop {

using Complex = std::complex<double>;

namespace detail {
class ExprParser;
}

class FuncExpr {
 public:
  enum class Op : std::uint8_t {
    Constant, Imag, Pi, Var,
    Add, Sub, Mul, Div, Pow, Neg,
    Exp, Log, Sqrt, Sin, Cos, Frac, Indicator,
  };

  struct Node {
    Op op = Op::Constant;
    int lhs = -1;
    int rhs = -1;
    double value = 0.0;   // Constant: literal value; Indicator: lower bound
    double upper = 0.0;   // Indicator: upper bound
    std::string literal;  // Constant: source text
  };

  FuncExpr() = default;

  /// Evaluates at a point of [0, 1].
  Complex operator()(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("evaluation point outside [0, 1]: " + std::to_string(x));
    return evaluate_unrestricted(x);
  }

  /// Evaluates at any real point (used for growth functions of integers).
  Complex evaluate_unrestricted(double x) const {
    const Complex v = eval(root_, x);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw DomainError("non-finite value in '" + to_string() + "'");
    return v;
  }

  /// Exact value for rational-arithmetic expressions; nullopt when a
  /// transcendental function, pi or i is involved.
  std::optional<BigRational> evaluate_exact(const BigRational& x) const { return eval_exact(root_, x); }

  std::string to_string() const { return print(root_).first; }

  const std::string& variable() const noexcept { return variable_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  int root() const noexcept { return root_; }

  /// True when the expression is exactly the variable (the Bishop weight).
  bool is_identity() const noexcept { return nodes_.size() == 1 && nodes_[0].op == Op::Var; }

  bool depends_on_variable() const {
    for (const auto& n : nodes_)
      if (n.op == Op::Var) return true;
    return false;
  }

  friend FuncExpr parse_function(std::string_view text, std::string_view variable);
  friend class detail::ExprParser;

 private:
  std::vector<Node> nodes_;
  int root_ = -1;
  std::string variable_ = "x";

  Complex eval(int i, double x) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Constant: return {n.value, 0.0};
      case Op::Imag: return {0.0, 1.0};
      case Op::Pi: return {std::numbers::pi, 0.0};
      case Op::Var: return {x, 0.0};
      case Op::Add: return eval(n.lhs, x) + eval(n.rhs, x);
      case Op::Sub: return eval(n.lhs, x) - eval(n.rhs, x);
      case Op::Mul: return mul(eval(n.lhs, x), eval(n.rhs, x));
      case Op::Div: {
        const Complex d = eval(n.rhs, x);
        if (d == Complex(0.0, 0.0)) throw DomainError("division by zero");
        const Complex a = eval(n.lhs, x);
        if (d.imag() == 0.0) return {a.real() / d.real(), a.imag() / d.real()};
        return a / d;
      }
      case Op::Pow: return power(eval(n.lhs, x), eval(n.rhs, x));
      case Op::Neg: return -eval(n.lhs, x);
      case Op::Exp: {
        const Complex a = eval(n.lhs, x);
        if (a.imag() == 0.0) return {std::exp(a.real()), 0.0};
        return std::exp(a);
      }
      case Op::Log: {
        const Complex a = eval(n.lhs, x);
        if (a.imag() == 0.0) {
          if (a.real() <= 0.0) throw DomainError("log of non-positive real");
          return {std::log(a.real()), 0.0};
        }
        return std::log(a);
      }
      case Op::Sqrt: {
        const Complex a = eval(n.lhs, x);
        if (a.imag() == 0.0) {
          if (a.real() < 0.0) throw DomainError("sqrt of negative real");
          return {std::sqrt(a.real()), 0.0};
        }
        return std::sqrt(a);
      }
      case Op::Sin: {
        const Complex a = eval(n.lhs, x);
        return a.imag() == 0.0 ? Complex(std::sin(a.real()), 0.0) : std::sin(a);
      }
      case Op::Cos: {
        const Complex a = eval(n.lhs, x);
        return a.imag() == 0.0 ? Complex(std::cos(a.real()), 0.0) : std::cos(a);
      }
      case Op::Frac: {
        const Complex a = eval(n.lhs, x);
        if (a.imag() != 0.0) throw DomainError("frac of a non-real value");
        return {a.real() - std::floor(a.real()), 0.0};
      }
      case Op::Indicator: return {(x >= n.value && x < n.upper) ? 1.0 : 0.0, 0.0};
    }
    return {};
  }

  static Complex mul(Complex a, Complex b) {
    if (a.imag() == 0.0 && b.imag() == 0.0) return {a.real() * b.real(), 0.0};
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
  }

  static Complex power(Complex base, Complex exponent) {
    const double e = exponent.real();
    if (exponent.imag() == 0.0 && e == std::floor(e) && std::abs(e) <= 1e9) {
      auto k = static_cast<long long>(std::abs(e));
      if (base == Complex(0.0, 0.0) && e < 0) throw DomainError("zero raised to a negative power");
      Complex result(1.0, 0.0);
      Complex b = base;
      while (k > 0) {
        if (k & 1) result = mul(result, b);
        k >>= 1;
        if (k > 0) b = mul(b, b);
      }
      if (e < 0) {
        if (result.imag() == 0.0) return {1.0 / result.real(), 0.0};
        return Complex(1.0, 0.0) / result;
      }
      return result;
    }
    if (base == Complex(0.0, 0.0)) {
      if (exponent.real() > 0.0) return {0.0, 0.0};
      throw DomainError("zero raised to a non-positive power");
    }
    if (base.imag() == 0.0 && base.real() > 0.0 && exponent.imag() == 0.0) return {std::pow(base.real(), e), 0.0};
    return std::pow(base, exponent);
  }

  std::optional<BigRational> eval_exact(int i, const BigRational& x) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const auto both = [&]() -> std::optional<std::pair<BigRational, BigRational>> {
      auto a = eval_exact(n.lhs, x);
      if (!a) return std::nullopt;
      auto b = eval_exact(n.rhs, x);
      if (!b) return std::nullopt;
      return std::pair{std::move(*a), std::move(*b)};
    };
    switch (n.op) {
      case Op::Constant: {
        BigRational v;
        try_parse_decimal(n.literal, v);
        return v;
      }
      case Op::Var: return x;
      case Op::Add: if (auto ab = both()) return BigRational(ab->first + ab->second); return std::nullopt;
      case Op::Sub: if (auto ab = both()) return BigRational(ab->first - ab->second); return std::nullopt;
      case Op::Mul: if (auto ab = both()) return BigRational(ab->first * ab->second); return std::nullopt;
      case Op::Div: {
        auto ab = both();
        if (!ab) return std::nullopt;
        if (ab->second == 0) throw DomainError("division by zero");
        return BigRational(ab->first / ab->second);
      }
      case Op::Pow: {
        auto ab = both();
        if (!ab || denom(ab->second) != 1) return std::nullopt;
        const BigInt e = numer(ab->second);
        // Exact powers are kept while the result stays below 2^26 bits.
        const std::size_t base_bits = std::max(bit_length(numer(ab->first)), bit_length(denom(ab->first)));
        if (boost::multiprecision::abs(e) * base_bits > (BigInt(1) << 26)) return std::nullopt;
        const auto k = static_cast<unsigned>(boost::multiprecision::abs(e));
        if (ab->first == 0 && e < 0) throw DomainError("zero raised to a negative power");
        BigRational r(pow_int(numer(ab->first), k), pow_int(denom(ab->first), k));
        return e < 0 ? BigRational(1 / r) : r;
      }
      case Op::Neg: if (auto a = eval_exact(n.lhs, x)) return BigRational(-*a); return std::nullopt;
      case Op::Frac: if (auto a = eval_exact(n.lhs, x)) return frac_part(*a); return std::nullopt;
      case Op::Indicator: {
        auto ab = both();
        if (!ab) return std::nullopt;
        return BigRational((x >= ab->first && x < ab->second) ? 1 : 0);
      }
      default: return std::nullopt;
    }
  }

  // Precedence: 1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom.
  std::pair<std::string, int> print(int i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const auto wrap = [](const std::pair<std::string, int>& s, bool parens) {
      return parens ? "(" + s.first + ")" : s.first;
    };
    const auto call = [&](const char* name) { return std::pair{std::string(name) + "(" + print(n.lhs).first + ")", 5}; };
    switch (n.op) {
      case Op::Constant: return {n.literal, 5};
      case Op::Imag: return {"i", 5};
      case Op::Pi: return {"pi", 5};
      case Op::Var: return {variable_, 5};
      case Op::Add:
      case Op::Sub: {
        const auto l = print(n.lhs);
        const auto r = print(n.rhs);
        return {wrap(l, l.second < 1) + (n.op == Op::Add ? " + " : " - ") + wrap(r, r.second <= 1), 1};
      }
      case Op::Mul:
      case Op::Div: {
        const auto l = print(n.lhs);
        const auto r = print(n.rhs);
        return {wrap(l, l.second < 2) + (n.op == Op::Mul ? "*" : "/") + wrap(r, r.second <= 2), 2};
      }
      case Op::Neg: {
        const auto a = print(n.lhs);
        return {"-" + wrap(a, a.second < 3), 3};
      }
      case Op::Pow: {
        const auto b = print(n.lhs);
        const Node& e = nodes_[static_cast<std::size_t>(n.rhs)];
        const auto ex = print(n.rhs);
        bool bare = ex.second == 5;
        if (e.op == Op::Neg && nodes_[static_cast<std::size_t>(e.lhs)].op != Op::Neg &&
            print(e.lhs).second == 5)
          bare = true;
        return {wrap(b, b.second < 5) + "^" + wrap(ex, !bare), 4};
      }
      case Op::Exp: return call("exp");
      case Op::Log: return call("log");
      case Op::Sqrt: return call("sqrt");
      case Op::Sin: return call("sin");
      case Op::Cos: return call("cos");
      case Op::Frac: return call("frac");
      case Op::Indicator:
        return {"indicator(" + print(n.lhs).first + ", " + print(n.rhs).first + ")", 5};
    }
    return {"", 5};
  }
};

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view text, std::string_view variable) : text_(text), variable_(variable) {}

  FuncExpr::Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }

  std::vector<FuncExpr::Node> take_nodes() { return std::move(nodes_); }

  int parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    const int root = expr();
    skip_ws();
    if (pos_ < text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return root;
  }

 private:
  using Op = FuncExpr::Op;

  std::string_view text_;
  std::string_view variable_;
  std::size_t pos_ = 0;
  std::vector<FuncExpr::Node> nodes_;

  int add(Op op, int lhs = -1, int rhs = -1) {
    FuncExpr::Node n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void expect(char c) {
    if (peek() != c) {
      if (pos_ >= text_.size()) throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
    ++pos_;
  }

  int expr() {
    int lhs = term();
    for (char c = peek(); c == '+' || c == '-'; c = peek()) {
      ++pos_;
      lhs = add(c == '+' ? Op::Add : Op::Sub, lhs, term());
    }
    return lhs;
  }

  int term() {
    int lhs = factor();
    for (char c = peek(); c == '*' || c == '/'; c = peek()) {
      ++pos_;
      lhs = add(c == '*' ? Op::Mul : Op::Div, lhs, factor());
    }
    return lhs;
  }

  int factor() {
    if (peek() == '-') {
      ++pos_;
      return add(Op::Neg, factor());
    }
    const int base_node = base();
    if (peek() == '^') {
      ++pos_;
      int exponent;
      if (peek() == '-') {
        ++pos_;
        exponent = add(Op::Neg, base());
      } else {
        exponent = base();
      }
      return add(Op::Pow, base_node, exponent);
    }
    return base_node;
  }

  int base() {
    const char c = peek();
    const std::size_t start = pos_;
    if (c == '\0') throw ParseError("unexpected end of input", pos_);
    if (c == '(') {
      ++pos_;
      const int inner = expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) ++end;
      const std::string_view name = text_.substr(pos_, end - pos_);
      pos_ = end;
      if (name == variable_) return add(Op::Var);
      if (name == "i") return add(Op::Imag);
      if (name == "pi") return add(Op::Pi);
      return call(name, start);
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  int number() {
    const std::size_t start = pos_;
    std::size_t end = pos_;
    const auto digits = [&] {
      while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
    };
    digits();
    if (end < text_.size() && text_[end] == '.') {
      ++end;
      digits();
    }
    if (end + 1 < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t probe = end + 1;
      if (probe < text_.size() && (text_[probe] == '+' || text_[probe] == '-')) ++probe;
      if (probe < text_.size() && std::isdigit(static_cast<unsigned char>(text_[probe]))) {
        end = probe;
        digits();
      }
    }
    const std::string literal(text_.substr(start, end - start));
    BigRational exact;
    if (!try_parse_decimal(literal, exact)) throw ParseError("malformed number", start);
    double value = 0.0;
    const auto res = std::from_chars(literal.data(), literal.data() + literal.size(), value);
    if (res.ec != std::errc() || !std::isfinite(value)) throw ParseError("number out of range", start);
    pos_ = end;
    const int id = add(Op::Constant);
    node(id).value = value;
    node(id).literal = literal;
    return id;
  }

  int call(std::string_view name, std::size_t start) {
    static constexpr std::pair<std::string_view, Op> unary[] = {
        {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"sin", Op::Sin},
        {"cos", Op::Cos}, {"frac", Op::Frac},
    };
    if (peek() != '(') throw ParseError("unknown name '" + std::string(name) + "'", start);
    for (const auto& [fname, op] : unary) {
      if (name == fname) {
        ++pos_;
        const int arg = expr();
        expect(')');
        return add(op, arg);
      }
    }
    if (name == "indicator") {
      ++pos_;
      const int lo = expr();
      expect(',');
      const int hi = expr();
      expect(')');
      const double a = constant_bound(lo, start);
      const double b = constant_bound(hi, start);
      if (!(a >= 0.0 && a < b && b <= 1.0))
        throw ParseError("indicator bounds must satisfy 0 <= a < b <= 1", start);
      const int id = add(Op::Indicator, lo, hi);
      node(id).value = a;
      node(id).upper = b;
      return id;
    }
    throw ParseError("unknown function '" + std::string(name) + "'", start);
  }

  double constant_bound(int id, std::size_t start) {
    FuncExpr probe;
    probe.nodes_ = nodes_;
    probe.root_ = id;
    // The bound must not mention the variable.
    std::vector<int> stack{id};
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      const auto& n = nodes_[static_cast<std::size_t>(k)];
      if (n.op == Op::Var) throw ParseError("indicator bounds must be constants", start);
      if (n.lhs >= 0) stack.push_back(n.lhs);
      if (n.rhs >= 0) stack.push_back(n.rhs);
    }
    Complex v;
    try {
      v = probe.evaluate_unrestricted(0.0);
    } catch (const DomainError&) {
      throw ParseError("indicator bound is not a finite constant", start);
    }
    if (v.imag() != 0.0) throw ParseError("indicator bounds must be real", start);
    return v.real();
  }
};

}  // namespace detail

/// Parses `text` into a function of `variable` ("x" unless stated).
inline FuncExpr parse_function(std::string_view text, std::string_view variable = "x") {
  detail::ExprParser parser(text, variable);
  FuncExpr e;
  e.root_ = parser.parse();
  e.nodes_ = parser.take_nodes();
  e.variable_ = std::string(variable);
  return e;
}

}  // namespace bishop
