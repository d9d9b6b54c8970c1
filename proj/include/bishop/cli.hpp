#pragma once

// The bishop command-line front end. Every subcommand declares its options
// as strings with defaults; values are parsed when the command runs, so any
// real accepts fractions ("355/113") and constant expressions ("exp(-1)").
// The full option set, defaults included, goes into the run manifest, which
// is what makes `bishop replay` possible.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bishop/io.hpp"

namespace bishop::cli {

struct Outcome {
  Json results = Json::object();
  Json notes = Json::array();
  std::optional<std::size_t> N;
  std::optional<CsvTable> csv;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& item : out) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
  }
  return out;
}

/// A real given as a decimal, a fraction, or a constant expression.
inline double parse_real(const std::string& text, const std::string& name) {
  require(!text.empty(), "--" + name + " needs a value");
  try {
    return to_double(parse_rational(text));
  } catch (const PreconditionError&) {
  }
  const FuncExpr e = parse_function(text);
  require(!e.depends_on_variable(), "--" + name + " must be a constant, got '" + text + "'");
  const Complex v = e.evaluate_unrestricted(0.0);
  require(v.imag() == 0.0, "--" + name + " must be real, got '" + text + "'");
  return v.real();
}

inline Complex parse_complex(const std::string& text, const std::string& name) {
  const FuncExpr e = parse_function(text);
  require(!e.depends_on_variable(), "--" + name + " entries must be constants, got '" + text + "'");
  return e.evaluate_unrestricted(0.0);
}

inline long long parse_integer(const std::string& text, const std::string& name) {
  require(!text.empty(), "--" + name + " needs a value");
  const BigRational v = parse_rational(text);
  require(denom(v) == 1, "--" + name + " must be an integer, got '" + text + "'");
  const BigInt n = numer(v);
  require(n >= -(BigInt(1) << 53) && n <= (BigInt(1) << 53), "--" + name + " is out of range");
  return static_cast<long long>(n);
}

class Command {
 public:
  using Handler = std::function<Outcome(const Command&)>;

  Command(CLI::App* app, std::string path) : app_(app), path_(std::move(path)) {
    value("seed", "0", "seed for randomized choices");
    app_->add_option("--json", json_path_, "write the result document to this file");
    app_->add_option("--csv", csv_path_, "write a CSV sample dump to this file");
  }

  Command& value(const std::string& name, std::string def, const std::string& help) {
    values_[name] = std::move(def);
    app_->add_option("--" + name, values_[name], help);
    return *this;
  }

  Command& flag(const std::string& name, const std::string& help) {
    flags_[name] = false;
    app_->add_flag("--" + name, flags_[name], help);
    return *this;
  }

  Command& handle(Handler h) {
    handler_ = std::move(h);
    return *this;
  }

  const std::string& text(const std::string& name) const { return values_.at(name); }
  bool has(const std::string& name) const { return !values_.at(name).empty(); }
  bool on(const std::string& name) const { return flags_.at(name); }

  const std::string& need(const std::string& name) const {
    require(has(name), "--" + name + " is required");
    return text(name);
  }

  double real(const std::string& name) const { return parse_real(need(name), name); }

  long long integer(const std::string& name) const { return parse_integer(need(name), name); }

  std::size_t count(const std::string& name) const {
    const long long v = integer(name);
    require(v >= 0, "--" + name + " must be >= 0");
    return static_cast<std::size_t>(v);
  }

  FuncExpr func(const std::string& name, std::string_view variable = "x") const {
    return parse_function(need(name), variable);
  }

  AlphaValue alpha(const std::string& name = "alpha") const { return parse_alpha(need(name)); }

  /// r/q from --alpha when given, else from --q and --r.
  RationalRotation rotation() const {
    if (values_.count("alpha") && has("alpha")) {
      const AlphaValue a = alpha();
      require(!a.is_truncation(), "this command needs a rational alpha r/q, got " + a.to_string());
      return RationalRotation::from(a.value());
    }
    require(values_.count("q") && has("q"), "give --alpha r/q or --q (with --r)");
    return RationalRotation::from(static_cast<long>(integer("r")), static_cast<long>(integer("q")));
  }

  const std::string& path() const noexcept { return path_; }
  CLI::App* app() const noexcept { return app_; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  const std::map<std::string, bool>& flags() const noexcept { return flags_; }
  const std::string& json_path() const noexcept { return json_path_; }
  const std::string& csv_path() const noexcept { return csv_path_; }
  Outcome run() const { return handler_(*this); }

 private:
  CLI::App* app_;
  std::string path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> flags_;
  std::string json_path_;
  std::string csv_path_;
  Handler handler_;
};

namespace detail {

inline OperatorSpec operator_of(const Command& c) { return {c.func("weight"), c.alpha(), c.real("p")}; }

inline void add_operator_options(Command& c) {
  c.value("alpha", "", "rotation: r/q, decimal, golden[:d], sqrt2[:d], cf:a1,a2,..., ~decimal")
      .value("weight", "x", "weight phi(x); x gives the Bishop operator")
      .value("p", "2", "L^p exponent");
}

inline void add_rotation_options(Command& c) {
  c.value("alpha", "", "rational rotation r/q").value("q", "", "denominator q").value("r", "1", "numerator r");
}

inline CsvTable samples_csv(const std::vector<double>& x, std::span<const Complex> v) {
  CsvTable t({"x", "re", "im"});
  for (std::size_t i = 0; i < x.size(); ++i) t.add_row({x[i], v[i].real(), v[i].imag()});
  return t;
}

/// Values of an operator expression either at exact points (--at) or on the
/// midpoint grid (--samples).
template <class Eval>
Outcome pointwise(const Command& c, Eval eval, bool with_log) {
  Outcome o;
  const OperatorSpec spec = operator_of(c);
  std::vector<double> xs;
  std::vector<Complex> values;
  std::vector<double> logs;
  if (c.has("at")) {
    for (const auto& item : split(c.text("at"), ',')) {
      const BigRational x = parse_rational(item);
      require(x >= 0 && x < 1, "--at points must lie in [0, 1)");
      const auto r = eval(spec, PointLattice::single(x));
      xs.push_back(to_double(x));
      values.push_back(r.values[0]);
      logs.push_back(r.log_magnitude[0]);
    }
  } else {
    const GridSpec grid(c.count("samples"));
    o.N = grid.size();
    const auto r = eval(spec, grid.lattice());
    xs = grid.points();
    values = r.values;
    logs = r.log_magnitude;
    o.results["norm"] = io::num(lp_norm(values, spec.p));
  }
  o.results["alpha"] = io::alpha(spec.alpha);
  o.results["x"] = io::reals(xs);
  o.results["values"] = io::complexes(values);
  if (with_log) o.results["log_magnitude"] = io::reals(logs);
  o.csv = samples_csv(xs, values);
  return o;
}

struct PlainValues {
  std::vector<Complex> values;
  std::vector<double> log_magnitude;
};

inline PlainValues plain(std::vector<Complex> v) {
  PlainValues p;
  for (const auto& z : v) p.log_magnitude.push_back(z == Complex(0.0, 0.0) ? -std::numeric_limits<double>::infinity() : std::log(std::abs(z)));
  p.values = std::move(v);
  return p;
}

inline TargetFamily targets_of(const Command& c) {
  TargetFamily t = c.has("targets") ? TargetFamily::from_texts(split(c.text("targets"), ';')) : TargetFamily::standard();
  if (c.has("m")) t = t.truncated(c.count("m"));
  return t;
}

inline ApproxConfig approx_config(const Command& c) {
  ApproxConfig cfg;
  cfg.samples = c.count("samples");
  cfg.p = c.real("p");
  cfg.degree_cap = c.count("degree-cap");
  return cfg;
}

inline void add_bank_options(Command& c) {
  c.value("f", "1", "function f")
      .value("weight", "x", "weight phi(x), real and increasing with phi(0) = 0")
      .value("targets", "", "targets separated by ';' (default: 1; x; x^2; sin(2*pi*x); cos(2*pi*x); indicator(0, 1/2))")
      .value("m", "", "use only the first m targets")
      .value("eps", "0.1", "stage tolerance eps_q")
      .value("samples", "8192", "construction grid size per approximation")
      .value("degree-cap", "64", "largest component degree")
      .value("p", "2", "L^p exponent");
}

inline DeltaConfig delta_config(const Command& c) {
  DeltaConfig cfg;
  cfg.grid = c.count("grid");
  cfg.bisection_steps = static_cast<int>(c.integer("bisection"));
  cfg.h_min = c.real("h-min");
  return cfg;
}

inline void add_delta_options(Command& c) {
  c.value("grid", "4096", "grid for perturbation residuals")
      .value("bisection", "8", "bisection steps after the dyadic scan")
      .value("h-min", "1e-12", "smallest perturbation radius tried");
}

inline ContinuedFraction cf_of(const AlphaValue& a, std::size_t depth) {
  if (a.is_truncation()) {
    const auto& qs = a.partial_quotients();
    return ContinuedFraction(std::vector<BigInt>(qs.begin(), qs.begin() + static_cast<std::ptrdiff_t>(std::min(depth, qs.size()))));
  }
  return cf_expand(a.value(), depth);
}

}  // namespace detail

/// Owns the CLI11 application and every subcommand.
class Cli {
 public:
  Cli() : app_("Weighted translation operators: iterates, cyclicity, Diophantine gaps, probes.", "bishop") {
    app_.require_subcommand(1);
    app_.set_version_flag("--version", kVersion);
    build();
  }

  CLI::App& app() { return app_; }

  const Command* selected() const {
    for (const auto& c : commands_)
      if (c->app()->parsed()) return c.get();
    return nullptr;
  }

  bool replay_selected() const { return replay_->parsed(); }
  const std::string& replay_manifest() const { return replay_manifest_; }

 private:
  Command& add(CLI::App* parent, const std::string& name, const std::string& path, const std::string& help) {
    CLI::App* sub = parent->add_subcommand(name, help);
    commands_.push_back(std::make_unique<Command>(sub, path));
    return *commands_.back();
  }

  void build();

  CLI::App app_;
  std::vector<std::unique_ptr<Command>> commands_;
  CLI::App* replay_ = nullptr;
  std::string replay_manifest_;
};

inline void Cli::build() {
  using namespace detail;

  // Operator layer.
  {
    auto& c = add(&app_, "apply", "apply", "T f = phi(x) f({x + alpha})");
    add_operator_options(c);
    c.value("f", "", "function f").value("samples", "1000", "grid size N").value("at", "", "exact points, comma separated");
    c.handle([](const Command& c) {
      const FuncExpr f = c.func("f");
      return pointwise(c, [&](const OperatorSpec& s, const PointLattice& l) { return plain(apply(s, f, l)); }, false);
    });
  }
  {
    auto& c = add(&app_, "iterate", "iterate", "T^n f through the cocycle product");
    add_operator_options(c);
    c.value("f", "", "function f").value("n", "1", "power n").value("samples", "1000", "grid size N").value("at", "", "exact points, comma separated");
    c.handle([](const Command& c) {
      const FuncExpr f = c.func("f");
      const std::size_t n = c.count("n");
      Outcome o = pointwise(c, [&](const OperatorSpec& s, const PointLattice& l) { return iterate(s, f, n, l); }, true);
      o.results["n"] = n;
      return o;
    });
  }
  {
    auto& c = add(&app_, "adjoint", "adjoint", "T' f = phi({x - alpha}) f({x - alpha})");
    add_operator_options(c);
    c.value("f", "", "function f").value("samples", "1000", "grid size N").value("at", "", "exact points, comma separated");
    c.handle([](const Command& c) {
      const FuncExpr f = c.func("f");
      return pointwise(c, [&](const OperatorSpec& s, const PointLattice& l) { return plain(apply_adjoint(s, f, l)); }, false);
    });
  }
  {
    auto& c = add(&app_, "norm", "norm", "||T^n|| as the grid maximum of the cocycle");
    add_operator_options(c);
    c.value("n", "1", "power n").value("samples", "100000", "grid size N").flag("no-refine", "skip the 2N cross-check");
    c.handle([](const Command& c) {
      Outcome o;
      const OperatorSpec spec = operator_of(c);
      const GridSpec grid(c.count("samples"));
      o.N = grid.size();
      const std::size_t n = c.count("n");
      const auto est = power_norm(spec, n, grid, !c.on("no-refine"));
      o.results["alpha"] = io::alpha(spec.alpha);
      o.results["n"] = n;
      o.results["norm"] = io::norm(est);
      if (est.refined && !est.converged) o.notes.push_back("N and 2N estimates differ by more than 1%; increase --samples");
      return o;
    });
  }
  {
    auto& c = add(&app_, "spectrum", "spectrum", "spectral radius estimate ||T^n||^{1/n}");
    add_operator_options(c);
    c.value("n", "1000", "power n").value("samples", "100000", "grid size N").flag("refine", "also evaluate on the 2N grid");
    c.handle([](const Command& c) {
      Outcome o;
      const OperatorSpec spec = operator_of(c);
      const GridSpec grid(c.count("samples"));
      o.N = grid.size();
      const std::size_t n = c.count("n");
      require(n >= 1, "--n must be >= 1");
      const auto est = power_norm(spec, n, grid, c.on("refine"));
      o.results["alpha"] = io::alpha(spec.alpha);
      o.results["n"] = n;
      o.results["radius"] = io::num(std::exp(est.log_value / static_cast<double>(n)));
      if (est.refined) o.results["refined_radius"] = io::num(std::exp(est.refined_log_value / static_cast<double>(n)));
      o.results["norm"] = io::norm(est);
      if (spec.is_bishop() && !spec.alpha.is_truncation() && spec.alpha.value() > 0 && spec.alpha.value() < 1) {
        const BigInt q = spec.alpha.denominator();
        if (q <= 1000000) o.results["rational_closed_form"] = io::num(rational_spectral_radius(static_cast<long>(q)));
      }
      o.results["inverse_e"] = io::num(std::exp(-1.0));
      return o;
    });
  }

  // Rational cyclicity.
  {
    auto& c = add(&app_, "delta", "delta", "Delta(f, r/q)(t) over one period");
    add_rotation_options(c);
    c.value("f", "1", "function f").value("weight", "x", "weight phi(x)").value("samples", "1000", "t-samples on [0, 1/q)");
    c.value("t", "", "also report Delta at this t");
    c.handle([](const Command& c) {
      Outcome o;
      const auto rot = c.rotation();
      const FuncExpr f = c.func("f");
      const FuncExpr w = c.func("weight");
      const auto orbit = rational_orbit(f, w, rot, c.count("samples"));
      o.N = orbit.grid_size();
      const auto prof = delta_profile(orbit);
      o.results = io::profile(prof, true);
      Json zero;
      zero["lu"] = io::cplx(delta_sample(f, w, rot, 0.0).value());
      if (w(0.0) == Complex(0.0, 0.0)) zero["closed_form"] = io::cplx(delta_at_zero_closed_form(f, w, rot));
      o.results["delta_at_zero"] = zero;
      if (c.has("t")) {
        const double t = c.real("t");
        o.results["at_t"] = {{"t", io::num(t)}, {"value", io::cplx(delta_sample(f, w, rot, t).value())}};
      }
      CsvTable csv({"t", "re", "im"});
      for (std::size_t m = 0; m < prof.t.size(); ++m) {
        const Complex v = DeltaValue{prof.log_abs[m], prof.phase[m]}.value();
        csv.add_row({prof.t[m], v.real(), v.imag()});
      }
      o.csv = csv;
      return o;
    });
  }
  {
    auto& c = add(&app_, "cyclic-test", "cyclic-test", "cyclicity verdict for T_{r/q}");
    add_rotation_options(c);
    c.value("f", "", "function f").value("weight", "x", "weight phi(x)").value("samples", "1000", "t-samples on [0, 1/q)");
    c.value("tol", "1e-10", "rcond threshold for a degenerate sample");
    c.handle([](const Command& c) {
      Outcome o;
      const auto rot = c.rotation();
      const auto rep = cyclicity_test(c.func("f"), c.func("weight"), rot, c.count("samples"), c.real("tol"));
      o.N = c.count("samples") * static_cast<std::size_t>(rot.q);
      o.results = io::cyclicity(rep);
      return o;
    });
  }
  {
    auto& c = add(&app_, "approx", "approx", "polynomial Q with ||Q(T_{r/q}) f - g||_p < eps");
    add_rotation_options(c);
    c.value("f", "1", "function f").value("weight", "x", "weight phi(x)").value("g", "", "target g").value("eps", "", "tolerance eps > 0");
    c.value("p", "2", "L^p exponent").value("samples", "16384", "construction grid size N").value("degree-cap", "64", "largest component degree");
    c.value("tol", "1e-10", "cyclicity rcond threshold");
    c.flag("oracle", "also compute the least-squares residual over the orbit span of the same length");
    c.handle([](const Command& c) {
      Outcome o;
      const auto rot = c.rotation();
      const FuncExpr f = c.func("f");
      const FuncExpr w = c.func("weight");
      const FuncExpr g = c.func("g");
      ApproxConfig cfg = approx_config(c);
      cfg.tol = c.real("tol");
      const auto rep = approx_polynomial(f, w, rot, g, c.real("eps"), cfg);
      o.N = rep.construction_grid;
      o.results = io::approx(rep);
      for (const auto& n : rep.notes) o.notes.push_back(n);
      const OperatorSpec spec{w, rot.alpha(), cfg.p};
      const GridSpec fine(rep.verification_grid);
      if (c.on("oracle") && !rep.Q.empty()) {
        const auto span = orbit_span_residual(f, spec, g, rep.Q.size(), fine);
        o.results["oracle"] = io::span_residual(span, rep.Q.size());
        o.results["oracle_dominates"] = span.residual <= rep.verified_residual + 1e-9;
      }
      o.csv = samples_csv(fine.points(), apply_polynomial(spec, f, rep.Q, fine));
      return o;
    });
  }
  {
    auto& c = add(&app_, "decompose", "decompose", "periodic components h_j of a target");
    add_rotation_options(c);
    c.value("f", "1", "function f").value("weight", "x", "weight phi(x)").value("g", "", "target g");
    c.value("samples", "4096", "grid size N (rounded to a multiple of q)").value("n", "1e6", "truncation level n");
    c.value("p", "2", "L^p exponent").value("component", "0", "component j written to --csv");
    c.handle([](const Command& c) {
      Outcome o;
      const auto rot = c.rotation();
      const auto q = static_cast<std::size_t>(rot.q);
      const std::size_t M = std::max<std::size_t>(1, (c.count("samples") + q / 2) / q);
      const auto orbit = rational_orbit(c.func("f"), c.func("weight"), rot, M);
      o.N = orbit.grid_size();
      const auto prof = delta_profile(orbit);
      const auto omega = truncation_set(orbit, prof, c.real("n"));
      const auto pc = decompose_target(sample(c.func("g"), GridSpec(orbit.grid_size())), orbit, omega, c.real("p"));
      const std::size_t comp = c.count("component");
      require(comp < q, "--component must be < q");
      o.results["rotation"] = io::rotation(rot);
      o.results["M"] = M;
      o.results["truncation_n"] = io::num(omega.n);
      o.results["omega_measure"] = io::num(omega.measure());
      o.results["flagged"] = pc.flagged;
      o.results["reconstruction_error"] = io::num(pc.reconstruction_error);
      o.results["t"] = io::reals(pc.t);
      o.results["s"] = io::reals(pc.s);
      Json comps = Json::array();
      for (std::size_t j = 0; j < q; ++j) {
        std::vector<Complex> col(M);
        for (std::size_t m = 0; m < M; ++m) col[m] = pc.h(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
        comps.push_back({{"j", j}, {"values", io::complexes(col)}});
      }
      o.results["components"] = comps;
      CsvTable csv({"t", "re", "im"});
      for (std::size_t m = 0; m < M; ++m) {
        const Complex v = pc.h(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(comp));
        csv.add_row({pc.t[m], v.real(), v.imag()});
      }
      o.csv = csv;
      return o;
    });
  }

  // Diophantine layer.
  {
    auto& c = add(&app_, "cf", "cf", "continued fraction expansion and convergents");
    c.value("alpha", "", "alpha").value("depth", "20", "number of partial quotients");
    c.handle([](const Command& c) {
      Outcome o;
      const AlphaValue a = c.alpha();
      const std::size_t depth = c.count("depth");
      const ContinuedFraction cf = detail::cf_of(a, depth);
      o.results["alpha"] = io::alpha(a);
      o.results["quotients"] = io::quotients(cf);
      o.results["convergents"] = io::convergents(cf);
      o.results["terminated"] = !a.is_truncation() && cf.value() == a.value();
      o.results["invariants_ok"] = cf.verify_invariants().empty();
      return o;
    });
  }
  {
    auto& c = add(&app_, "dirichlet", "dirichlet", "exact Dirichlet bounds and Liouville witnesses");
    c.value("alpha", "", "alpha").value("depth", "25", "number of partial quotients");
    c.handle([](const Command& c) {
      Outcome o;
      const AlphaValue a = c.alpha();
      const ContinuedFraction cf = cf_expand(a.value(), c.count("depth"));
      const auto checks = check_dirichlet(cf, a.value());
      Json d = Json::array();
      for (bool b : checks) d.push_back(b);
      Json l = Json::array();
      for (std::size_t n = 1; n < cf.length(); ++n) l.push_back(is_liouville_witness(cf, n));
      o.results["alpha"] = io::alpha(a);
      o.results["quotients"] = io::quotients(cf);
      o.results["dirichlet"] = d;
      o.results["all_true"] = std::all_of(checks.begin(), checks.end(), [](bool b) { return b; });
      o.results["liouville"] = l;
      o.results["invariants_ok"] = cf.verify_invariants().empty();
      return o;
    });
  }
  {
    auto& c = add(&app_, "gaps", "gaps", "indices n with q_{n+1} > psi(q_n)");
    c.value("alpha", "", "alpha").value("psi", "", "psi as an expression in q").value("depth", "25", "number of partial quotients");
    c.handle([](const Command& c) {
      Outcome o;
      const AlphaValue a = c.alpha();
      const ContinuedFraction cf = detail::cf_of(a, c.count("depth"));
      o.results["alpha"] = io::alpha(a);
      o.results["quotients"] = io::quotients(cf);
      o.results["gaps"] = io::gaps(gap_indices(cf, GrowthFunction::from_text(c.need("psi"))));
      return o;
    });
  }
  {
    auto& c = add(&app_, "build-alpha", "build-alpha", "alpha whose convergents jump past psi");
    c.value("psi", "", "psi as an expression in q").value("levels", "4", "quotients to add").value("base", "1", "seed quotients, comma separated");
    c.handle([](const Command& c) {
      Outcome o;
      std::vector<BigInt> base;
      for (const auto& s : split(c.text("base"), ',')) base.push_back(BigInt(parse_integer(s, "base")));
      const auto psi = GrowthFunction::from_text(c.need("psi"));
      const auto cf = build_alpha_with_gaps(psi, c.count("levels"), base);
      o.results["quotients"] = io::quotients(cf);
      Json qs = Json::array();
      for (long n = 1; n <= static_cast<long>(cf.length()); ++n) qs.push_back(io::integer(cf.q(n)));
      o.results["denominators"] = qs;
      o.results["alpha_approx"] = io::num(to_double(cf.value()));
      o.results["gaps"] = io::gaps(gap_indices(cf, psi));
      o.results["invariants_ok"] = cf.verify_invariants().empty();
      return o;
    });
  }

  // psi pipeline.
  {
    auto& c = add(&app_, "bank", "bank", "polynomial bank P_q");
    add_bank_options(c);
    c.value("q", "", "denominator q");
    c.handle([](const Command& c) {
      Outcome o;
      const auto bank = build_polynomial_bank(c.func("f"), c.func("weight"), static_cast<long>(c.integer("q")),
                                              detail::targets_of(c), c.real("eps"), detail::approx_config(c));
      o.N = c.count("samples");
      o.results = io::bank(bank);
      return o;
    });
  }
  {
    auto& c = add(&app_, "delta-q", "delta-q", "continuity radius delta(q) of a bank, with certificate");
    add_bank_options(c);
    add_delta_options(c);
    c.value("q", "", "denominator q");
    c.handle([](const Command& c) {
      Outcome o;
      const FuncExpr f = c.func("f");
      const FuncExpr w = c.func("weight");
      const long q = static_cast<long>(c.integer("q"));
      const double eps = c.real("eps");
      const auto bank = build_polynomial_bank(f, w, q, detail::targets_of(c), eps, detail::approx_config(c));
      const auto cert = estimate_delta(bank, f, w, eps, detail::delta_config(c));
      const auto replay = replay_delta_certificate(cert, bank, f, w);
      o.N = cert.grid;
      o.results["bank"] = io::bank(bank);
      o.results["certificate"] = io::certificate(cert);
      o.results["psi"] = io::rational(psi_value(q, cert.delta));
      o.results["replay_ok"] = replay.ok;
      if (!replay.ok) o.notes.push_back("certificate replay failed: " + replay.failure);
      return o;
    });
  }
  {
    auto& c = add(&app_, "psi", "psi", "psi(q) = 1/(q delta), exactly");
    add_bank_options(c);
    add_delta_options(c);
    c.value("q", "", "denominator q").value("delta", "", "delta; computed from a bank when omitted");
    c.handle([](const Command& c) {
      Outcome o;
      const long q = static_cast<long>(c.integer("q"));
      BigRational delta;
      if (c.has("delta")) {
        delta = parse_rational(c.text("delta"));
      } else {
        const FuncExpr f = c.func("f");
        const FuncExpr w = c.func("weight");
        const double eps = c.real("eps");
        const auto bank = build_polynomial_bank(f, w, q, detail::targets_of(c), eps, detail::approx_config(c));
        const auto cert = estimate_delta(bank, f, w, eps, detail::delta_config(c));
        o.N = cert.grid;
        o.results["certificate"] = io::certificate(cert);
        delta = cert.delta;
      }
      const BigRational psi = psi_value(q, delta);
      o.results["q"] = q;
      o.results["delta"] = io::rational(delta);
      o.results["psi"] = io::rational(psi);
      o.results["psi_approx"] = io::num(to_double(psi));
      o.results["identity"] = psi * BigRational(q) * delta == 1;
      return o;
    });
  }
  {
    auto& c = add(&app_, "verify-psi", "verify-psi", "end-to-end cyclicity check for a psi-gap alpha");
    add_bank_options(c);
    add_delta_options(c);
    c.value("q-list", "2,3", "convergent denominators to bank, comma separated");
    c.value("levels", "4", "gap quotients appended after the q-list");
    c.value("verify-grid", "12289", "independent grid for the final residuals");
    c.value("alpha-override", "", "use this alpha instead of the constructed one");
    c.handle([](const Command& c) {
      Outcome o;
      const FuncExpr f = c.func("f");
      const FuncExpr w = c.func("weight");
      std::vector<long> q_list;
      for (const auto& s : split(c.text("q-list"), ',')) q_list.push_back(static_cast<long>(parse_integer(s, "q-list")));
      std::vector<double> eps;
      for (const auto& s : split(c.text("eps"), ',')) eps.push_back(parse_real(s, "eps"));
      PsiConfig cfg;
      cfg.approx = detail::approx_config(c);
      cfg.delta = detail::delta_config(c);
      cfg.verify_grid = c.count("verify-grid");
      std::optional<ContinuedFraction> override_cf;
      if (c.has("alpha-override")) override_cf = detail::cf_of(c.alpha("alpha-override"), 100000);
      const auto rep = verify_irrational_cyclicity(f, w, detail::targets_of(c), q_list, eps, c.count("levels"), cfg, override_cf);
      o.N = cfg.verify_grid;
      o.results = io::irrational(rep);
      Json replays = Json::array();
      for (const auto& [q, e] : rep.psi.entries) {
        const auto r = replay_delta_certificate(e.certificate, rep.banks.at(q), f, w);
        replays.push_back({{"q", q}, {"ok", r.ok}, {"checked", r.checked}});
        if (!r.ok) o.notes.push_back("certificate replay failed at q = " + std::to_string(q) + ": " + r.failure);
      }
      o.results["certificate_replays"] = replays;
      Json certs = Json::array();
      for (const auto& [q, e] : rep.psi.entries) certs.push_back(io::certificate(e.certificate));
      o.results["certificates"] = certs;
      for (const auto& n : rep.notes) o.notes.push_back(n);
      return o;
    });
  }

  // Probes.
  CLI::App* probe = app_.add_subcommand("probe", "numerical probes of structural properties");
  probe->require_subcommand(1);
  {
    auto& c = add(probe, "weight", "probe weight", "periodic weight w and its monotonicity on [0, 1/q)");
    c.value("q", "", "period denominator q").value("weight", "x", "weight phi(x)").value("samples", "10000", "samples on [0, 1/q)");
    c.handle([](const Command& c) {
      Outcome o;
      const auto pw = periodic_weight(static_cast<long>(c.integer("q")), c.func("weight"), c.count("samples"));
      o.N = pw.x.size();
      o.results["q"] = pw.q;
      o.results["min_forward_difference"] = io::num(pw.min_forward_difference);
      o.results["violations"] = pw.violations;
      o.results["strictly_increasing"] = pw.min_forward_difference > 0.0;
      o.results["x"] = io::reals(pw.x);
      o.results["w"] = io::reals(pw.w);
      CsvTable csv({"x", "w"});
      for (std::size_t m = 0; m < pw.x.size(); ++m) csv.add_row({pw.x[m], pw.w[m]});
      o.csv = csv;
      return o;
    });
  }
  {
    auto& c = add(probe, "eigen", "probe eigen", "measure of near-level sets {|w - lambda^q| < tol}");
    c.value("q", "", "period denominator q").value("weight", "x", "weight phi(x)").value("tol", "1e-3", "level tolerance");
    c.value("samples", "100000", "samples per period").value("lambdas", "", "lambda values, comma separated");
    c.value("random", "0", "number of seeded random lambdas in the unit disk");
    c.handle([](const Command& c) {
      Outcome o;
      std::vector<Complex> lambdas;
      if (c.has("lambdas"))
        for (const auto& s : split(c.text("lambdas"), ',')) lambdas.push_back(parse_complex(s, "lambdas"));
      const auto random = random_disk_points(c.count("random"), static_cast<std::uint64_t>(c.integer("seed")));
      lambdas.insert(lambdas.end(), random.begin(), random.end());
      require(!lambdas.empty(), "give --lambdas or --random");
      const auto probe = eigen_levelset_probe(static_cast<long>(c.integer("q")), c.func("weight"), lambdas, c.real("tol"),
                                              c.count("samples"));
      o.N = probe.samples;
      o.results["q"] = probe.q;
      o.results["tol"] = io::num(probe.tol);
      o.results["min_slope"] = io::num(probe.min_slope);
      o.results["w_sup"] = io::num(probe.w_sup);
      Json rows = Json::array();
      CsvTable csv({"lambda_re", "lambda_im", "measure"});
      for (const auto& r : probe.rows) {
        rows.push_back({{"lambda", io::cplx(r.lambda)},
                        {"level", io::cplx(r.level)},
                        {"measure", io::num(r.measure)},
                        {"bound", io::num(r.bound)},
                        {"predicted", io::num(r.predicted)},
                        {"empty", r.empty}});
        csv.add_row({r.lambda.real(), r.lambda.imag(), r.measure});
      }
      o.results["rows"] = rows;
      o.csv = csv;
      return o;
    });
  }
  {
    auto& c = add(probe, "convex", "probe convex", "m({|1 - f| > 1/2}) >= (b - a)/3 for convex products");
    c.value("f", "", "increasing convex nonnegative f with f(a) = 0").value("a", "0", "left end a").value("b", "1", "right end b");
    c.value("samples", "100000", "samples on [a, b]").value("random", "0", "check this many seeded random products instead");
    c.flag("cocycle", "check |F_{q_n}| between consecutive zeros along the convergents of --alpha");
    c.value("alpha", "golden", "alpha for --cocycle").value("lambda", "exp(-1)", "lambda for --cocycle").value("q-max", "233", "largest q_n for --cocycle");
    c.handle([](const Command& c) {
      Outcome o;
      const std::size_t samples = c.count("samples");
      o.N = samples;
      bool all = true;
      if (c.on("cocycle")) {
        const AlphaValue a = c.alpha();
        require(a.is_truncation(), "--cocycle needs a continued-fraction alpha");
        const auto rows = cocycle_convex_checks(ContinuedFraction(a.partial_quotients()), c.real("lambda"),
                                                static_cast<long>(c.integer("q-max")), samples);
        Json arr = Json::array();
        for (const auto& r : rows) {
          arr.push_back({{"level", r.level},
                         {"q", io::integer(r.q)},
                         {"intervals", r.intervals},
                         {"passed", r.passed},
                         {"min_margin", io::num(r.min_margin)},
                         {"pass", r.pass}});
          all = all && r.pass;
        }
        o.results["cocycles"] = arr;
      } else if (c.count("random") > 0) {
        Json arr = Json::array();
        for (const auto& p : random_convex_products(c.count("random"), static_cast<std::uint64_t>(c.integer("seed")))) {
          const auto check = convex_product_bound_check(parse_function(p.expression), p.a, p.b, samples);
          Json j = io::convex(check);
          j["f"] = p.expression;
          arr.push_back(j);
          all = all && check.pass;
        }
        o.results["checks"] = arr;
      } else {
        const auto check = convex_product_bound_check(c.func("f"), c.real("a"), c.real("b"), samples);
        if (!check.preconditions_ok) o.notes.push_back("check skipped: " + check.precondition_failure);
        o.results["checks"] = Json::array({io::convex(check)});
        all = check.pass;
      }
      o.results["all_pass"] = all;
      return o;
    });
  }
  {
    auto& c = add(probe, "invariance", "probe invariance", "m({Re a T^n f > 0}) against m({Re f > 0})");
    c.value("f", "", "function f").value("alpha", "", "alpha").value("weight", "x", "weight phi(x), positive").value("p", "2", "L^p exponent");
    c.value("n", "1", "power n").value("a", "1", "scale a > 0").value("samples", "100000", "grid size N");
    c.handle([](const Command& c) {
      Outcome o;
      const GridSpec grid(c.count("samples"));
      o.N = grid.size();
      const auto r = supercyclicity_invariance(c.func("f"), detail::operator_of(c), c.count("n"), c.real("a"), grid);
      o.results["measure_f"] = io::num(r.measure_f);
      o.results["measure_iterate"] = io::num(r.measure_iterate);
      o.results["deviation"] = io::num(r.deviation);
      o.results["breakpoints"] = r.breakpoints;
      o.results["tolerance"] = io::num(r.tolerance);
      o.results["pass"] = r.pass;
      return o;
    });
  }
  {
    auto& c = add(probe, "obstruction", "probe obstruction", "||T^n f - 1_Z||_p^p >= m(Z) for the zero set Z of the weight");
    c.value("weight", "", "weight phi(x) vanishing on a set of positive measure").value("f", "1", "function f");
    c.value("alpha", "", "alpha").value("n", "1", "power n >= 1").value("samples", "10000", "grid size N").value("p", "2", "L^p exponent");
    c.handle([](const Command& c) {
      Outcome o;
      const GridSpec grid(c.count("samples"));
      o.N = grid.size();
      const auto r = orbit_obstruction(detail::operator_of(c), c.func("f"), c.count("n"), grid);
      o.results["lhs"] = io::num(r.lhs);
      o.results["rhs"] = io::num(r.rhs);
      o.results["tolerance"] = io::num(r.tolerance);
      o.results["vacuous"] = r.vacuous;
      o.results["pass"] = r.pass;
      if (r.vacuous) o.notes.push_back("the weight has no sampled zeros; the check is vacuous");
      return o;
    });
  }
  {
    auto& c = add(probe, "unit-delta", "probe unit-delta", "min |Delta(1, r/q)| and monotonicity for q <= q-max");
    c.value("q-max", "12", "largest q").value("samples", "1000", "t-samples per period");
    c.handle([](const Command& c) {
      Outcome o;
      const auto rows = unit_delta_conjecture_probe(static_cast<long>(c.integer("q-max")), c.count("samples"));
      o.N = c.count("samples");
      Json arr = Json::array();
      CsvTable csv({"q", "r", "min_abs", "log_min_abs", "argmin_t", "violations", "closed_form_error"});
      bool all = true;
      for (const auto& r : rows) {
        arr.push_back({{"r", r.r},
                       {"q", r.q},
                       {"min_abs", io::num(r.min_abs)},
                       {"log_min_abs", io::num(r.log_min_abs)},
                       {"argmin_t", io::num(r.argmin_t)},
                       {"direction", r.direction},
                       {"violations", r.violations},
                       {"delta0_lu", io::cplx(r.delta0_lu)},
                       {"delta0_closed", io::cplx(r.delta0_closed)},
                       {"closed_form_error", io::num(r.closed_form_error)},
                       {"closed_form_ok", r.closed_form_ok}});
        csv.add_row({static_cast<double>(r.q), static_cast<double>(r.r), r.min_abs, r.log_min_abs, r.argmin_t,
                     static_cast<double>(r.violations), r.closed_form_error});
        all = all && r.closed_form_ok;
      }
      o.results["rows"] = arr;
      o.results["closed_forms_ok"] = all;
      o.csv = csv;
      return o;
    });
  }

  replay_ = app_.add_subcommand("replay", "re-run a result file's manifest and compare outputs");
  replay_->add_option("--manifest", replay_manifest_, "result document (or bare manifest) to replay")->required();
}

struct Execution {
  Json document;
  std::optional<std::string> csv;
  RunManifest manifest;
};

/// Runs the selected command and assembles its document.
inline Execution execute(const Command& cmd) {
  RunManifest m;
  m.command = cmd.path();
  for (const auto& [k, v] : cmd.values())
    if (k != "seed") m.params[k] = v;
  m.flags = cmd.flags();
  m.seed = cmd.text("seed");
  parse_integer(m.seed, "seed");
  m.precision_bits = precision_bits();
  m.json_path = cmd.json_path();
  m.csv_path = cmd.csv_path();
  const auto start = std::chrono::steady_clock::now();
  Outcome o = cmd.run();
  m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  m.N = o.N;
  Execution e;
  Json diagnostics;
  diagnostics["notes"] = o.notes;
  if (!m.csv_path.empty() && !o.csv) diagnostics["notes"].push_back("this command has no CSV output; --csv ignored");
  e.document = make_document(m, std::move(o.results), std::move(diagnostics));
  if (o.csv) e.csv = o.csv->str();
  e.manifest = m;
  return e;
}

/// The argument vector that reproduces a manifest.
inline std::vector<std::string> replay_arguments(const RunManifest& m) {
  std::vector<std::string> args{"bishop"};
  for (const auto& tok : split(m.command, ' ')) args.push_back(tok);
  for (const auto& [k, v] : m.params) {
    args.push_back("--" + k);
    args.push_back(v);
  }
  args.push_back("--seed");
  args.push_back(m.seed);
  for (const auto& [k, on] : m.flags)
    if (on) args.push_back("--" + k);
  // Output paths are recorded in the manifest; execute() never writes them.
  if (!m.json_path.empty()) args.insert(args.end(), {"--json", m.json_path});
  if (!m.csv_path.empty()) args.insert(args.end(), {"--csv", m.csv_path});
  return args;
}

inline int parse_into(Cli& cli, const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                      bool& stop) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  stop = false;
  try {
    cli.app().parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    stop = true;
    const int code = cli.app().exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  return 0;
}

inline int replay(const std::string& path, std::ostream& out, std::ostream& err) {
  const Json stored = Json::parse(read_text_file(path));
  const bool full = stored.contains("manifest");
  const RunManifest m = RunManifest::from_json(full ? stored["manifest"] : stored);

  // Re-run under the recorded precision.
  const char* old = std::getenv("BISHOP_PRECISION_BITS");
  const std::optional<std::string> saved = old ? std::optional<std::string>(old) : std::nullopt;
  setenv("BISHOP_PRECISION_BITS", std::to_string(m.precision_bits).c_str(), 1);
  Execution e;
  Cli cli;
  bool stop = false;
  int code = parse_into(cli, replay_arguments(m), out, err, stop);
  if (!stop) {
    const Command* cmd = cli.selected();
    require(cmd != nullptr, "manifest command '" + m.command + "' is not a runnable command");
    e = execute(*cmd);
  }
  if (saved) {
    setenv("BISHOP_PRECISION_BITS", saved->c_str(), 1);
  } else {
    unsetenv("BISHOP_PRECISION_BITS");
  }
  if (stop) return code == 0 ? 1 : code;

  std::vector<std::string> mismatches;
  Json expected;
  bool have_expected = false;
  if (full) {
    expected = stored;
    have_expected = true;
  } else if (!m.json_path.empty()) {
    expected = Json::parse(read_text_file(m.json_path));
    have_expected = true;
  }
  if (have_expected && comparable_document(expected) != comparable_document(e.document)) mismatches.push_back("json");
  if (!m.csv_path.empty() && e.csv) {
    if (read_text_file(m.csv_path) != *e.csv) mismatches.push_back("csv (" + m.csv_path + ")");
  }
  if (!have_expected) {
    out << render_document(e.document);
    return 0;
  }
  if (mismatches.empty()) {
    out << "replay: identical (" << m.command << ")\n";
    return 0;
  }
  err << "replay: mismatch in";
  for (const auto& s : mismatches) err << " " << s;
  err << " (" << m.command << ")\n";
  return 2;
}

/// Entry point: exit 0 on success, 1 on usage, parse or precondition
/// errors, 2 on numerical failure.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    Cli cli;
    bool stop = false;
    const int code = parse_into(cli, args, out, err, stop);
    if (stop) return code;
    if (cli.replay_selected()) return replay(cli.replay_manifest(), out, err);
    const Command* cmd = cli.selected();
    require(cmd != nullptr, "no command given");
    const Execution e = execute(*cmd);
    if (!e.manifest.json_path.empty()) {
      write_text_file(e.manifest.json_path, render_document(e.document));
      out << "wrote " << e.manifest.json_path << "\n";
    } else {
      out << render_document(e.document);
    }
    if (!e.manifest.csv_path.empty() && e.csv) {
      write_text_file(e.manifest.csv_path, *e.csv);
      out << "wrote " << e.manifest.csv_path << "\n";
    }
    return 0;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace bishop::cli
