// Acceptance run: one PASS/FAIL line per criterion, exit 0 only if all pass.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>

#include "bishop/cli.hpp"

using namespace bishop;

namespace {

struct Check {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

using Seconds = std::chrono::duration<double>;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

const FuncExpr kOne = parse_function("1");
const FuncExpr kX = parse_function("x");

Check rational_spectral_radius_matches() {
  Check v;
  double worst_err = 0.0, worst_time = 0.0;
  for (long q = 2; q <= 10; ++q) {
    const auto start = std::chrono::steady_clock::now();
    const auto spec = bishop_operator(AlphaValue::rational(BigRational(1, q)));
    const auto est = power_norm(spec, static_cast<std::size_t>(q), GridSpec(100000));
    const double got = std::exp(est.log_value / static_cast<double>(q));
    const double secs = Seconds(std::chrono::steady_clock::now() - start).count();
    const double err = std::abs(got - rational_spectral_radius(q));
    worst_err = std::max(worst_err, err);
    worst_time = std::max(worst_time, secs);
    v.check(err <= 1e-4, "q = " + std::to_string(q) + " off by " + fmt("%.2e", err));
    v.check(secs < 1.0, "q = " + std::to_string(q) + " took " + fmt("%.2f s", secs));
  }
  if (v.pass) v.detail = "max error " + fmt("%.2e", worst_err) + ", slowest q " + fmt("%.3f s", worst_time);
  return v;
}

Check golden_spectral_radius() {
  Check v;
  const auto start = std::chrono::steady_clock::now();
  const auto spec = bishop_operator(parse_alpha("golden:40"));
  const double r = spectral_radius_estimate(spec, 2000, GridSpec(200000));
  const double secs = Seconds(std::chrono::steady_clock::now() - start).count();
  v.check(r >= 0.35 && r <= 0.40, "estimate " + fmt("%.6f", r) + " outside [0.35, 0.40]");
  v.check(secs < 30.0, "took " + fmt("%.1f s", secs));
  if (v.pass) v.detail = "estimate " + fmt("%.6f", r) + " vs 1/e = 0.367879, " + fmt("%.1f s", secs);
  return v;
}

Check delta_closed_form() {
  Check v;
  const FuncExpr square = parse_function("x^2");
  double worst = 0.0;
  std::size_t cases = 0;
  for (const char* text : {"1", "exp(x)", "1 + x"}) {
    const FuncExpr f = parse_function(text);
    for (const FuncExpr* w : {&kX, &square}) {
      for (long q = 2; q <= 8; ++q) {
        for (long r = 1; r < q; ++r) {
          if (std::gcd(r, q) != 1) continue;
          const auto rot = RationalRotation::from(r, q);
          const Complex closed = delta_at_zero_closed_form(f, *w, rot);
          const Complex lu = delta_sample(f, *w, rot, 0.0).value();
          const double rel = std::abs(closed - lu) / std::abs(lu);
          worst = std::max(worst, rel);
          ++cases;
          v.check(rel <= 1e-9, std::string(text) + " at " + std::to_string(r) + "/" + std::to_string(q));
        }
      }
    }
  }
  const double half = delta_at_zero_closed_form(kOne, kX, RationalRotation::from(1, 2)).real();
  const double third = delta_at_zero_closed_form(kOne, kX, RationalRotation::from(1, 3)).real();
  v.check(std::abs(half - 0.5) <= 1e-15, "Delta(1, 1/2)(0) = " + fmt("%.17g", half));
  v.check(std::abs(third + 4.0 / 27.0) <= 1e-15, "Delta(1, 1/3)(0) = " + fmt("%.17g", third));
  if (v.pass) v.detail = std::to_string(cases) + " cases, max relative error " + fmt("%.2e", worst);
  return v;
}

Check constructive_cyclicity() {
  Check v;
  const auto start = std::chrono::steady_clock::now();
  const auto rot = RationalRotation::from(1, 3);
  const auto spec = bishop_operator(rot.alpha());
  std::string summary;
  for (const char* text : {"x", "x^2", "sin(2*pi*x)"}) {
    const FuncExpr g = parse_function(text);
    const auto rep = approx_polynomial(kOne, kX, rot, g, 0.05, {.samples = 1u << 14});
    v.check(rep.verified_residual < 0.05, std::string(text) + " residual " + fmt("%.3g", rep.verified_residual));
    const auto span = orbit_span_residual(kOne, spec, g, rep.Q.size(), GridSpec(rep.verification_grid));
    v.check(span.residual <= rep.verified_residual + 1e-9,
            std::string(text) + " span residual " + fmt("%.3g", span.residual) + " above constructed");
    summary += std::string(summary.empty() ? "" : ", ") + text + " " + fmt("%.2e", rep.verified_residual) + " (deg " +
               std::to_string(rep.Q.size() - 1) + ")";
  }
  const double secs = Seconds(std::chrono::steady_clock::now() - start).count();
  v.check(secs < 60.0, "took " + fmt("%.1f s", secs));
  if (v.pass) v.detail = summary + ", " + fmt("%.1f s", secs);
  return v;
}

Check non_cyclicity() {
  Check v;
  const FuncExpr f = parse_function("indicator(1/4, 1/2) + indicator(3/4, 1)");
  const auto rot = RationalRotation::from(1, 2);
  const auto rep = cyclicity_test(f, kX, rot, 1000);
  v.check(rep.verdict == bishop::Verdict::NotCyclic, "verdict is not not-cyclic");
  std::size_t zeros = 0, below = 0;
  for (std::size_t m = 0; m < rep.profile.t.size(); ++m) {
    if (rep.profile.t[m] >= 0.25) continue;
    ++below;
    if (rep.profile.log_abs[m] == -std::numeric_limits<double>::infinity()) ++zeros;
  }
  v.check(below > 0 && zeros == below, std::to_string(below - zeros) + " nonzero samples on [0, 1/4)");
  const auto spec = bishop_operator(rot.alpha());
  double least = 1.0;
  for (std::size_t K = 1; K <= 50; ++K)
    least = std::min(least, orbit_span_residual(f, spec, kOne, K, GridSpec(4096)).residual);
  v.check(least >= 0.45, "span residual " + fmt("%.4f", least));
  if (v.pass) v.detail = std::to_string(zeros) + " zero samples on [0, 1/4), min span residual " + fmt("%.4f", least);
  return v;
}

Check dirichlet_exactness() {
  Check v;
  std::mt19937_64 rng(0);
  const BigInt scale = BigInt(1) << 256;
  for (int k = 0; k < 10; ++k) {
    BigInt num = 0;
    for (int w = 0; w < 4; ++w) num = (num << 64) + BigInt(rng());
    if (num == 0) num = 1;
    const BigRational alpha(num, scale);
    const auto cf = cf_expand(alpha, 25);
    const auto checks = check_dirichlet(cf, alpha);
    v.check(!checks.empty() && std::all_of(checks.begin(), checks.end(), [](bool b) { return b; }),
            "Dirichlet fails for proxy " + std::to_string(k));
    const std::string inv = cf.verify_invariants();
    v.check(inv.empty(), "proxy " + std::to_string(k) + ": " + inv);
  }
  if (v.pass) v.detail = "10 proxies, 25 levels each, invariants exact";
  return v;
}

Check psi_pipeline() {
  Check v;
  const auto start = std::chrono::steady_clock::now();
  const auto rep = verify_irrational_cyclicity(kOne, kX, TargetFamily::standard().truncated(3), {2, 3}, {0.1}, 4,
                                               PsiConfig{});
  const double secs = Seconds(std::chrono::steady_clock::now() - start).count();
  v.check(rep.gaps_cover_used_levels, "gaps do not hold at every used level");
  double worst = 0.0;
  for (const auto& t : rep.targets) {
    v.check(t.assigned, "target " + t.target + " unassigned");
    v.check(t.alpha_residual < 0.2, "target " + t.target + " residual " + fmt("%.3g", t.alpha_residual));
    worst = std::max(worst, t.alpha_residual);
  }
  v.check(rep.targets.size() == 3, "expected 3 targets");
  v.check(secs < 120.0, "took " + fmt("%.1f s", secs));
  if (v.pass) v.detail = "max residual " + fmt("%.3f", worst) + ", " + fmt("%.1f s", secs);
  return v;
}

Check measure_invariance() {
  Check v;
  const std::size_t N = 100000;
  const GridSpec grid(N);
  double worst = 0.0;
  for (const char* f_text : {"x - 1/2", "cos(2*pi*x) - 0.3"}) {
    const FuncExpr f = parse_function(f_text);
    for (const char* a_text : {"1/3", "golden"}) {
      const auto spec = bishop_operator(parse_alpha(a_text));
      for (std::size_t n : {1u, 2u, 3u, 10u, 50u, 100u, 200u}) {
        for (double a : {0.5, 1.0, 7.0}) {
          const auto r = supercyclicity_invariance(f, spec, n, a, grid);
          worst = std::max(worst, r.deviation);
          v.check(r.deviation <= 5.0 / static_cast<double>(N),
                  std::string(f_text) + ", alpha " + a_text + ", n " + std::to_string(n) + ": " + fmt("%.2e", r.deviation));
        }
      }
    }
  }
  if (v.pass) v.detail = "max deviation " + fmt("%.2e", worst) + " (5/N = 5e-05)";
  return v;
}

Check convex_lemma() {
  Check v;
  std::size_t checked = 0;
  for (const auto& p : random_convex_products(20, 0)) {
    const auto c = convex_product_bound_check(parse_function(p.expression), p.a, p.b, 100000);
    v.check(c.preconditions_ok, p.expression + ": " + c.precondition_failure);
    v.check(c.pass, p.expression + " violates the bound");
    ++checked;
  }
  std::size_t intervals = 0;
  const auto rows = cocycle_convex_checks(ContinuedFraction(parse_alpha("golden:40").partial_quotients()),
                                          std::exp(-1.0), 233, 100000);
  for (const auto& r : rows) {
    intervals += r.intervals;
    v.check(r.pass, "cocycle at q_n = " + io::integer(r.q).get<std::string>());
  }
  v.check(!rows.empty(), "no cocycle levels checked");
  if (v.pass)
    v.detail = std::to_string(checked) + " random products, " + std::to_string(rows.size()) + " cocycle levels (" +
               std::to_string(intervals) + " intervals)";
  return v;
}

Check eigenvalue_absence() {
  Check v;
  double least = std::numeric_limits<double>::infinity();
  for (long q = 2; q <= 10; ++q) {
    const auto w = periodic_weight(q, kX, 10000);
    least = std::min(least, w.min_forward_difference);
    v.check(w.min_forward_difference > 0.0, "w not increasing for q = " + std::to_string(q));
  }
  double worst = 0.0;
  for (long q = 2; q <= 10; ++q) {
    // Level halfway up w, whose supremum is q!/q^q; tol scales with it so the
    // level set stays away from the zero of w.
    const double sup = std::pow(rational_spectral_radius(q), static_cast<double>(q));
    const double lam = std::pow(0.5 * sup, 1.0 / static_cast<double>(q));
    const auto a = eigen_levelset_probe(q, kX, {lam}, 1e-4 * sup, 400000).rows[0];
    const auto b = eigen_levelset_probe(q, kX, {lam}, 4e-4 * sup, 400000).rows[0];
    const double slope_err = std::abs(a.measure / a.predicted - 1.0);
    const double ratio_err = std::abs(b.measure / (4.0 * a.measure) - 1.0);
    worst = std::max({worst, slope_err, ratio_err});
    v.check(a.measure > 0.0 && slope_err <= 0.2 && ratio_err <= 0.2,
            "q = " + std::to_string(q) + " measure " + fmt("%.3g", a.measure) + " vs " + fmt("%.3g", a.predicted));
  }
  if (v.pass)
    v.detail = "min forward difference " + fmt("%.2e", least) + ", worst deviation from linear " + fmt("%.1f%%", 100 * worst);
  return v;
}

Check unit_delta_report() {
  Check v;
  const auto rows = unit_delta_conjecture_probe(12, 1000);
  std::size_t violations = 0;
  double least = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    v.check(r.closed_form_ok, "Delta(0) mismatch at " + std::to_string(r.r) + "/" + std::to_string(r.q));
    violations += r.violations;
    least = std::min(least, r.min_abs);
  }
  if (v.pass)
    v.detail = std::to_string(rows.size()) + " rotations, min |Delta| " + fmt("%.3e", least) + ", " +
               std::to_string(violations) + " monotonicity violations (reported only)";
  return v;
}

Check replay_bit_for_bit() {
  Check v;
  const auto dir = std::filesystem::temp_directory_path() / "bishop_acceptance";
  std::filesystem::create_directories(dir);
  const std::vector<std::vector<std::string>> runs = {
      {"iterate", "--alpha", "golden", "--f", "cos(2*pi*x)", "--n", "25", "--samples", "2000"},
      {"spectrum", "--alpha", "1/7", "--n", "200", "--samples", "20000"},
      {"delta", "--alpha", "2/5", "--f", "exp(x)", "--samples", "500"},
      {"approx", "--alpha", "1/3", "--g", "sin(2*pi*x)", "--eps", "0.05", "--samples", "4096", "--oracle"},
      {"decompose", "--q", "3", "--g", "x^2", "--samples", "300", "--component", "2"},
      {"dirichlet", "--alpha", "sqrt2:25"},
      {"build-alpha", "--psi", "q^3", "--levels", "3"},
      {"verify-psi", "--m", "3", "--samples", "4096", "--grid", "2048"},
      {"probe", "eigen", "--q", "5", "--random", "6", "--seed", "11", "--samples", "20000"},
      {"probe", "convex", "--random", "5", "--seed", "3", "--samples", "20000"},
      {"probe", "unit-delta", "--q-max", "6", "--samples", "200"},
  };
  std::size_t k = 0;
  for (auto args : runs) {
    const std::string stem = (dir / ("run" + std::to_string(k++))).string();
    const std::string label = args[0] == "probe" ? args[0] + " " + args[1] : args[0];
    args.insert(args.begin(), "bishop");
    args.insert(args.end(), {"--json", stem + ".json", "--csv", stem + ".csv"});
    std::ostringstream out, err;
    if (cli::run(args, out, err) != 0) {
      v.check(false, label + " failed: " + err.str());
      continue;
    }
    const int code = cli::run({"bishop", "replay", "--manifest", stem + ".json"}, out, err);
    v.check(code == 0, label + " replay differs");
  }
  if (v.pass) v.detail = std::to_string(runs.size()) + " manifests replayed, JSON and CSV identical";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"rational spectral radius", rational_spectral_radius_matches},
      {"irrational spectral radius", golden_spectral_radius},
      {"Delta closed form", delta_closed_form},
      {"constructive cyclicity", constructive_cyclicity},
      {"non-cyclicity detection", non_cyclicity},
      {"Diophantine exactness", dirichlet_exactness},
      {"psi pipeline", psi_pipeline},
      {"measure invariance", measure_invariance},
      {"convex lemma", convex_lemma},
      {"eigenvalue absence", eigenvalue_absence},
      {"unit Delta probe", unit_delta_report},
      {"replay", replay_bit_for_bit},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Check v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("threw: ") + e.what();
    }
    const double secs = Seconds(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu  %-27s %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
