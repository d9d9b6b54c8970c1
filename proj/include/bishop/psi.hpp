#pragma once

// Finite polynomial banks P_q, the continuity radius delta(q) around each
// r/q, the growth function psi(q) = 1/(q delta(q)), and an end-to-end check
// that f is cyclic for T_alpha when alpha has psi-gaps at the banked levels.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
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

/// The ordered targets g_1..g_m standing in for a dense family.
struct TargetFamily {
  std::vector<std::string> labels;
  std::vector<FuncExpr> functions;

  static TargetFamily from_texts(const std::vector<std::string>& texts) {
    require(!texts.empty(), "target family needs at least one function");
    TargetFamily t;
    for (const auto& s : texts) {
      t.functions.push_back(parse_function(s));
      t.labels.push_back(s);
    }
    return t;
  }

  static TargetFamily standard() {
    return from_texts({"1", "x", "x^2", "sin(2*pi*x)", "cos(2*pi*x)", "indicator(0, 1/2)"});
  }

  TargetFamily truncated(std::size_t m) const {
    require(m >= 1 && m <= size(), "target family truncation out of range");
    TargetFamily t;
    t.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(m));
    t.functions.assign(functions.begin(), functions.begin() + static_cast<std::ptrdiff_t>(m));
    return t;
  }

  std::size_t size() const noexcept { return functions.size(); }
};

struct BankEntry {
  long r = 0;
  std::size_t j = 0;  // 1-based target index
  std::string target;
  Polynomial Q;
  double residual = 0.0;               // verified ||Q(T_{r/q}) f - g_j||_p
  double construction_residual = 0.0;
  std::size_t verification_grid = 0;
};

struct PolynomialBank {
  long q = 0;
  double eps = 0.0;
  double p = 2.0;
  std::vector<BankEntry> entries;

  const BankEntry* find(long r, std::size_t j) const {
    for (const auto& e : entries)
      if (e.r == r && e.j == j) return &e;
    return nullptr;
  }
};

/// Q_{r/q,j} for every r coprime to q and every j <= min(q, m), each with a
/// verified residual below eps.
inline PolynomialBank build_polynomial_bank(const FuncExpr& f, const FuncExpr& weight, long q,
                                            const TargetFamily& targets, double eps, const ApproxConfig& cfg = {}) {
  require(q >= 2, "bank needs q >= 2");
  require(eps > 0.0, "eps_q must be positive");
  require(targets.size() >= 1, "target family is empty");
  PolynomialBank bank;
  bank.q = q;
  bank.eps = eps;
  bank.p = cfg.p;
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(q), targets.size());
  for (long r = 1; r < q; ++r) {
    if (std::gcd(r, q) != 1) continue;
    const auto rot = RationalRotation::from(r, q);
    for (std::size_t j = 1; j <= m; ++j) {
      const std::string where = "bank entry " + rot.to_string() + ", target " + std::to_string(j) + " (" +
                                targets.labels[j - 1] + "): ";
      ApproxReport rep;
      try {
        rep = approx_polynomial(f, weight, rot, targets.functions[j - 1], eps, cfg);
      } catch (const PreconditionError& e) {
        throw PreconditionError(where + e.what());
      } catch (const NumericalError& e) {
        throw NumericalError(where + e.what());
      }
      if (!rep.meets_eps)
        throw NumericalError(where + "verified residual " + std::to_string(rep.verified_residual) + " is not below eps " +
                             std::to_string(eps));
      bank.entries.push_back({r, j, targets.labels[j - 1], rep.Q, rep.verified_residual, rep.construction_residual,
                              rep.verification_grid});
    }
  }
  return bank;
}

/// ||Q(T_beta) f - Q(T_{r/q}) f||_p on `grid`.
inline double perturbation_residual(const BankEntry& entry, const FuncExpr& f, const FuncExpr& weight, long q,
                                    const BigRational& beta, double p, const GridSpec& grid) {
  const OperatorSpec at_beta{weight, AlphaValue::rational(beta), p};
  const OperatorSpec at_rq{weight, AlphaValue::rational(BigInt(entry.r), BigInt(q)), p};
  auto v = apply_polynomial(at_beta, f, entry.Q, grid);
  const auto base = apply_polynomial(at_rq, f, entry.Q, grid);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= base[i];
  return lp_norm(v, p);
}

struct DeltaTest {
  long r = 0;
  std::size_t j = 0;
  BigRational beta;
  double residual = 0.0;
  bool pass = false;
};

struct DeltaStep {
  BigRational h;
  bool pass = false;
};

/// Everything needed to re-run the delta search result: the accepted radius,
/// the search trail, and every perturbation tested at the accepted radius.
struct DeltaCertificate {
  long q = 0;
  double eps = 0.0;
  double p = 2.0;
  std::size_t grid = 0;
  BigRational h_pass;
  BigRational delta;  // h_pass / 2
  std::vector<DeltaStep> trail;
  std::vector<DeltaTest> tests;
};

struct DeltaConfig {
  std::size_t grid = 4096;
  int bisection_steps = 8;
  double h_min = 1e-12;
};

/// Largest tested h such that every bank polynomial moves by less than eps
/// at beta = r/q +- h, halved. The search walks h = 2^-k down from the
/// largest dyadic not exceeding 1/q, then bisects between the first passing
/// h and the last failing one.
inline DeltaCertificate estimate_delta(const PolynomialBank& bank, const FuncExpr& f, const FuncExpr& weight,
                                       double eps, const DeltaConfig& cfg = {}) {
  require(eps > 0.0, "eps_q must be positive");
  require(!bank.entries.empty(), "bank is empty");
  const long q = bank.q;
  const GridSpec grid(cfg.grid);
  DeltaCertificate cert;
  cert.q = q;
  cert.eps = eps;
  cert.p = bank.p;
  cert.grid = cfg.grid;

  std::vector<DeltaTest> tests;
  const auto run = [&](const BigRational& h) {
    tests.clear();
    bool ok = true;
    for (const auto& e : bank.entries) {
      const BigRational center(BigInt(e.r), BigInt(q));
      for (const BigRational& beta : {BigRational(center - h), BigRational(center + h)}) {
        const double res = perturbation_residual(e, f, weight, q, beta, bank.p, grid);
        tests.push_back({e.r, e.j, beta, res, res < eps});
        if (!(res < eps)) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    cert.trail.push_back({h, ok});
    return ok;
  };

  const BigRational h_max(BigInt(1), BigInt(q));
  BigRational h(1);
  while (h > h_max) h /= 2;
  const BigRational first = h;
  bool found = false;
  while (to_double(h) >= cfg.h_min) {
    if (run(h)) {
      found = true;
      break;
    }
    h /= 2;
  }
  if (!found)
    throw NumericalError("no perturbation radius down to " + std::to_string(cfg.h_min) + " keeps every Q within eps at q = " +
                         std::to_string(q));
  BigRational lo = h;
  BigRational hi = h == first ? h_max : h * 2;
  std::vector<DeltaTest> accepted = tests;
  for (int step = 0; step < cfg.bisection_steps && hi > lo; ++step) {
    const BigRational mid = (lo + hi) / 2;
    if (run(mid)) {
      lo = mid;
      accepted = tests;
    } else {
      hi = mid;
    }
  }
  cert.h_pass = lo;
  cert.delta = lo / 2;
  cert.tests = std::move(accepted);
  return cert;
}

struct ReplayResult {
  bool ok = true;
  std::size_t checked = 0;
  double max_deviation = 0.0;
  std::string failure;
};

/// Recomputes every stored perturbation residual and checks the stored radius.
inline ReplayResult replay_delta_certificate(const DeltaCertificate& cert, const PolynomialBank& bank,
                                             const FuncExpr& f, const FuncExpr& weight) {
  ReplayResult out;
  const auto fail = [&](const std::string& why) {
    if (out.ok) out.failure = why;
    out.ok = false;
  };
  if (cert.delta * 2 != cert.h_pass) fail("delta is not h_pass / 2");
  const GridSpec grid(cert.grid);
  for (const auto& t : cert.tests) {
    const BankEntry* e = bank.find(t.r, t.j);
    if (!e) {
      fail("no bank entry for r = " + std::to_string(t.r) + ", j = " + std::to_string(t.j));
      continue;
    }
    const BigRational center(BigInt(t.r), BigInt(cert.q));
    const BigRational offset = t.beta > center ? t.beta - center : center - t.beta;
    if (offset != cert.h_pass) fail("tested beta is not at distance h_pass from r/q");
    const double res = perturbation_residual(*e, f, weight, cert.q, t.beta, cert.p, grid);
    out.max_deviation = std::max(out.max_deviation, std::abs(res - t.residual));
    if (res != t.residual) fail("residual at beta = " + bishop::to_string(t.beta) + " does not reproduce");
    if ((res < cert.eps) != t.pass || !t.pass) fail("stored verdict at beta = " + bishop::to_string(t.beta) + " fails");
    ++out.checked;
  }
  if (out.checked != 2 * bank.entries.size()) fail("certificate does not cover every bank entry at both signs");
  return out;
}

/// psi(q) = 1/(q delta), exactly.
inline BigRational psi_value(long q, const BigRational& delta) {
  require(q >= 1, "psi needs q >= 1");
  require(delta > 0, "delta must be positive");
  return BigRational(1) / (BigRational(q) * delta);
}

struct PsiEntry {
  BigRational delta;
  BigRational psi;
  DeltaCertificate certificate;
};

struct PsiTable {
  std::map<long, PsiEntry> entries;

  void insert(const DeltaCertificate& cert) { entries[cert.q] = {cert.delta, psi_value(cert.q, cert.delta), cert}; }

  /// psi * q * delta == 1 for every stored row.
  bool identity_holds() const {
    for (const auto& [q, e] : entries)
      if (e.psi * BigRational(q) * e.delta != 1) return false;
    return true;
  }

  GrowthFunction growth() const {
    std::map<BigInt, BigRational> table;
    for (const auto& [q, e] : entries) table[BigInt(q)] = e.psi;
    return GrowthFunction::from_table(std::move(table));
  }
};

/// Partial quotients whose convergent denominators are exactly q_list:
/// q_1 = a_1 and q_{n+1} = a_{n+1} q_n + q_{n-1}.
inline std::vector<BigInt> route_denominators(const std::vector<long>& q_list) {
  require(!q_list.empty(), "q_list is empty");
  std::vector<BigInt> a;
  BigInt prev(1), prev2(0);
  for (long t : q_list) {
    require(t >= 2, "every q in q_list must be >= 2");
    const BigInt num = BigInt(t) - prev2;
    require(num > 0 && num % prev == 0 && num / prev >= 1,
            "q_list is not a sequence of convergent denominators: " + std::to_string(t) + " does not follow " +
                prev.str());
    a.push_back(num / prev);
    prev2 = prev;
    prev = t;
  }
  return a;
}

struct PsiConfig {
  ApproxConfig approx{.samples = 8192};
  DeltaConfig delta;
  std::size_t verify_grid = 12289;  // shares no points with the power-of-two construction grids
};

struct TargetVerification {
  std::size_t j = 0;
  std::string target;
  bool assigned = false;
  std::size_t level = 0;  // n_0
  long q = 0;
  long r = 0;
  Polynomial Q;
  double eps = 0.0;
  double bound = 0.0;                  // 2 eps
  double rational_residual = 0.0;      // ||Q(T_{r/q}) f - g||
  double perturbation_residual = 0.0;  // ||Q(T_alpha) f - Q(T_{r/q}) f||
  double alpha_residual = 0.0;         // ||Q(T_alpha) f - g||
  bool gap_holds = false;
  bool within_delta = false;
  bool triangle_ok = false;
  bool passed = false;
};

struct IrrationalCyclicityReport {
  ContinuedFraction cf;
  std::vector<long> q_list;
  std::vector<BigInt> seed;
  std::map<long, PolynomialBank> banks;
  PsiTable psi;
  GapCondition gaps;
  std::vector<TargetVerification> targets;
  std::vector<std::size_t> used_levels;
  bool gaps_cover_used_levels = false;
  bool verified = false;
  std::size_t grid = 0;
  std::vector<std::string> notes;
};

/// Verification stage with banks and psi already computed. Each target g_j
/// is checked at the first level n_0 < L with q_{n_0} banked and q_{n_0} >= j,
/// preferring levels where the gap q_{n_0+1} > psi(q_{n_0}) holds.
inline IrrationalCyclicityReport verify_with_banks(const FuncExpr& f, const FuncExpr& weight, const TargetFamily& targets,
                                                   const std::map<long, PolynomialBank>& banks, const PsiTable& psi,
                                                   const ContinuedFraction& cf, const PsiConfig& cfg = {}) {
  IrrationalCyclicityReport rep;
  rep.cf = cf;
  rep.banks = banks;
  rep.psi = psi;
  rep.grid = cfg.verify_grid;
  rep.gaps = gap_indices(cf, psi.growth());
  const GridSpec grid(cfg.verify_grid);
  const AlphaValue alpha = cf.alpha();
  const long L = static_cast<long>(cf.length());

  for (std::size_t j = 1; j <= targets.size(); ++j) {
    TargetVerification tv;
    tv.j = j;
    tv.target = targets.labels[j - 1];
    std::optional<long> pick;
    for (int pass = 0; pass < 2 && !pick; ++pass) {
      for (long n = 1; n < L && !pick; ++n) {
        if (bit_length(cf.q(n)) > 62) break;
        const long qn = static_cast<long>(cf.q(n));
        const auto it = banks.find(qn);
        if (it == banks.end() || qn < static_cast<long>(j)) continue;
        if (!it->second.find(static_cast<long>(cf.p(n)), j)) continue;
        if (pass == 0 && !rep.gaps.contains(static_cast<std::size_t>(n))) continue;
        pick = n;
      }
    }
    if (!pick) {
      rep.notes.push_back("target " + std::to_string(j) + " (" + tv.target + ") has no banked level with q >= " +
                          std::to_string(j) + "; skipped");
      rep.targets.push_back(tv);
      continue;
    }
    const long n0 = *pick;
    const PolynomialBank& bank = banks.at(static_cast<long>(cf.q(n0)));
    const BankEntry& entry = *bank.find(static_cast<long>(cf.p(n0)), j);
    tv.assigned = true;
    tv.level = static_cast<std::size_t>(n0);
    tv.q = bank.q;
    tv.r = entry.r;
    tv.Q = entry.Q;
    tv.eps = bank.eps;
    tv.bound = 2.0 * bank.eps;
    tv.gap_holds = rep.gaps.contains(tv.level);
    if (const auto d = psi.entries.find(bank.q); d != psi.entries.end()) {
      const BigRational gap = alpha.value() - cf.convergent(n0);
      tv.within_delta = (gap < 0 ? -gap : gap) < d->second.delta;
    }
    const OperatorSpec at_alpha{weight, alpha, bank.p};
    const OperatorSpec at_rq{weight, AlphaValue::rational(BigInt(entry.r), BigInt(bank.q)), bank.p};
    const auto va = apply_polynomial(at_alpha, f, entry.Q, grid);
    const auto vr = apply_polynomial(at_rq, f, entry.Q, grid);
    const auto g = sample(targets.functions[j - 1], grid);
    std::vector<Complex> da(va.size()), dr(va.size()), dp(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
      da[i] = va[i] - g[i];
      dr[i] = vr[i] - g[i];
      dp[i] = va[i] - vr[i];
    }
    tv.alpha_residual = lp_norm(da, bank.p);
    tv.rational_residual = lp_norm(dr, bank.p);
    tv.perturbation_residual = lp_norm(dp, bank.p);
    tv.triangle_ok = tv.alpha_residual <= tv.rational_residual + tv.perturbation_residual + 1e-9;
    tv.passed = tv.alpha_residual < tv.bound;
    rep.used_levels.push_back(tv.level);
    rep.targets.push_back(tv);
  }
  std::sort(rep.used_levels.begin(), rep.used_levels.end());
  rep.used_levels.erase(std::unique(rep.used_levels.begin(), rep.used_levels.end()), rep.used_levels.end());
  rep.gaps_cover_used_levels = std::all_of(rep.used_levels.begin(), rep.used_levels.end(),
                                           [&](std::size_t n) { return rep.gaps.contains(n); });
  const bool any = std::any_of(rep.targets.begin(), rep.targets.end(), [](const auto& t) { return t.assigned; });
  rep.verified = any && std::all_of(rep.targets.begin(), rep.targets.end(), [](const auto& t) {
    return !t.assigned || (t.passed && t.triangle_ok);
  });
  if (!rep.gaps_cover_used_levels) rep.notes.push_back("gap condition fails at a level used for verification");
  return rep;
}

/// Full pipeline: banks and delta for each q in q_list (eps_schedule is
/// aligned with q_list, or a single value for all), alpha routed through
/// q_list and extended by `levels` psi-gap quotients, then verification.
/// `alpha_override` replaces the constructed alpha (its gaps are still
/// reported).
inline IrrationalCyclicityReport verify_irrational_cyclicity(const FuncExpr& f, const FuncExpr& weight,
                                                             const TargetFamily& targets, const std::vector<long>& q_list,
                                                             const std::vector<double>& eps_schedule, std::size_t levels,
                                                             const PsiConfig& cfg = {},
                                                             const std::optional<ContinuedFraction>& alpha_override = {}) {
  require(eps_schedule.size() == 1 || eps_schedule.size() == q_list.size(),
          "eps schedule must have one value or one per q");
  require(levels >= 1 || alpha_override.has_value(), "need at least one gap level");
  const auto seed = route_denominators(q_list);
  std::map<long, PolynomialBank> banks;
  PsiTable psi;
  for (std::size_t i = 0; i < q_list.size(); ++i) {
    const long q = q_list[i];
    const double eps = eps_schedule.size() == 1 ? eps_schedule[0] : eps_schedule[i];
    banks[q] = build_polynomial_bank(f, weight, q, targets, eps, cfg.approx);
    psi.insert(estimate_delta(banks[q], f, weight, eps, cfg.delta));
  }
  const ContinuedFraction cf = alpha_override ? *alpha_override : build_alpha_with_gaps(psi.growth(), levels, seed);
  auto rep = verify_with_banks(f, weight, targets, banks, psi, cf, cfg);
  rep.q_list = q_list;
  rep.seed = seed;
  if (alpha_override) rep.notes.push_back("alpha supplied by the caller, not constructed from psi");
  return rep;
}

}  // namespace bishop
