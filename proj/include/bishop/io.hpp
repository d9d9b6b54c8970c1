#pragma once

// JSON and CSV persistence: value encoders, report serializers, the run
// manifest, and the {schema_version, manifest, results, diagnostics} document.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bishop/cyclicity.hpp"
#include "bishop/diophantine.hpp"
#include "bishop/operator.hpp"
#include "bishop/probes.hpp"
#include "bishop/psi.hpp"
#include "bishop/rational.hpp"

namespace bishop {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

namespace io {

/// Finite doubles as numbers; infinities and NaN as strings, which JSON
/// cannot otherwise carry.
inline Json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline Json cplx(Complex z) { return Json::array({num(z.real()), num(z.imag())}); }

inline Json reals(const std::vector<double>& v) {
  Json a = Json::array();
  for (double d : v) a.push_back(num(d));
  return a;
}

inline Json complexes(std::span<const Complex> v) {
  Json a = Json::array();
  for (const auto& z : v) a.push_back(cplx(z));
  return a;
}

inline Json rational(const BigRational& r) { return bishop::to_string(r); }
inline Json integer(const BigInt& v) { return v.str(); }

inline Json quotients(const ContinuedFraction& cf) {
  Json a = Json::array();
  for (const auto& s : cf.to_strings()) a.push_back(s);
  return a;
}

inline Json alpha(const AlphaValue& a) {
  Json j;
  j["text"] = a.to_string();
  j["value"] = rational(a.value());
  j["approx"] = num(a.to_double());
  return j;
}

inline Json convergents(const ContinuedFraction& cf) {
  Json a = Json::array();
  for (long n = 1; n <= static_cast<long>(cf.length()); ++n) a.push_back({{"p", integer(cf.p(n))}, {"q", integer(cf.q(n))}});
  return a;
}

inline Json norm(const NormEstimate& e) {
  Json j;
  j["value"] = num(e.value);
  j["log_value"] = num(e.log_value);
  j["argmax"] = num(e.argmax);
  j["refined"] = e.refined;
  if (e.refined) {
    j["refined_value"] = num(e.refined_value);
    j["refined_log_value"] = num(e.refined_log_value);
    j["converged"] = e.converged;
  }
  return j;
}

inline Json rotation(const RationalRotation& r) { return {{"r", r.r}, {"q", r.q}}; }

inline Json profile(const DeltaProfile& p, bool samples) {
  Json j;
  j["rotation"] = rotation(p.rot);
  j["samples"] = p.t.size();
  j["min_abs"] = num(p.min_abs);
  j["min_log_abs"] = num(p.min_log_abs);
  j["argmin_t"] = num(p.argmin_t);
  j["min_rcond"] = num(p.min_rcond);
  if (samples) {
    j["t"] = reals(p.t);
    j["log_abs"] = reals(p.log_abs);
    j["phase"] = complexes(p.phase);
    j["rcond"] = reals(p.rcond);
  }
  return j;
}

inline Json cyclicity(const CyclicityReport& r) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["tol"] = num(r.tol);
  j["degenerate_fraction"] = num(r.degenerate_fraction);
  j["longest_degenerate_run"] = r.longest_degenerate_run;
  j["profile"] = profile(r.profile, false);
  return j;
}

inline Json approx(const ApproxReport& r) {
  Json j;
  j["rotation"] = rotation(r.rot);
  j["Q"] = complexes(r.Q);
  j["degree"] = r.Q.empty() ? Json(nullptr) : Json(r.Q.size() - 1);
  j["eps"] = num(r.eps);
  j["p"] = num(r.p);
  j["construction_grid"] = r.construction_grid;
  j["verification_grid"] = r.verification_grid;
  j["truncation_n"] = num(r.truncation_n);
  j["truncation_residual"] = num(r.truncation_residual);
  j["omega_measure"] = num(r.omega_measure);
  j["flagged_samples"] = r.flagged_samples;
  j["reconstruction_error"] = num(r.reconstruction_error);
  j["component_degrees"] = r.component_degrees;
  j["component_residuals"] = reals(r.component_residuals);
  j["stage_bound"] = num(r.stage_bound);
  j["construction_residual"] = num(r.construction_residual);
  j["verified_residual"] = num(r.verified_residual);
  j["meets_eps"] = r.meets_eps;
  j["best_effort"] = r.best_effort;
  return j;
}

inline Json span_residual(const SpanResidual& s, std::size_t K) {
  return {{"K", K},
          {"residual", num(s.residual)},
          {"rank", s.rank},
          {"regularized", s.regularized},
          {"coefficients", complexes(s.coeffs)}};
}

inline Json gaps(const GapCondition& g) {
  Json j;
  j["psi"] = g.psi;
  j["indices"] = g.indices;
  Json holds = Json::array();
  for (bool b : g.holds) holds.push_back(b);
  j["holds"] = holds;
  j["tail_condition"] = g.tail_condition;
  j["chamizo_ratio"] = num(g.chamizo_ratio);
  return j;
}

inline Json bank(const PolynomialBank& b) {
  Json j;
  j["q"] = b.q;
  j["eps"] = num(b.eps);
  j["p"] = num(b.p);
  Json entries = Json::array();
  for (const auto& e : b.entries) {
    entries.push_back({{"r", e.r},
                       {"j", e.j},
                       {"target", e.target},
                       {"Q", complexes(e.Q)},
                       {"residual", num(e.residual)},
                       {"construction_residual", num(e.construction_residual)},
                       {"verification_grid", e.verification_grid}});
  }
  j["entries"] = entries;
  return j;
}

inline Json certificate(const DeltaCertificate& c) {
  Json j;
  j["q"] = c.q;
  j["eps"] = num(c.eps);
  j["p"] = num(c.p);
  j["grid"] = c.grid;
  j["h_pass"] = rational(c.h_pass);
  j["delta"] = rational(c.delta);
  j["delta_approx"] = num(to_double(c.delta));
  Json trail = Json::array();
  for (const auto& s : c.trail) trail.push_back({{"h", rational(s.h)}, {"pass", s.pass}});
  j["trail"] = trail;
  Json tests = Json::array();
  for (const auto& t : c.tests)
    tests.push_back({{"r", t.r}, {"j", t.j}, {"beta", rational(t.beta)}, {"residual", num(t.residual)}, {"pass", t.pass}});
  j["tests"] = tests;
  return j;
}

inline Json psi_table(const PsiTable& t) {
  Json a = Json::array();
  for (const auto& [q, e] : t.entries)
    a.push_back({{"q", q}, {"delta", rational(e.delta)}, {"psi", rational(e.psi)}, {"psi_approx", num(to_double(e.psi))}});
  return a;
}

inline Json irrational(const IrrationalCyclicityReport& r) {
  Json j;
  j["q_list"] = r.q_list;
  Json seed = Json::array();
  for (const auto& s : r.seed) seed.push_back(s.str());
  j["seed_quotients"] = seed;
  j["alpha_quotients"] = quotients(r.cf);
  j["alpha_approx"] = num(to_double(r.cf.value()));
  j["psi"] = psi_table(r.psi);
  j["psi_identity"] = r.psi.identity_holds();
  j["gaps"] = gaps(r.gaps);
  j["used_levels"] = r.used_levels;
  j["gaps_cover_used_levels"] = r.gaps_cover_used_levels;
  j["verify_grid"] = r.grid;
  Json targets = Json::array();
  for (const auto& t : r.targets) {
    Json o;
    o["j"] = t.j;
    o["target"] = t.target;
    o["assigned"] = t.assigned;
    if (t.assigned) {
      o["level"] = t.level;
      o["q"] = t.q;
      o["r"] = t.r;
      o["Q"] = complexes(t.Q);
      o["eps"] = num(t.eps);
      o["bound"] = num(t.bound);
      o["rational_residual"] = num(t.rational_residual);
      o["perturbation_residual"] = num(t.perturbation_residual);
      o["alpha_residual"] = num(t.alpha_residual);
      o["gap_holds"] = t.gap_holds;
      o["within_delta"] = t.within_delta;
      o["triangle_ok"] = t.triangle_ok;
      o["passed"] = t.passed;
    }
    targets.push_back(o);
  }
  j["targets"] = targets;
  j["verified"] = r.verified;
  return j;
}

inline Json convex(const ConvexCheck& c) {
  Json j;
  j["a"] = num(c.a);
  j["b"] = num(c.b);
  j["preconditions_ok"] = c.preconditions_ok;
  if (!c.preconditions_ok) j["precondition_failure"] = c.precondition_failure;
  j["measure"] = num(c.measure);
  j["bound"] = num(c.bound);
  j["slack"] = num(c.slack);
  j["pass"] = c.pass;
  return j;
}

}  // namespace io

/// Everything needed to reproduce a result file.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> params;
  std::map<std::string, bool> flags;
  std::optional<std::size_t> N;
  int precision_bits = 256;
  std::string seed = "0";
  std::string version = kVersion;
  double duration_seconds = 0.0;
  std::string json_path;
  std::string csv_path;

  Json to_json() const {
    Json j;
    j["command"] = command;
    Json p = Json::object();
    for (const auto& [k, v] : params) p[k] = v;
    j["params"] = p;
    Json f = Json::object();
    for (const auto& [k, v] : flags) f[k] = v;
    j["flags"] = f;
    j["N"] = N ? Json(*N) : Json(nullptr);
    j["precision_bits"] = precision_bits;
    j["seed"] = seed;
    j["version"] = version;
    j["duration_seconds"] = duration_seconds;
    Json out = Json::object();
    if (!json_path.empty()) out["json"] = json_path;
    if (!csv_path.empty()) out["csv"] = csv_path;
    j["outputs"] = out;
    return j;
  }

  static RunManifest from_json(const Json& j) {
    RunManifest m;
    require(j.contains("command") && j["command"].is_string(), "manifest has no command");
    m.command = j["command"].get<std::string>();
    if (j.contains("params"))
      for (const auto& [k, v] : j["params"].items()) m.params[k] = v.get<std::string>();
    if (j.contains("flags"))
      for (const auto& [k, v] : j["flags"].items()) m.flags[k] = v.get<bool>();
    if (j.contains("N") && !j["N"].is_null()) m.N = j["N"].get<std::size_t>();
    if (j.contains("precision_bits")) m.precision_bits = j["precision_bits"].get<int>();
    if (j.contains("seed")) m.seed = j["seed"].get<std::string>();
    if (j.contains("version")) m.version = j["version"].get<std::string>();
    if (j.contains("duration_seconds")) m.duration_seconds = j["duration_seconds"].get<double>();
    if (j.contains("outputs")) {
      const auto& o = j["outputs"];
      if (o.contains("json")) m.json_path = o["json"].get<std::string>();
      if (o.contains("csv")) m.csv_path = o["csv"].get<std::string>();
    }
    return m;
  }
};

inline Json make_document(const RunManifest& manifest, Json results, Json diagnostics) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["manifest"] = manifest.to_json();
  doc["results"] = std::move(results);
  doc["diagnostics"] = std::move(diagnostics);
  return doc;
}

/// The document text as written to disk.
inline std::string render_document(const Json& doc) { return doc.dump(2) + "\n"; }

/// The document with its wall-clock duration removed, for replay comparison.
inline std::string comparable_document(Json doc) {
  if (doc.contains("manifest") && doc["manifest"].is_object()) doc["manifest"].erase("duration_seconds");
  return doc.dump(2);
}

/// A CSV table with a header row; numbers in shortest round-trip form.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<double>& values) {
    require(values.size() == header_.size(), "CSV row width does not match the header");
    std::vector<std::string> cells;
    for (double v : values) cells.push_back(format(v));
    rows_.push_back(std::move(cells));
  }

  void add_cells(std::vector<std::string> cells) {
    require(cells.size() == header_.size(), "CSV row width does not match the header");
    rows_.push_back(std::move(cells));
  }

  std::size_t rows() const noexcept { return rows_.size(); }

  std::string str() const {
    std::string out = join(header_);
    for (const auto& r : rows_) out += join(r);
    return out;
  }

  static std::string format(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    // Json's double printer is shortest round-trip and locale independent.
    return Json(v).dump();
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
    return s + "\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open '" + path + "' for writing");
  out << text;
  out.close();
  require(static_cast<bool>(out), "failed writing '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace bishop
