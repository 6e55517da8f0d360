#include "stickybm/report.hpp"

#include <Eigen/Core>
#include <filesystem>
#include <fstream>

#include "stickybm/errors.hpp"

namespace stickybm {

using nlohmann::json;

CheckResult make_check(std::string name, double value, double lo, double hi) {
  CheckResult c;
  c.name = std::move(name);
  c.value = value;
  c.lo = lo;
  c.hi = hi;
  c.passed = value >= lo && value <= hi;
  return c;
}

bool ReportBundle::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

void ReportBundle::merge(ReportBundle&& other) {
  for (auto& c : other.commands) commands.push_back(std::move(c));
  for (auto& a : other.artifacts) {
    bool replaced = false;
    for (auto& mine : artifacts) {
      if (mine.file == a.file) {
        mine = std::move(a);
        replaced = true;
        break;
      }
    }
    if (!replaced) artifacts.push_back(std::move(a));
  }
  for (auto& c : other.checks) checks.push_back(std::move(c));
  for (auto it = other.summary.begin(); it != other.summary.end(); ++it) summary[it.key()] = it.value();
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json manifest_json(const ReportBundle& bundle) {
  json m;
  m["tool"] = "stickybm";
  m["version"] = kVersion;
  m["versions"] = {{"compiler", __VERSION__},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  m["config"] = bundle.config;
  if (bundle.config.contains("sim")) {
    m["seed"] = bundle.config["sim"].value("seed", 0);
    m["replicas"] = bundle.config["sim"].value("replicas", 1);
  }
  m["commands"] = bundle.commands;
  json files = json::array();
  for (const auto& a : bundle.artifacts) files.push_back(a.file);
  m["files"] = files;
  json checks = json::array();
  for (const auto& c : bundle.checks) {
    checks.push_back({{"name", c.name}, {"value", c.value}, {"lo", c.lo}, {"hi", c.hi},
                      {"passed", c.passed}});
  }
  m["checks"] = checks;
  m["summary"] = bundle.summary;
  m["all_passed"] = bundle.all_passed();
  m["wall_clock_seconds"] = bundle.wall_clock_seconds;
  return m;
}

void write_report(const ReportBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
  auto write_file = [&](const std::string& name, const std::string& content) {
    const fs::path p = fs::path(dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open " + p.string() + " for writing");
    out << content;
    if (!out) throw Error("write failed for " + p.string());
  };
  for (const auto& a : bundle.artifacts) write_file(a.file, a.content);
  write_file("manifest.json", dump_json(manifest_json(bundle)));
}

json to_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (int r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

json to_json(const ValidationReport& r) {
  return {{"spd", r.spd_ok},           {"completely_s", r.completely_s_ok},
          {"m_matrix", r.m_matrix},    {"stable", r.stable},
          {"skew_symmetric", r.skew_symmetric}, {"usable", r.usable()},
          {"messages", r.messages}};
}

json to_json(const StepAudit& a) {
  return {{"steps", a.steps},
          {"violations", a.violations},
          {"min_state", a.min_state},
          {"min_push", a.min_push},
          {"max_complementarity", a.max_complementarity},
          {"max_face_gap", a.max_face_gap}};
}

json to_json(const BarReport& r) {
  json recs = json::array();
  for (const auto& rec : r.records) {
    recs.push_back({{"theta", to_json(rec.theta)},
                    {"lhs", rec.lhs},
                    {"rhs", rec.rhs},
                    {"abs_resid", rec.abs_resid},
                    {"rel_resid", rec.rel_resid}});
  }
  json worst = r.records.empty() ? json() : to_json(r.records[r.worst_index].theta);
  return {{"mode", r.mode == BarMode::kSticky ? "sticky" : "srbm"},
          {"records", recs},
          {"summary",
           {{"max_abs_resid", r.max_abs_resid},
            {"max_rel_resid", r.max_rel_resid},
            {"worst_theta", worst}}}};
}

json to_json(const MgfEstimate& m) {
  json pts = json::array();
  for (const auto& p : m.points) {
    json e = {{"theta", to_json(p.theta)}};
    if (m.has_phi) {
      e["phi"] = p.phi;
      e["phi_se"] = p.phi_se;
    }
    if (m.has_boundary) {
      e["phi0"] = p.phi0;
      e["phi0_se"] = p.phi0_se;
      e["phi_i"] = to_json(p.phi_face);
      e["phi_i_se"] = to_json(p.phi_face_se);
    }
    pts.push_back(e);
  }
  json out = {{"points", pts}};
  if (m.has_boundary) {
    out["v0_mass"] = m.v0_mass;
    out["v_masses"] = to_json(m.v_masses);
  }
  return out;
}

json to_json(const MassIdentityReport& r) {
  return {{"expected_v", to_json(r.expected_v)},
          {"expected_v0", r.expected_v0},
          {"simulated_v", to_json(r.simulated_v)},
          {"simulated_v0", r.simulated_v0},
          {"rel_error_v", to_json(r.rel_error_v)},
          {"rel_error_v0", r.rel_error_v0},
          {"clock_identity_residual", r.clock_identity_residual},
          {"expected_nonnegative", r.expected_nonnegative}};
}

json to_json(const DecompositionCheck& c) {
  return {{"box", to_json(c.box)},
          {"pi_mass", c.pi_mass},
          {"decomposed_mass", c.decomposed_mass},
          {"difference", c.difference},
          {"se", c.se},
          {"consistent", c.consistent}};
}

json to_json(const TailFit& f) {
  json j = {{"coordinate", f.coordinate},
            {"alpha_hat", f.alpha_hat},
            {"stderr", f.stderr_alpha},
            {"intercept", f.intercept},
            {"window", {f.window.lo, f.window.hi}},
            {"r_squared", f.r_squared},
            {"thresholds", f.thresholds.size()}};
  if (f.correction) {
    j["polynomial_exponent"] = {{"beta", f.correction->beta}, {"se", f.correction->beta_se}};
  }
  return j;
}

json to_json(const GumbelReport& g) {
  return {{"coordinate", g.coordinate}, {"block_size", g.block_size}, {"blocks", g.blocks},
          {"alpha", g.alpha},           {"a_n", g.a_n},               {"b_n", g.b_n},
          {"ks", g.ks},                 {"consistent", g.consistent}};
}

json to_json(const CopulaDiag& c) {
  json lam = json::array();
  for (const auto& p : c.lambda) {
    lam.push_back({{"t", p.t}, {"lambda_hat", p.lambda}, {"se", p.se}, {"upper_bound", p.upper_bound}});
  }
  json ratio = json::array();
  for (const auto& p : c.ratio) {
    ratio.push_back({{"z", to_json(p.z)},
                     {"levels", to_json(p.levels)},
                     {"ratio", p.ratio},
                     {"se", p.se},
                     {"jackknife_se", p.jackknife_se},
                     {"skipped", p.skipped}});
  }
  return {{"pair", {c.i, c.j}}, {"lambda", lam}, {"lambda_summary", c.lambda_summary},
          {"ratio", ratio}};
}

json to_json(const RateResult& r) {
  return {{"target", to_json(r.target)},
          {"value", r.value},
          {"label", "reflected-process rate"},
          {"straight_line_bound", r.bound},
          {"terminal_error", r.terminal_error},
          {"restarts_used", r.restarts_used},
          {"best_restart", r.best_restart},
          {"path",
           {{"tau", r.path.tau},
            {"segments", r.path.segments},
            {"velocity", to_json(r.path.velocity)},
            {"image", to_json(r.image)}}}};
}

}  // namespace stickybm
