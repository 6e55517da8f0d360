#include "stickybm/commands.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "stickybm/errors.hpp"
#include "stickybm/ldp.hpp"
#include "stickybm/tails.hpp"

namespace stickybm {
namespace {

using nlohmann::json;

constexpr double kClockIdentityTolerance = 1e-6;
constexpr std::size_t kMaxPathRows = 20000;

std::vector<Vector> default_theta_grid(int d) {
  const double levels[] = {-0.5, -1.0, -2.0};
  std::vector<Vector> grid;
  grid.push_back(Vector::Zero(d));
  if (d <= 3) {
    int total = 1;
    for (int i = 0; i < d; ++i) total *= 3;
    for (int c = 0; c < total; ++c) {
      Vector t(d);
      int rest = c;
      for (int i = 0; i < d; ++i) {
        t(i) = levels[rest % 3];
        rest /= 3;
      }
      grid.push_back(t);
    }
  } else {
    for (double l : levels) grid.push_back(Vector::Constant(d, l));
  }
  return grid;
}

std::string csv_number(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"check", "simulate", "stationary", "bar",
                                              "tails", "ldp",      "report"};
  return names;
}

Session::Session(RunConfig cfg, std::string config_path, std::ostream& log)
    : cfg_(std::move(cfg)), config_path_(std::move(config_path)), log_(log) {}

ReportBundle Session::run(const std::string& name) {
  const auto start = std::chrono::steady_clock::now();
  ReportBundle out;
  try {
    if (name == "check") {
      out = check();
    } else if (name == "simulate") {
      out = simulate();
    } else if (name == "stationary") {
      out = stationary();
    } else if (name == "bar") {
      out = bar();
    } else if (name == "tails") {
      out = tails();
    } else if (name == "ldp") {
      out = ldp();
    } else if (name == "report") {
      out = report();
    } else {
      throw ConfigError("unknown command \"" + name + "\"");
    }
  } catch (const CommandError&) {
    throw;
  } catch (const std::exception& e) {
    throw CommandError(name + " (" + config_path_ + "): " + e.what(), exit_code_for(e));
  }
  out.config = cfg_.document;
  if (std::find(out.commands.begin(), out.commands.end(), name) == out.commands.end()) {
    out.commands.push_back(name);
  }
  out.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

const std::vector<ReplicaOutput>& Session::replicas() {
  if (!replicas_) {
    const ValidationReport vr = validate_model(cfg_.model);
    if (!vr.usable()) {
      std::string msg = "model is not usable for simulation";
      for (const auto& m : vr.messages) msg += "; " + m;
      throw PreconditionError(msg);
    }
    RunOptions opts;
    const double expected = cfg_.sim.horizon / cfg_.sim.sticky_dt;
    const auto every = static_cast<std::int64_t>(
        std::max(1.0, std::ceil(expected / static_cast<double>(kMaxPathRows))));
    std::int64_t counter = 0;
    path_rows_.clear();
    opts.on_sticky_sample = [&](const StickyPoint& p) {
      if (counter++ % every != 0) return;
      path_rows_.push_back(p.s);
      path_rows_.push_back(p.t);
      path_rows_.insert(path_rows_.end(), p.z.begin(), p.z.end());
    };
    log_ << "simulating " << cfg_.sim.replicas << " replica(s) x " << cfg_.sim.steps()
         << " steps (dt=" << cfg_.sim.dt << ")\n";
    replicas_ = run_replicas(cfg_.model, cfg_.sim, opts);
  }
  return *replicas_;
}

const EmpiricalDist& Session::dist() {
  if (!dist_) {
    DistOptions opt;
    if (cfg_.stationary) opt.atom_epsilon = cfg_.stationary->atom_epsilon;
    dist_ = estimate_stationary(std::span<const ReplicaOutput>(replicas()), opt);
  }
  return *dist_;
}

std::vector<BoundaryMeasures> Session::boundary_per_replica() {
  std::vector<BoundaryMeasures> b;
  for (const auto& r : replicas()) b.push_back(r.boundary);
  return b;
}

std::string Session::table_name(const std::string& stem) const {
  return stem + (cfg_.format == OutputFormat::kCsv ? ".csv" : ".json");
}

ReportBundle Session::check() {
  ReportBundle out;
  const auto& m = cfg_.model;
  const ValidationReport vr = validate_model(m);
  json j = to_json(vr);
  log_ << "spd=" << std::boolalpha << vr.spd_ok << " completely_s=" << vr.completely_s_ok
       << " m_matrix=" << vr.m_matrix << " stable=" << vr.stable
       << " skew_symmetric=" << vr.skew_symmetric << "\n";
  if (vr.stable) {
    const auto lt = expected_local_times(m);
    j["expected_local_times"] = to_json(lt.expected);
    j["expected_v0"] = 1.0 - m.stickiness.dot(lt.expected);
    j["local_time_warnings"] = lt.warnings;
  }
  if (vr.usable() && vr.skew_symmetric) {
    const ProductForm pf = product_form_marginals(m);
    json marg = json::array();
    for (const auto& mf : pf.marginals) {
      marg.push_back({{"atom_mass", mf.atom_mass}, {"exp_rate", mf.exp_rate}, {"tail_mass", mf.tail_mass}});
    }
    j["product_form"] = {{"rates", to_json(pf.rates)},
                         {"local_time_masses", to_json(pf.local_time_masses)},
                         {"interior_mass", pf.interior_mass},
                         {"marginals", marg},
                         {"bar_residual", pf.bar_residual}};
  }
  out.artifacts.push_back({"check.json", dump_json(j)});
  out.checks.push_back(make_check("check.usable", vr.usable() ? 1.0 : 0.0, 1.0, 1.0));
  out.summary["check"] = {{"usable", vr.usable()}, {"skew_symmetric", vr.skew_symmetric}};
  return out;
}

ReportBundle Session::simulate() {
  ReportBundle out;
  const auto& reps = replicas();
  const int d = cfg_.model.d;
  StepAudit audit;
  double worst_identity = 0.0;
  std::int64_t fallbacks = 0;
  json per = json::array();
  for (const auto& r : reps) {
    audit.merge(r.audit);
    fallbacks += r.fallback_solves;
    const double identity =
        r.boundary.v0_mass + cfg_.model.stickiness.dot(r.boundary.v_masses) - 1.0;
    worst_identity = std::max(worst_identity, std::abs(identity));
    per.push_back({{"replica", r.replica},
                   {"sticky_horizon", r.sticky_horizon},
                   {"physical_horizon", r.physical_horizon},
                   {"samples", r.sample_count()},
                   {"v0_mass", r.boundary.v0_mass},
                   {"v_masses", to_json(r.boundary.v_masses)},
                   {"clock_identity_residual", identity},
                   {"fallback_solves", r.fallback_solves},
                   {"audit", to_json(r.audit)}});
  }
  json j = {{"replicas", per}, {"audit", to_json(audit)}, {"fallback_solves", fallbacks}};
  out.artifacts.push_back({"simulate.json", dump_json(j)});

  const std::size_t width = 2 + static_cast<std::size_t>(d);
  if (cfg_.format == OutputFormat::kCsv) {
    std::ostringstream s;
    s << "s,T";
    for (int i = 0; i < d; ++i) s << ",z" << (i + 1);
    s << "\n";
    for (std::size_t k = 0; k + width <= path_rows_.size(); k += width) {
      for (std::size_t c = 0; c < width; ++c) s << (c ? "," : "") << csv_number(path_rows_[k + c]);
      s << "\n";
    }
    out.artifacts.push_back({"path.csv", s.str()});
  } else {
    json rows = json::array();
    for (std::size_t k = 0; k + width <= path_rows_.size(); k += width) {
      rows.push_back(std::vector<double>(path_rows_.begin() + k, path_rows_.begin() + k + width));
    }
    out.artifacts.push_back({"path.json", dump_json({{"columns", "s, T, z"}, {"rows", rows}})});
  }
  out.checks.push_back(make_check("simulate.violations", static_cast<double>(audit.violations), 0, 0));
  out.checks.push_back(make_check("simulate.clock_identity", worst_identity, 0.0, kClockIdentityTolerance));
  out.summary["simulate"] = {{"steps", audit.steps}, {"violations", audit.violations},
                             {"worst_clock_identity", worst_identity}};
  log_ << "steps=" << audit.steps << " violations=" << audit.violations
       << " clock_identity=" << worst_identity << "\n";
  return out;
}

ReportBundle Session::stationary() {
  ReportBundle out;
  const StationaryAnalysis st = cfg_.stationary.value_or(StationaryAnalysis{});
  const auto& dist_ref = dist();
  const int d = cfg_.model.d;
  const auto boundary = boundary_per_replica();
  const BoundaryMeasures pooled = pool_boundary_masses(boundary);
  const MassIdentityReport mass = mass_identity_check(cfg_.model, pooled.v0_mass, pooled.v_masses);

  std::vector<std::vector<double>> thresholds(d);
  for (int i = 0; i < d; ++i) {
    thresholds[i] = st.z_grid.empty() ? dist_ref.survival_tables()[i].thresholds : st.z_grid;
  }
  json table = json::array();
  std::ostringstream csv;
  csv << "coordinate,threshold,survival\n";
  for (int i = 0; i < d; ++i) {
    for (double x : thresholds[i]) {
      const double s = dist_ref.survival_gt(i, x);
      csv << i << ',' << csv_number(x) << ',' << csv_number(s) << '\n';
      table.push_back({{"coordinate", i}, {"threshold", x}, {"survival", s}});
    }
  }
  if (cfg_.format == OutputFormat::kCsv) {
    out.artifacts.push_back({"stationary.csv", csv.str()});
  } else {
    out.artifacts.push_back({"stationary_survival.json", dump_json(table)});
  }

  json decomp = json::array();
  for (double z : st.z_grid) {
    if (!(z > 0.0)) continue;
    const auto dc = decomposition_check(dist_ref, boundary, cfg_.model.stickiness,
                                        Vector::Constant(d, z));
    decomp.push_back(to_json(dc));
  }
  json j = {{"samples", dist_ref.size()},
            {"atom_epsilon", dist_ref.atom_epsilon()},
            {"atoms", to_json(dist_ref.atom_estimates())},
            {"v0_mass", pooled.v0_mass},
            {"v_masses", to_json(pooled.v_masses)},
            {"mass_identity", to_json(mass)},
            {"decomposition", decomp}};
  out.artifacts.push_back({"stationary.json", dump_json(j)});

  if (mass.expected_nonnegative) {
    for (int i = 0; i < d; ++i) {
      out.checks.push_back(make_check("stationary.v_rel_error[" + std::to_string(i) + "]",
                                      mass.rel_error_v(i), 0.0, st.mass_tolerance));
    }
    out.checks.push_back(
        make_check("stationary.v0_rel_error", mass.rel_error_v0, 0.0, st.mass_tolerance));
  }
  out.summary["stationary"] = {{"atoms", to_json(dist_ref.atom_estimates())},
                               {"v0_mass", pooled.v0_mass},
                               {"v_masses", to_json(pooled.v_masses)}};
  log_ << "atoms=" << dist_ref.atom_estimates().transpose() << " v0=" << pooled.v0_mass
       << " v=" << pooled.v_masses.transpose() << "\n";
  return out;
}

ReportBundle Session::bar() {
  ReportBundle out;
  const BarAnalysis ba = cfg_.bar.value_or(BarAnalysis{});
  const auto grid = ba.theta_grid.empty() ? default_theta_grid(cfg_.model.d) : ba.theta_grid;
  json j;
  BarReport sticky;
  if (ba.closed_form) {
    const ProductForm pf = product_form_marginals(cfg_.model);
    const MgfEstimate mgf = closed_form_mgf(cfg_.model, pf, grid);
    sticky = bar_residual(cfg_.model, mgf, BarMode::kSticky);
    j["source"] = "closed_form";
    j["mgf"] = to_json(mgf);
    j["sticky"] = to_json(sticky);
    j["srbm"] = to_json(bar_residual(cfg_.model, mgf, BarMode::kSrbm));
  } else {
    const auto boundary = boundary_per_replica();
    const MgfEstimate mgf = empirical_mgf(dist(), boundary, grid);
    sticky = bar_residual(cfg_.model, mgf, BarMode::kSticky);
    j["source"] = "simulation";
    j["mgf"] = to_json(mgf);
    j["sticky"] = to_json(sticky);
    j["srbm"] = to_json(bar_residual(cfg_.model, mgf, BarMode::kSrbm));
  }
  out.artifacts.push_back({"bar.json", dump_json(j)});
  out.checks.push_back(make_check("bar.max_rel_resid", sticky.max_rel_resid, 0.0, ba.tolerance));
  out.summary["bar"] = {{"max_rel_resid", sticky.max_rel_resid},
                        {"max_abs_resid", sticky.max_abs_resid}};
  for (const auto& r : sticky.records) {
    log_ << "theta=" << r.theta.transpose() << " lhs=" << csv_number(r.lhs)
         << " rhs=" << csv_number(r.rhs) << " rel=" << r.rel_resid << "\n";
  }
  return out;
}

ReportBundle Session::tails() {
  ReportBundle out;
  TailsAnalysis ta = cfg_.tails.value_or(TailsAnalysis{});
  const auto& dist_ref = dist();
  const int d = cfg_.model.d;
  if (ta.pairs.empty()) {
    for (int i = 0; i < d; ++i) {
      for (int k = i + 1; k < d; ++k) ta.pairs.emplace_back(i, k);
    }
  }
  json j;
  json fits = json::array();
  json gumbel = json::array();
  for (int i = 0; i < d; ++i) {
    try {
      const TailFit fit = fit_decay_rate(dist_ref, i, ta.window, 40, true);
      fits.push_back(to_json(fit));
      std::ostringstream s;
      if (cfg_.format == OutputFormat::kCsv) {
        write_tail_fit_csv(fit, s);
      } else {
        s << dump_json({{"threshold", fit.thresholds}, {"survival", fit.survival}, {"fitted", fit.fitted}});
      }
      out.artifacts.push_back({table_name("tails_fit_" + std::to_string(i)), s.str()});
      log_ << "alpha_hat[" << i << "]=" << fit.alpha_hat << " (se " << fit.stderr_alpha << ")\n";
      std::size_t block = ta.block_size;
      if (block == 0) {
        block = std::max<std::size_t>(1, dist_ref.size() / (100 + 2 * dist_ref.replica_count()));
      }
      try {
        gumbel.push_back(to_json(gumbel_doa_check(dist_ref, i, block, &fit)));
      } catch (const DataStarvedError& e) {
        gumbel.push_back({{"coordinate", i}, {"error", e.what()}});
      }
    } catch (const DataStarvedError& e) {
      fits.push_back({{"coordinate", i}, {"error", e.what()}});
    }
  }
  j["fits"] = fits;
  j["gumbel"] = gumbel;

  json deps = json::array();
  for (const auto& [a, b] : ta.pairs) {
    const CopulaDiag diag = tail_dependence_at_levels(dist_ref, a, b, ta.quantile_levels);
    deps.push_back(to_json(diag));
    std::ostringstream s;
    if (cfg_.format == OutputFormat::kCsv) {
      write_lambda_csv(diag, s);
    } else {
      s << dump_json(to_json(diag)["lambda"]);
    }
    out.artifacts.push_back(
        {table_name("tails_lambda_" + std::to_string(a) + "_" + std::to_string(b)), s.str()});
    if (ta.lambda_max && !diag.lambda.empty()) {
      out.checks.push_back(make_check(
          "tails.lambda[" + std::to_string(a) + "," + std::to_string(b) + "]",
          diag.lambda.back().lambda, 0.0, *ta.lambda_max));
    }
  }
  j["tail_dependence"] = deps;

  if (d >= 2) {
    const CopulaDiag ratio = joint_factorization_at_levels(dist_ref, ta.quantile_levels);
    j["factorization"] = to_json(ratio);
    std::ostringstream s;
    if (cfg_.format == OutputFormat::kCsv) {
      write_ratio_csv(ratio, s);
    } else {
      s << dump_json(to_json(ratio)["ratio"]);
    }
    out.artifacts.push_back({table_name("tails_ratio"), s.str()});
    for (const auto& p : ratio.ratio) {
      log_ << "ratio at level " << (p.levels.size() ? p.levels(0) : 0.0) << " = " << p.ratio
           << " (se " << p.se << ", jackknife " << p.jackknife_se << ")\n";
      if (ta.ratio_band && !p.skipped) {
        out.checks.push_back(make_check("tails.ratio[" + csv_number(p.levels(0)) + "]", p.ratio,
                                        ta.ratio_band->first, ta.ratio_band->second));
      }
    }
  }
  out.artifacts.push_back({"tails.json", dump_json(j)});
  out.summary["tails"] = {{"fits", fits}};
  return out;
}

ReportBundle Session::ldp() {
  ReportBundle out;
  const LdpAnalysis la = cfg_.ldp.value_or(LdpAnalysis{});
  std::vector<Vector> targets = la.targets;
  if (targets.empty()) targets.push_back(Vector::Ones(cfg_.model.d));
  RateOptions opts;
  opts.segments = la.segments;
  opts.restarts = la.restarts;
  opts.seed = cfg_.sim.seed;
  json results = json::array();
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const RateResult r = rate_function(cfg_.model, targets[k], opts);
    results.push_back(to_json(r));
    log_ << "rate(" << targets[k].transpose() << ") = " << csv_number(r.value)
         << " (straight-line bound " << csv_number(r.bound) << ")\n";
    const std::string tag = "[" + std::to_string(k) + "]";
    out.checks.push_back(make_check("ldp.bound_gap" + tag, r.value - r.bound,
                                    std::numeric_limits<double>::lowest(), 1e-6));
    out.checks.push_back(make_check("ldp.terminal_error" + tag, r.terminal_error, 0.0,
                                    terminal_tolerance(targets[k])));
  }
  out.artifacts.push_back({"ldp.json", dump_json({{"segments", opts.segments},
                                                  {"restarts", opts.restarts},
                                                  {"results", results}})});
  out.summary["ldp"] = results.size();
  return out;
}

ReportBundle Session::report() {
  ReportBundle all;
  for (const char* name : {"check", "simulate", "stationary", "bar", "tails"}) {
    all.merge(run(name));
  }
  if (cfg_.ldp) all.merge(run("ldp"));
  return all;
}

}  // namespace stickybm
