#include "stickybm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "stickybm/errors.hpp"

namespace stickybm {
namespace {

using nlohmann::json;

/// Collects every problem with its document path instead of stopping at the
/// first one.
class Reader {
 public:
  std::vector<std::string> issues;

  void fail(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

  void only_keys(const json& obj, const std::string& path, std::set<std::string> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) fail(join(path, it.key()), "unknown key");
    }
  }

  const json* object(const json& parent, const std::string& path, const std::string& key,
                     bool required) {
    const std::string p = join(path, key);
    if (!parent.contains(key)) {
      if (required) fail(p, "missing section");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      fail(p, "expected an object");
      return nullptr;
    }
    return &v;
  }

  std::optional<double> number(const json& parent, const std::string& path, const std::string& key,
                               bool required) {
    const std::string p = join(path, key);
    if (!parent.contains(key)) {
      if (required) fail(p, "missing value");
      return std::nullopt;
    }
    return as_number(parent.at(key), p);
  }

  std::optional<double> as_number(const json& v, const std::string& p) {
    if (!v.is_number()) {
      fail(p, "expected a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      fail(p, "expected a finite number");
      return std::nullopt;
    }
    return x;
  }

  std::optional<long long> integer(const json& parent, const std::string& path,
                                   const std::string& key, bool required) {
    const std::string p = join(path, key);
    if (!parent.contains(key)) {
      if (required) fail(p, "missing value");
      return std::nullopt;
    }
    const json& v = parent.at(key);
    if (!v.is_number_integer()) {
      fail(p, "expected an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<bool> boolean(const json& parent, const std::string& path, const std::string& key) {
    if (!parent.contains(key)) return std::nullopt;
    const json& v = parent.at(key);
    if (!v.is_boolean()) {
      fail(join(path, key), "expected true or false");
      return std::nullopt;
    }
    return v.get<bool>();
  }

  std::optional<std::string> string(const json& parent, const std::string& path,
                                    const std::string& key) {
    if (!parent.contains(key)) return std::nullopt;
    const json& v = parent.at(key);
    if (!v.is_string()) {
      fail(join(path, key), "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<Vector> vector(const json& v, const std::string& p) {
    if (!v.is_array()) {
      fail(p, "expected an array of numbers");
      return std::nullopt;
    }
    Vector out(static_cast<Eigen::Index>(v.size()));
    bool ok = true;
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto x = as_number(v[k], p + "[" + std::to_string(k) + "]");
      if (x) {
        out(static_cast<Eigen::Index>(k)) = *x;
      } else {
        ok = false;
      }
    }
    return ok ? std::optional<Vector>(out) : std::nullopt;
  }

  std::optional<Matrix> matrix(const json& v, const std::string& p) {
    if (!v.is_array() || v.empty()) {
      fail(p, "expected a non-empty array of rows");
      return std::nullopt;
    }
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    std::vector<Vector> parsed;
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = vector(v[r], p + "[" + std::to_string(r) + "]");
      if (!row) return std::nullopt;
      if (r == 0) cols = static_cast<std::size_t>(row->size());
      if (static_cast<std::size_t>(row->size()) != cols) {
        fail(p, "rows have different lengths");
        return std::nullopt;
      }
      parsed.push_back(*row);
    }
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) m.row(r) = parsed[r].transpose();
    return m;
  }

  std::vector<Vector> vector_list(const json& v, const std::string& p, int d) {
    std::vector<Vector> out;
    if (!v.is_array()) {
      fail(p, "expected an array of vectors");
      return out;
    }
    for (std::size_t k = 0; k < v.size(); ++k) {
      const std::string pk = p + "[" + std::to_string(k) + "]";
      auto x = vector(v[k], pk);
      if (!x) continue;
      if (x->size() != d) {
        fail(pk, "expected " + std::to_string(d) + " entries");
        continue;
      }
      out.push_back(*x);
    }
    return out;
  }

  std::vector<double> number_list(const json& v, const std::string& p) {
    auto x = vector(v, p);
    if (!x) return {};
    return std::vector<double>(x->data(), x->data() + x->size());
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
};

void parse_model(Reader& rd, const json& m, RunConfig& cfg) {
  rd.only_keys(m, "model", {"d", "sigma", "mu", "R", "u"});
  auto d = rd.integer(m, "model", "d", true);
  if (d && *d < 1) rd.fail("model.d", "must be a positive integer");
  const int dim = d && *d >= 1 ? static_cast<int>(*d) : 0;
  cfg.model.d = dim;
  if (m.contains("sigma")) {
    if (auto s = rd.matrix(m.at("sigma"), "model.sigma")) {
      cfg.model.sigma = *s;
      if (s->rows() != dim || s->cols() != dim) {
        rd.fail("model.sigma", "expected a " + std::to_string(dim) + " x " + std::to_string(dim) +
                                   " matrix");
      } else if ((*s - s->transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + s->cwiseAbs().maxCoeff())) {
        rd.fail("model.sigma", "not symmetric");
      } else {
        Eigen::LLT<Matrix> llt(*s);
        if (llt.info() != Eigen::Success) rd.fail("model.sigma", "not positive definite");
      }
    }
  } else {
    rd.fail("model.sigma", "missing value");
  }
  if (m.contains("mu")) {
    if (auto v = rd.vector(m.at("mu"), "model.mu")) {
      cfg.model.mu = *v;
      if (v->size() != dim) rd.fail("model.mu", "expected " + std::to_string(dim) + " entries");
    }
  } else {
    rd.fail("model.mu", "missing value");
  }
  if (m.contains("R")) {
    if (auto r = rd.matrix(m.at("R"), "model.R")) {
      cfg.model.refl = *r;
      if (r->rows() != dim || r->cols() != dim) {
        rd.fail("model.R", "expected a " + std::to_string(dim) + " x " + std::to_string(dim) +
                               " matrix");
      }
    }
  } else {
    rd.fail("model.R", "missing value");
  }
  if (m.contains("u")) {
    if (auto v = rd.vector(m.at("u"), "model.u")) {
      cfg.model.stickiness = *v;
      if (v->size() != dim) {
        rd.fail("model.u", "expected " + std::to_string(dim) + " entries");
      } else if ((v->array() < 0.0).any()) {
        rd.fail("model.u", "entries must be >= 0");
      }
    }
  } else {
    cfg.model.stickiness = Vector::Zero(dim);
  }
}

void parse_sim(Reader& rd, const json& s, RunConfig& cfg) {
  rd.only_keys(s, "sim", {"dt", "horizon", "burn_in", "seed", "replicas", "z0", "sticky_dt"});
  if (auto v = rd.number(s, "sim", "dt", false)) cfg.sim.dt = *v;
  if (auto v = rd.number(s, "sim", "horizon", false)) cfg.sim.horizon = *v;
  if (auto v = rd.number(s, "sim", "burn_in", false)) {
    if (*v < 0.0) {
      rd.fail("sim.burn_in", "must be >= 0");
    } else {
      cfg.sim.burn_in = *v;
    }
  }
  if (auto v = rd.integer(s, "sim", "seed", false)) {
    if (*v < 0) {
      rd.fail("sim.seed", "must be >= 0");
    } else {
      cfg.sim.seed = static_cast<std::uint64_t>(*v);
    }
  }
  if (auto v = rd.integer(s, "sim", "replicas", false)) {
    if (*v < 1 || *v > 1'000'000) {
      rd.fail("sim.replicas", "must be a positive integer");
    } else {
      cfg.sim.replicas = static_cast<int>(*v);
    }
  }
  if (s.contains("z0")) {
    if (auto v = rd.vector(s.at("z0"), "sim.z0")) cfg.sim.z0 = *v;
  }
  if (auto v = rd.number(s, "sim", "sticky_dt", false)) cfg.sim.sticky_dt = *v;
}

void parse_analyses(Reader& rd, const json& a, RunConfig& cfg) {
  rd.only_keys(a, "analyses", {"bar", "tails", "ldp", "stationary"});
  const int d = cfg.model.d;
  if (const json* b = rd.object(a, "analyses", "bar", false)) {
    rd.only_keys(*b, "analyses.bar", {"theta_grid", "tolerance", "closed_form"});
    BarAnalysis bar;
    if (b->contains("theta_grid")) {
      bar.theta_grid = rd.vector_list(b->at("theta_grid"), "analyses.bar.theta_grid", d);
      for (std::size_t k = 0; k < bar.theta_grid.size(); ++k) {
        if ((bar.theta_grid[k].array() > 0.0).any()) {
          rd.fail("analyses.bar.theta_grid[" + std::to_string(k) + "]",
                  "entries must be <= 0");
        }
      }
    }
    if (auto v = rd.number(*b, "analyses.bar", "tolerance", false)) bar.tolerance = *v;
    if (auto v = rd.boolean(*b, "analyses.bar", "closed_form")) bar.closed_form = *v;
    cfg.bar = bar;
  }
  if (const json* t = rd.object(a, "analyses", "tails", false)) {
    rd.only_keys(*t, "analyses.tails",
                 {"window", "pairs", "quantile_levels", "block_size", "ratio_band", "lambda_max"});
    TailsAnalysis tails;
    if (t->contains("window")) {
      auto w = rd.number_list(t->at("window"), "analyses.tails.window");
      if (w.size() != 2 || !(w[0] > 0.0 && w[0] < w[1] && w[1] < 1.0)) {
        rd.fail("analyses.tails.window", "expected [lo, hi] with 0 < lo < hi < 1");
      } else {
        tails.window = {w[0], w[1]};
      }
    }
    if (t->contains("pairs")) {
      const json& p = t->at("pairs");
      if (!p.is_array()) {
        rd.fail("analyses.tails.pairs", "expected an array of [i, j] pairs");
      } else {
        for (std::size_t k = 0; k < p.size(); ++k) {
          const std::string pk = "analyses.tails.pairs[" + std::to_string(k) + "]";
          const json& e = p[k];
          if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
              !e[1].is_number_integer()) {
            rd.fail(pk, "expected [i, j] with integer coordinates");
            continue;
          }
          const int i = e[0].get<int>(), j = e[1].get<int>();
          if (i < 0 || j < 0 || i >= d || j >= d || i == j) {
            rd.fail(pk, "coordinates must be distinct and in [0, d)");
            continue;
          }
          tails.pairs.emplace_back(i, j);
        }
      }
    }
    if (t->contains("quantile_levels")) {
      tails.quantile_levels = rd.number_list(t->at("quantile_levels"), "analyses.tails.quantile_levels");
      for (double q : tails.quantile_levels) {
        if (!(q > 0.0 && q < 1.0)) rd.fail("analyses.tails.quantile_levels", "levels must lie in (0, 1)");
      }
    }
    if (auto v = rd.integer(*t, "analyses.tails", "block_size", false)) {
      if (*v < 1) {
        rd.fail("analyses.tails.block_size", "must be positive");
      } else {
        tails.block_size = static_cast<std::size_t>(*v);
      }
    }
    if (t->contains("ratio_band")) {
      auto w = rd.number_list(t->at("ratio_band"), "analyses.tails.ratio_band");
      if (w.size() != 2 || !(w[0] < w[1])) {
        rd.fail("analyses.tails.ratio_band", "expected [lo, hi] with lo < hi");
      } else {
        tails.ratio_band = std::make_pair(w[0], w[1]);
      }
    }
    if (auto v = rd.number(*t, "analyses.tails", "lambda_max", false)) tails.lambda_max = *v;
    cfg.tails = tails;
  }
  if (const json* l = rd.object(a, "analyses", "ldp", false)) {
    rd.only_keys(*l, "analyses.ldp", {"targets", "segments", "restarts"});
    LdpAnalysis ldp;
    if (l->contains("targets")) {
      ldp.targets = rd.vector_list(l->at("targets"), "analyses.ldp.targets", d);
      for (std::size_t k = 0; k < ldp.targets.size(); ++k) {
        if ((ldp.targets[k].array() < 0.0).any()) {
          rd.fail("analyses.ldp.targets[" + std::to_string(k) + "]", "entries must be >= 0");
        }
      }
    }
    if (auto v = rd.integer(*l, "analyses.ldp", "segments", false)) {
      if (*v < 2 || *v > 4096) {
        rd.fail("analyses.ldp.segments", "must lie in [2, 4096]");
      } else {
        ldp.segments = static_cast<int>(*v);
      }
    }
    if (auto v = rd.integer(*l, "analyses.ldp", "restarts", false)) {
      if (*v < 1 || *v > 1024) {
        rd.fail("analyses.ldp.restarts", "must lie in [1, 1024]");
      } else {
        ldp.restarts = static_cast<int>(*v);
      }
    }
    cfg.ldp = ldp;
  }
  if (const json* s = rd.object(a, "analyses", "stationary", false)) {
    rd.only_keys(*s, "analyses.stationary", {"z_grid", "mass_tolerance", "atom_epsilon"});
    StationaryAnalysis st;
    if (s->contains("z_grid")) {
      st.z_grid = rd.number_list(s->at("z_grid"), "analyses.stationary.z_grid");
      for (double z : st.z_grid) {
        if (z < 0.0) rd.fail("analyses.stationary.z_grid", "entries must be >= 0");
      }
    }
    if (auto v = rd.number(*s, "analyses.stationary", "mass_tolerance", false)) st.mass_tolerance = *v;
    if (auto v = rd.number(*s, "analyses.stationary", "atom_epsilon", false)) {
      if (!(*v > 0.0)) {
        rd.fail("analyses.stationary.atom_epsilon", "must be > 0");
      } else {
        st.atom_epsilon = *v;
      }
    }
    cfg.stationary = st;
  }
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const Matrix& m) {
  json a = json::array();
  for (int r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::vector<std::string>{std::string("document: ") + e.what()});
  }
  Reader rd;
  RunConfig cfg;
  if (!doc.is_object()) throw ConfigError(std::vector<std::string>{"document: expected an object"});
  rd.only_keys(doc, "", {"model", "sim", "analyses", "output_dir", "format"});
  if (const json* m = rd.object(doc, "", "model", true)) parse_model(rd, *m, cfg);
  if (const json* s = rd.object(doc, "", "sim", false)) parse_sim(rd, *s, cfg);
  if (const json* a = rd.object(doc, "", "analyses", false)) parse_analyses(rd, *a, cfg);
  if (auto v = rd.string(doc, "", "output_dir")) cfg.output_dir = *v;
  if (auto v = rd.string(doc, "", "format")) {
    if (*v == "csv") {
      cfg.format = OutputFormat::kCsv;
    } else if (*v == "json") {
      cfg.format = OutputFormat::kJson;
    } else {
      rd.fail("format", "expected \"csv\" or \"json\"");
    }
  }
  if (rd.issues.empty()) {
    try {
      cfg.sim.validate(cfg.model.d);
    } catch (const ConfigError& e) {
      for (const auto& s : e.issues()) rd.issues.push_back(s);
      if (e.issues().empty()) rd.issues.push_back(e.what());
    }
  }
  if (!rd.issues.empty()) throw ConfigError(std::move(rd.issues));
  cfg.document = config_to_json(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::vector<std::string>{"config: cannot read " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["model"] = {{"d", cfg.model.d},
                {"sigma", mat_json(cfg.model.sigma)},
                {"mu", vec_json(cfg.model.mu)},
                {"R", mat_json(cfg.model.refl)},
                {"u", vec_json(cfg.model.stickiness)}};
  j["sim"] = {{"dt", cfg.sim.dt},
              {"horizon", cfg.sim.horizon},
              {"burn_in", cfg.sim.effective_burn_in()},
              {"seed", cfg.sim.seed},
              {"replicas", cfg.sim.replicas},
              {"z0", vec_json(cfg.sim.initial_state(cfg.model.d))},
              {"sticky_dt", cfg.sim.sticky_dt}};
  json a = json::object();
  if (cfg.bar) {
    json g = json::array();
    for (const auto& t : cfg.bar->theta_grid) g.push_back(vec_json(t));
    a["bar"] = {{"theta_grid", g}, {"tolerance", cfg.bar->tolerance},
                {"closed_form", cfg.bar->closed_form}};
  }
  if (cfg.tails) {
    json t;
    t["window"] = {cfg.tails->window.lo, cfg.tails->window.hi};
    json p = json::array();
    for (const auto& [i, k] : cfg.tails->pairs) p.push_back({i, k});
    t["pairs"] = p;
    t["quantile_levels"] = cfg.tails->quantile_levels;
    if (cfg.tails->block_size > 0) t["block_size"] = cfg.tails->block_size;
    if (cfg.tails->ratio_band) t["ratio_band"] = {cfg.tails->ratio_band->first, cfg.tails->ratio_band->second};
    if (cfg.tails->lambda_max) t["lambda_max"] = *cfg.tails->lambda_max;
    a["tails"] = t;
  }
  if (cfg.ldp) {
    json g = json::array();
    for (const auto& t : cfg.ldp->targets) g.push_back(vec_json(t));
    a["ldp"] = {{"targets", g}, {"segments", cfg.ldp->segments}, {"restarts", cfg.ldp->restarts}};
  }
  if (cfg.stationary) {
    a["stationary"] = {{"z_grid", cfg.stationary->z_grid},
                       {"mass_tolerance", cfg.stationary->mass_tolerance},
                       {"atom_epsilon", cfg.stationary->atom_epsilon}};
  }
  j["analyses"] = a;
  j["output_dir"] = cfg.output_dir;
  j["format"] = format_name(cfg.format);
  return j;
}

std::string format_name(OutputFormat f) { return f == OutputFormat::kCsv ? "csv" : "json"; }

}  // namespace stickybm
