#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <stickybm/commands.hpp>
#include <stickybm/config.hpp>
#include <stickybm/errors.hpp>
#include <stickybm/report.hpp>

using namespace stickybm;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "model": {"d": 1, "sigma": [[1]], "mu": [-1], "R": [[1]], "u": [1]}
})";

const char* kSmallM2 = R"({
  "model": {"d": 2, "sigma": [[1, 0], [0, 1]], "mu": [-1, -1], "R": [[1, 0], [0, 1]], "u": [1, 1]},
  "sim": {"dt": 0.001, "horizon": 300, "seed": 5, "replicas": 2},
  "analyses": {
    "bar": {"theta_grid": [[-0.5, -0.5], [-1, -1]], "tolerance": 0.2},
    "tails": {"window": [0.9, 0.99], "pairs": [[0, 1]], "quantile_levels": [0.9]},
    "ldp": {"targets": [[1, 1]], "restarts": 2},
    "stationary": {"z_grid": [0.5, 1], "mass_tolerance": 0.3}
  }
})";

std::vector<std::string> issues_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.issues().empty() ? std::vector<std::string>{e.what()} : e.issues();
  }
  return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& path) {
  for (const auto& i : issues) {
    if (i.rfind(path, 0) == 0) return true;
  }
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string without_wall_clock(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.find("\"wall_clock_seconds\"") == std::string::npos) out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("minimal configuration") {
  const auto cfg = parse_config(kMinimal);
  CHECK(cfg.model.d == 1);
  CHECK(cfg.model.mu(0) == -1.0);
  CHECK(cfg.sim.replicas == 1);
  CHECK(cfg.format == OutputFormat::kCsv);
  CHECK_FALSE(cfg.bar.has_value());
}

TEST_CASE("configuration errors name the offending path") {
  CHECK(mentions(issues_of(R"({"model": {"d": 2, "sigma": [[1, 0.5], [0.2, 1]],
      "mu": [-1, -1], "R": [[1, 0], [0, 1]], "u": [1, 1]}})"),
                 "model.sigma"));
  CHECK(mentions(issues_of(R"({"model": {"d": 1, "sigma": [[1]], "mu": [-1], "R": [[1]],
      "u": [1]}, "sim": {"replicas": 0}})"),
                 "sim.replicas"));
  CHECK(mentions(issues_of(R"({"model": {"d": 1, "sigma": [[1]], "mu": [-1], "R": [[1]],
      "u": [1], "drift": 3}})"),
                 "model.drift"));
  CHECK(mentions(issues_of(R"({"model": {"d": 2, "sigma": [[1]], "mu": [-1], "R": [[1]],
      "u": [1]}})"),
                 "model.sigma"));
  CHECK(mentions(issues_of(R"({"model": {"d": 1, "sigma": [[1]], "mu": [-1], "R": [[1]],
      "u": [1]}, "analyses": {"tails": {"window": [0.99, 0.9]}}})"),
                 "analyses.tails.window"));
  CHECK(mentions(issues_of(R"({"model": {"d": 1, "sigma": [[1]], "mu": [-1], "R": [[1]],
      "u": [1]}, "format": "xml"})"),
                 "format"));
  CHECK_FALSE(issues_of("{not json").empty());
}

TEST_CASE("config round trip") {
  const auto a = parse_config(kSmallM2);
  const auto b = parse_config(config_to_json(a).dump());
  CHECK(config_to_json(a) == config_to_json(b));
  CHECK(b.ldp->targets.size() == 1);
  CHECK(b.tails->pairs[0] == std::pair<int, int>{0, 1});
}

TEST_CASE("empty bundle writes only the manifest") {
  const fs::path dir = fs::temp_directory_path() / "stickybm_empty_bundle";
  fs::remove_all(dir);
  ReportBundle bundle;
  write_report(bundle, dir.string());
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  CHECK(fs::exists(dir / "manifest.json"));
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m["all_passed"] == true);
  CHECK(m["files"].empty());
  fs::remove_all(dir);
}

TEST_CASE("checks and exit codes") {
  CHECK(make_check("x", 0.5, 0.0, 1.0).passed);
  CHECK_FALSE(make_check("x", 1.5, 0.0, 1.0).passed);
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(PreconditionError("x")) == 2);
  CHECK(exit_code_for(NumericalError("x")) == 3);
  CHECK(exit_code_for(CommandError("x", 2)) == 2);
}

TEST_CASE("commands wrap errors with the command and config path") {
  // closed-form MGFs need a skew-symmetric model
  auto cfg = parse_config(R"({
    "model": {"d": 2, "sigma": [[1, 0.5], [0.5, 1]], "mu": [-1, -2], "R": [[1, 0], [-0.3, 1]],
              "u": [1, 1]},
    "analyses": {"bar": {"theta_grid": [[-1, -1]], "closed_form": true}}
  })");
  std::ostringstream log;
  Session session(cfg, "cfg.json", log);
  try {
    session.run("bar");
    FAIL("expected CommandError");
  } catch (const CommandError& e) {
    CHECK(std::string(e.what()).rfind("bar (cfg.json): ", 0) == 0);
    CHECK(e.exit_code() == 2);
  }
  CHECK_THROWS_AS(session.run("plot"), CommandError);
}

TEST_CASE("full report: file inventory and byte-identical reruns") {
  const fs::path root = fs::temp_directory_path() / "stickybm_rerun";
  fs::remove_all(root);
  for (const char* sub : {"a", "b"}) {
    auto cfg = parse_config(kSmallM2);
    cfg.document = config_to_json(cfg);
    std::ostringstream log;
    Session session(cfg, "m2.json", log);
    const auto bundle = session.run("report");
    write_report(bundle, (root / sub).string());
  }
  for (const char* f : {"manifest.json", "stationary.csv", "bar.json", "tails_fit_0.csv",
                        "tails_lambda_0_1.csv", "tails_ratio.csv", "ldp.json", "check.json",
                        "simulate.json", "path.csv"}) {
    INFO(f);
    CHECK(fs::exists(root / "a" / f));
  }
  for (const auto& e : fs::directory_iterator(root / "a")) {
    const auto name = e.path().filename();
    INFO(name.string());
    const auto a = slurp(root / "a" / name);
    const auto b = slurp(root / "b" / name);
    if (name == "manifest.json") {
      CHECK(without_wall_clock(a) == without_wall_clock(b));
    } else {
      CHECK(a == b);
    }
  }
  fs::remove_all(root);
}
