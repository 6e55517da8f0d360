#include <CLI11.hpp>

#include <iostream>

#include "stickybm/commands.hpp"
#include "stickybm/errors.hpp"

int main(int argc, char** argv) {
  using namespace stickybm;
  CLI::App app{"Sticky Brownian motion in the orthant: simulation and stationary analysis"};
  app.set_version_flag("--version", kVersion);
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
  app.add_option("command", command, "check | simulate | stationary | bar | tails | ldp | report")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "override sim.seed");
  app.add_option("--replicas", replicas, "override sim.replicas")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "override output_dir");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (seed) cfg.sim.seed = *seed;
    if (replicas) cfg.sim.replicas = *replicas;
    if (out_dir) cfg.output_dir = *out_dir;
    if (format) cfg.format = *format == "csv" ? OutputFormat::kCsv : OutputFormat::kJson;
    cfg.sim.validate(cfg.model.d);
    cfg.document = config_to_json(cfg);

    Session session(std::move(cfg), config_path, std::cout);
    ReportBundle bundle = session.run(command);
    write_report(bundle, session.config().output_dir);
    for (const auto& c : bundle.checks) {
      std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << " = " << c.value << "\n";
    }
    std::cout << "wrote " << bundle.artifacts.size() + 1 << " file(s) to "
              << session.config().output_dir << "\n";
    return bundle.all_passed() ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error:\n";
    if (e.issues().empty()) {
      std::cerr << "  " << e.what() << "\n";
    } else {
      for (const auto& issue : e.issues()) std::cerr << "  " << issue << "\n";
    }
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
