#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stickybm/ldp.hpp"
#include "stickybm/model.hpp"
#include "stickybm/reflect.hpp"
#include "stickybm/tails.hpp"

namespace stickybm {

enum class OutputFormat { kCsv, kJson };

struct BarAnalysis {
  std::vector<Vector> theta_grid;
  double tolerance = 0.05;   // on the worst relative residual
  bool closed_form = false;  // exact product-form MGFs instead of simulation
};

struct TailsAnalysis {
  QuantileWindow window;
  std::vector<std::pair<int, int>> pairs;  // zero-based coordinates
  std::vector<double> quantile_levels{0.9, 0.95, 0.99};
  std::size_t block_size = 0;  // 0: largest size leaving at least 100 blocks
  std::optional<std::pair<double, double>> ratio_band;
  std::optional<double> lambda_max;
};

struct LdpAnalysis {
  std::vector<Vector> targets;
  int segments = 32;
  int restarts = 8;
};

struct StationaryAnalysis {
  std::vector<double> z_grid;  // survival thresholds and decomposition boxes
  double mass_tolerance = 0.06;
  double atom_epsilon = 1e-9;
};

struct RunConfig {
  ModelSpec model;
  SimConfig sim;
  std::optional<BarAnalysis> bar;
  std::optional<TailsAnalysis> tails;
  std::optional<LdpAnalysis> ldp;
  std::optional<StationaryAnalysis> stationary;
  std::string output_dir = "out";
  OutputFormat format = OutputFormat::kCsv;
  nlohmann::json document;  // normalized echo for the manifest
};

/// Strict parse: unknown keys, wrong types and inconsistent dimensions are
/// all collected and thrown together as a ConfigError whose issues start
/// with the offending path (e.g. "model.sigma: ...").
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical JSON form of a configuration (after CLI overrides).
nlohmann::json config_to_json(const RunConfig& cfg);

std::string format_name(OutputFormat f);

}  // namespace stickybm
