#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stickybm/ldp.hpp"
#include "stickybm/model.hpp"
#include "stickybm/reflect.hpp"
#include "stickybm/stationary.hpp"
#include "stickybm/tails.hpp"

namespace stickybm {

inline constexpr const char* kVersion = "0.1.0";

/// One declared tolerance and whether the run met it.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double lo = 0.0;  // pass iff lo <= value <= hi
  double hi = 0.0;
  bool passed = false;
};

CheckResult make_check(std::string name, double value, double lo, double hi);

struct Artifact {
  std::string file;  // relative to the output directory
  std::string content;
};

struct ReportBundle {
  nlohmann::json config;  // canonical config after overrides
  std::vector<std::string> commands;
  std::vector<Artifact> artifacts;
  std::vector<CheckResult> checks;
  nlohmann::json summary = nlohmann::json::object();  // per-command headline numbers
  double wall_clock_seconds = 0.0;

  bool all_passed() const;
  void merge(ReportBundle&& other);
};

/// Writes every artifact plus manifest.json into `dir` (created if needed).
/// Only the manifest's wall-clock field differs between identical runs.
/// Throws Error naming the path on I/O failure.
void write_report(const ReportBundle& bundle, const std::string& dir);

nlohmann::json manifest_json(const ReportBundle& bundle);

/// Pretty-printed JSON; numbers use the shortest exact round-trip form.
std::string dump_json(const nlohmann::json& j);

nlohmann::json to_json(const Vector& v);
nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const ValidationReport& r);
nlohmann::json to_json(const StepAudit& a);
nlohmann::json to_json(const BarReport& r);
nlohmann::json to_json(const MgfEstimate& m);
nlohmann::json to_json(const MassIdentityReport& r);
nlohmann::json to_json(const DecompositionCheck& c);
nlohmann::json to_json(const TailFit& f);
nlohmann::json to_json(const GumbelReport& g);
nlohmann::json to_json(const CopulaDiag& c);
nlohmann::json to_json(const RateResult& r);

}  // namespace stickybm
