#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stickybm/config.hpp"
#include "stickybm/pipeline.hpp"
#include "stickybm/report.hpp"
#include "stickybm/stationary.hpp"

namespace stickybm {

const std::vector<std::string>& command_names();

/// Runs commands against one configuration. The simulation is shared: it is
/// run on first use and reused by later commands.
class Session {
 public:
  Session(RunConfig cfg, std::string config_path, std::ostream& log);

  const RunConfig& config() const { return cfg_; }

  /// Runs `name` and returns its report fragment. Errors are rethrown as
  /// CommandError prefixed with the command and config path.
  ReportBundle run(const std::string& name);

  const std::vector<ReplicaOutput>& replicas();
  const EmpiricalDist& dist();

 private:
  ReportBundle check();
  ReportBundle simulate();
  ReportBundle stationary();
  ReportBundle bar();
  ReportBundle tails();
  ReportBundle ldp();
  ReportBundle report();

  std::vector<BoundaryMeasures> boundary_per_replica();
  std::string table_name(const std::string& stem) const;

  RunConfig cfg_;
  std::string config_path_;
  std::ostream& log_;
  std::optional<std::vector<ReplicaOutput>> replicas_;
  std::optional<EmpiricalDist> dist_;
  std::vector<double> path_rows_;  // replica 0 sticky samples: s, T, z...
};

}  // namespace stickybm
