#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stickybm/model.hpp"
#include "stickybm/reflect.hpp"
#include "stickybm/sticky.hpp"

namespace stickybm {

/// What one replica leaves behind once its path is discarded.
struct ReplicaOutput {
  int replica = 0;
  int d = 0;
  double burn_in = 0.0;
  double sticky_horizon = 0.0;
  double physical_horizon = 0.0;
  std::vector<double> samples;        // sticky-grid states with s >= burn_in, in time order
  std::vector<std::int8_t> segment;   // kDriftSegment or 1 + face
  BoundaryMeasures boundary;          // window [burn_in, sticky_horizon)
  StepAudit audit;
  std::int64_t fallback_solves = 0;

  std::size_t sample_count() const { return d == 0 ? 0 : samples.size() / d; }
};

struct RunOptions {
  bool keep_samples = true;
  /// Called after every step of replica 0 (path dumps); unset by default.
  std::function<void(const SrbmStepper&)> on_step;
  /// Called for every sticky sample of replica 0, including the burn-in.
  std::function<void(const StickyPoint&)> on_sticky_sample;
  int threads = 0;  // 0 = hardware concurrency, capped by the replica count
};

/// Simulates one replica and streams it through the sticky clock without
/// storing the SRBM path. Deterministic in (cfg.seed, replica).
ReplicaOutput run_replica(const ModelSpec& spec, const SimConfig& cfg, int replica,
                          const RunOptions& options = {});

/// All cfg.replicas replicas, returned in replica-index order.
std::vector<ReplicaOutput> run_replicas(const ModelSpec& spec, const SimConfig& cfg,
                                        const RunOptions& options = {});

}  // namespace stickybm
