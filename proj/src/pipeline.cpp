#include "stickybm/pipeline.hpp"

#include "stickybm/parallel.hpp"

namespace stickybm {
namespace {

struct ReplicaSink {
  ReplicaOutput* out;
  BoundaryAccumulator* boundary;
  const RunOptions* options;
  bool first_replica;

  void on_sample(const StickyPoint& p) {
    if (first_replica && options->on_sticky_sample) options->on_sticky_sample(p);
    boundary->on_sample(p);
    if (!options->keep_samples || p.s < out->burn_in) return;
    out->samples.insert(out->samples.end(), p.z.begin(), p.z.end());
    out->segment.push_back(static_cast<std::int8_t>(p.segment));
  }
  void on_segment(const StickySegment& seg) { boundary->on_segment(seg); }
};

}  // namespace

ReplicaOutput run_replica(const ModelSpec& spec, const SimConfig& cfg, int replica,
                          const RunOptions& options) {
  require_well_formed(spec);
  cfg.validate(spec.d);
  ReplicaOutput out;
  out.replica = replica;
  out.d = spec.d;
  out.burn_in = cfg.effective_burn_in();

  SrbmStepper stepper(spec, cfg, replica);
  StickySampler sampler(spec.d, spec.stickiness, cfg.sticky_dt);
  BoundaryAccumulator boundary(spec.d, spec.stickiness, BoundaryWindow{out.burn_in});
  ReplicaSink sink{&out, &boundary, &options, replica == 0};

  const std::int64_t n = cfg.steps();
  if (options.keep_samples) {
    const double expected = static_cast<double>(n) * cfg.dt / cfg.sticky_dt;
    out.samples.reserve(static_cast<std::size_t>(expected * spec.d * 1.2));
    out.segment.reserve(static_cast<std::size_t>(expected * 1.2));
  }
  const bool hook = replica == 0 && static_cast<bool>(options.on_step);
  sampler.feed(stepper.time(), stepper.state(), stepper.local_time(), sink);
  if (hook) options.on_step(stepper);
  for (std::int64_t k = 0; k < n; ++k) {
    stepper.advance();
    sampler.feed(stepper.time(), stepper.state(), stepper.local_time(), sink);
    if (hook) options.on_step(stepper);
  }
  out.sticky_horizon = sampler.clock();
  out.physical_horizon = stepper.time();
  out.boundary = std::move(boundary).finish(out.sticky_horizon);
  out.audit = stepper.audit();
  out.fallback_solves = stepper.fallback_count();
  return out;
}

std::vector<ReplicaOutput> run_replicas(const ModelSpec& spec, const SimConfig& cfg,
                                        const RunOptions& options) {
  cfg.validate(spec.d);
  std::vector<ReplicaOutput> outputs(cfg.replicas);
  parallel_for(cfg.replicas, options.threads,
               [&](int r) { outputs[r] = run_replica(spec, cfg, r, options); });
  return outputs;
}

}  // namespace stickybm
