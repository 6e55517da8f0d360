#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "stickybm/model.hpp"
#include "stickybm/rng.hpp"

namespace stickybm {

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;  // physical-clock duration
  std::uint64_t seed = 0;
  int replicas = 1;
  Vector z0;  // empty means the origin
  /// Discard window, measured in sticky time. Negative selects the default,
  /// 10% of the physical horizon (at most 10% of the sticky horizon since
  /// S(t) >= t).
  double burn_in = -1.0;
  double sticky_dt = 0.05;     // sampling step of the sticky clock
  bool noise_enabled = true;   // false drives the path with mu*dt only

  std::int64_t steps() const;
  double effective_burn_in() const;
  Vector initial_state(int d) const;
  /// Throws ConfigError naming the offending "sim.*" field.
  void validate(int d) const;
};

/// Per-step discrete Skorokhod problem on the orthant: find dL >= 0 with
/// w = z + dx + R dL >= 0 and <w, dL> = 0.
///
/// Projected Gauss-Seidel sweeps (convergent for M-matrices) with an
/// active-set enumeration fallback for d <= kMaxEnumerationDim. When R is
/// not an M-matrix the LCP may have several solutions; the first one found
/// is returned.
class SkorokhodSolver {
 public:
  static constexpr int kMaxSweeps = 10000;
  static constexpr int kMaxEnumerationDim = 8;

  explicit SkorokhodSolver(const Matrix& refl);

  void solve(std::span<const double> z, std::span<const double> dx,
             std::span<double> z_next, std::span<double> push);

  int dim() const { return d_; }
  std::int64_t fallback_count() const { return fallbacks_; }

 private:
  bool sweep_solve(std::span<double> push);
  bool enumerate_solve(std::span<double> push);

  int d_;
  std::vector<double> refl_;  // row-major
  std::vector<double> q_;
  std::int64_t fallbacks_ = 0;
};

struct StepResult {
  Vector z_next;
  Vector push;
};

StepResult skorokhod_step(const Vector& z, const Vector& dx, const Matrix& refl);

/// Running check of the step-level invariants (nonnegativity, complementarity,
/// push only on the face).
struct StepAudit {
  std::int64_t steps = 0;
  std::int64_t violations = 0;
  double min_state = 0.0;
  double min_push = 0.0;
  double max_complementarity = 0.0;  // <z_next, dL> / (1 + |dx|)
  double max_face_gap = 0.0;         // z_i where dL_i > 1e-12

  void record(std::span<const double> z_next, std::span<const double> push,
              std::span<const double> dx);
  void merge(const StepAudit& other);
};

/// Gaussian increments mu*dt + chol(Sigma*dt) xi.
class NoiseSource {
 public:
  NoiseSource(const ModelSpec& spec, double dt, Engine engine, bool enabled = true);
  void next(std::span<double> dx);

 private:
  int d_;
  bool enabled_;
  std::vector<double> drift_;
  std::vector<double> chol_;  // row-major lower triangle
  std::vector<double> xi_;
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Streaming Euler scheme for the SRBM; keeps O(d) state.
class SrbmStepper {
 public:
  SrbmStepper(const ModelSpec& spec, const SimConfig& cfg, int replica);

  void advance();

  int dim() const { return d_; }
  std::int64_t step_index() const { return k_; }
  double dt() const { return dt_; }
  double time() const { return static_cast<double>(k_) * dt_; }
  std::span<const double> state() const { return z_; }
  std::span<const double> previous_state() const { return z_prev_; }
  std::span<const double> push() const { return push_; }
  std::span<const double> increment() const { return dx_; }
  std::span<const double> local_time() const { return local_time_; }
  std::span<const double> noise() const { return noise_total_; }
  const StepAudit& audit() const { return audit_; }
  std::int64_t fallback_count() const { return solver_.fallback_count(); }

 private:
  int d_;
  double dt_;
  std::int64_t k_ = 0;
  NoiseSource noise_;
  SkorokhodSolver solver_;
  std::vector<double> z_, z_prev_, z_next_, push_, dx_;
  // Neumaier-compensated running sums of L and X.
  std::vector<double> local_sum_, local_comp_, local_time_;
  std::vector<double> noise_sum_, noise_comp_, noise_total_;
  StepAudit audit_;
};

/// Discretized reflected path; per-point vectors are stored row-major.
struct SrbmPath {
  int d = 0;
  double dt = 0.0;
  std::vector<double> times;       // t_k = k dt
  std::vector<double> z;           // reflected state
  std::vector<double> local_time;  // cumulative L(t_k)
  std::vector<double> noise;       // cumulative X(t_k) - X(0)
  StepAudit audit;

  std::size_t size() const { return times.size(); }
  std::span<const double> z_at(std::size_t k) const {
    return {z.data() + k * d, static_cast<std::size_t>(d)};
  }
  std::span<const double> local_time_at(std::size_t k) const {
    return {local_time.data() + k * d, static_cast<std::size_t>(d)};
  }
  std::span<const double> noise_at(std::size_t k) const {
    return {noise.data() + k * d, static_cast<std::size_t>(d)};
  }
};

/// Deterministic in (cfg.seed, replica). Throws ConfigError on an invalid
/// config and NumericalError on step failure or a non-finite state.
SrbmPath simulate_srbm(const ModelSpec& spec, const SimConfig& cfg, int replica = 0);

/// Records a path driven by caller-supplied increments (no noise source).
SrbmPath reflect_increments(const Matrix& refl, const Vector& z0,
                            std::span<const double> increments, double dt);

/// max_k |z(t_k) - (z0 + X(t_k) + R L(t_k))|_inf
double reconstruction_residual(const SrbmPath& path, const Matrix& refl);

/// Columns t, z_1..z_d, L_1..L_d; every `decimation`-th grid point.
void write_path_csv(const SrbmPath& path, std::ostream& out, int decimation = 1);

}  // namespace stickybm
