#include "stickybm/reflect.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <string>

#include "stickybm/errors.hpp"

namespace stickybm {
namespace {

constexpr std::int64_t kFiniteCheckMask = (std::int64_t{1} << 16) - 1;

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void neumaier_add(double& sum, double& comp, double x) {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x)) {
    comp += (sum - t) + x;
  } else {
    comp += (x - t) + sum;
  }
  sum = t;
}

}  // namespace

std::int64_t SimConfig::steps() const { return std::llround(horizon / dt); }

double SimConfig::effective_burn_in() const {
  return burn_in < 0.0 ? 0.1 * horizon : burn_in;
}

Vector SimConfig::initial_state(int d) const {
  return z0.size() == 0 ? Vector::Zero(d) : z0;
}

void SimConfig::validate(int d) const {
  std::vector<std::string> issues;
  if (!(dt > 0.0) || !std::isfinite(dt)) issues.push_back("sim.dt: must be > 0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    issues.push_back("sim.horizon: must be > 0");
  } else if (dt > 0.0 && !(dt < horizon)) {
    issues.push_back("sim.dt: must be smaller than sim.horizon");
  }
  if (replicas <= 0) issues.push_back("sim.replicas: must be a positive integer");
  if (z0.size() != 0) {
    if (z0.size() != d) {
      issues.push_back("sim.z0: expected a d-vector");
    } else if (!z0.allFinite() || (z0.array() < 0.0).any()) {
      issues.push_back("sim.z0: entries must be finite and >= 0");
    }
  }
  if (burn_in >= 0.0 && !(burn_in < horizon)) {
    issues.push_back("sim.burn_in: must be smaller than sim.horizon");
  }
  if (!(sticky_dt > 0.0)) issues.push_back("sim.sticky_dt: must be > 0");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

// ---------------------------------------------------------------------------

SkorokhodSolver::SkorokhodSolver(const Matrix& refl)
    : d_(static_cast<int>(refl.rows())),
      refl_(static_cast<std::size_t>(d_) * d_),
      q_(d_) {
  if (refl.rows() != refl.cols()) throw ConfigError("SkorokhodSolver: R must be square");
  for (int i = 0; i < d_; ++i) {
    if (!(refl(i, i) > 0.0)) {
      throw PreconditionError("SkorokhodSolver: R needs a positive diagonal");
    }
    for (int j = 0; j < d_; ++j) refl_[i * d_ + j] = refl(i, j);
  }
}

bool SkorokhodSolver::sweep_solve(std::span<double> push) {
  const double scale = 1.0 + inf_norm(q_);
  const double tol = 1e-12 * scale;
  std::fill(push.begin(), push.end(), 0.0);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_delta = 0.0;
    for (int i = 0; i < d_; ++i) {
      const double* row = &refl_[i * d_];
      double w = q_[i];
      for (int j = 0; j < d_; ++j) w += row[j] * push[j];
      const double updated = std::max(0.0, push[i] - w / row[i]);
      max_delta = std::max(max_delta, std::abs(updated - push[i]));
      push[i] = updated;
    }
    if (max_delta <= tol) {
      for (int i = 0; i < d_; ++i) {
        double w = q_[i];
        for (int j = 0; j < d_; ++j) w += refl_[i * d_ + j] * push[j];
        if (w < -1e-10 * scale) return false;
      }
      return true;
    }
  }
  return false;
}

bool SkorokhodSolver::enumerate_solve(std::span<double> push) {
  const double scale = 1.0 + inf_norm(q_);
  std::vector<unsigned> masks;
  for (unsigned mask = 1; mask < (1u << d_); ++mask) masks.push_back(mask);
  std::stable_sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) {
    return std::popcount(a) < std::popcount(b);
  });
  std::vector<int> active;
  for (unsigned mask : masks) {
    active.clear();
    for (int i = 0; i < d_; ++i) {
      if (mask & (1u << i)) active.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(active.size());
    Matrix sub(n, n);
    Vector rhs(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      rhs(r) = -q_[active[r]];
      for (Eigen::Index c = 0; c < n; ++c) sub(r, c) = refl_[active[r] * d_ + active[c]];
    }
    Eigen::FullPivLU<Matrix> lu(sub);
    if (!lu.isInvertible()) continue;
    const Vector x = lu.solve(rhs);
    if ((x.array() < -1e-14 * scale).any()) continue;
    std::fill(push.begin(), push.end(), 0.0);
    for (Eigen::Index r = 0; r < n; ++r) push[active[r]] = std::max(0.0, x(r));
    bool feasible = true;
    for (int i = 0; i < d_ && feasible; ++i) {
      double w = q_[i];
      for (int j = 0; j < d_; ++j) w += refl_[i * d_ + j] * push[j];
      feasible = w >= -1e-10 * scale;
    }
    if (feasible) return true;
  }
  return false;
}

void SkorokhodSolver::solve(std::span<const double> z, std::span<const double> dx,
                            std::span<double> z_next, std::span<double> push) {
  bool interior = true;
  for (int i = 0; i < d_; ++i) {
    q_[i] = z[i] + dx[i];
    interior = interior && q_[i] >= 0.0;
  }
  if (interior) {
    for (int i = 0; i < d_; ++i) {
      z_next[i] = q_[i];
      push[i] = 0.0;
    }
    return;
  }
  if (d_ == 1) {
    push[0] = -q_[0] / refl_[0];
    z_next[0] = 0.0;
    return;
  }

  if (!sweep_solve(push)) {
    ++fallbacks_;
    if (d_ > kMaxEnumerationDim || !enumerate_solve(push)) {
      throw StepFailureError(
          "skorokhod step failed: no complementary solution found (R may be "
          "outside the solver's reliable class)",
          std::vector<double>(z.begin(), z.end()),
          std::vector<double>(dx.begin(), dx.end()));
    }
  }
  for (int i = 0; i < d_; ++i) {
    if (push[i] > 0.0) {
      z_next[i] = 0.0;
      continue;
    }
    double w = q_[i];
    for (int j = 0; j < d_; ++j) w += refl_[i * d_ + j] * push[j];
    z_next[i] = std::max(0.0, w);
  }
}

StepResult skorokhod_step(const Vector& z, const Vector& dx, const Matrix& refl) {
  SkorokhodSolver solver(refl);
  StepResult out{Vector(z.size()), Vector(z.size())};
  solver.solve({z.data(), static_cast<std::size_t>(z.size())},
               {dx.data(), static_cast<std::size_t>(dx.size())},
               {out.z_next.data(), static_cast<std::size_t>(z.size())},
               {out.push.data(), static_cast<std::size_t>(z.size())});
  return out;
}

// ---------------------------------------------------------------------------

void StepAudit::record(std::span<const double> z_next, std::span<const double> push,
                       std::span<const double> dx) {
  ++steps;
  bool ok = true;
  double inner = 0.0;
  for (std::size_t i = 0; i < z_next.size(); ++i) {
    min_state = std::min(min_state, z_next[i]);
    min_push = std::min(min_push, push[i]);
    inner += z_next[i] * push[i];
    ok = ok && z_next[i] >= -1e-12 && push[i] >= -1e-15;
    if (push[i] > 1e-12) {
      max_face_gap = std::max(max_face_gap, z_next[i]);
      ok = ok && z_next[i] < 1e-8;
    }
  }
  const double compl_ratio = inner / (1.0 + inf_norm(dx));
  max_complementarity = std::max(max_complementarity, compl_ratio);
  ok = ok && compl_ratio <= 1e-12;
  if (!ok) ++violations;
}

void StepAudit::merge(const StepAudit& other) {
  steps += other.steps;
  violations += other.violations;
  min_state = std::min(min_state, other.min_state);
  min_push = std::min(min_push, other.min_push);
  max_complementarity = std::max(max_complementarity, other.max_complementarity);
  max_face_gap = std::max(max_face_gap, other.max_face_gap);
}

// ---------------------------------------------------------------------------

NoiseSource::NoiseSource(const ModelSpec& spec, double dt, Engine engine, bool enabled)
    : d_(spec.d),
      enabled_(enabled),
      drift_(spec.d),
      chol_(static_cast<std::size_t>(spec.d) * spec.d, 0.0),
      xi_(spec.d),
      engine_(std::move(engine)) {
  for (int i = 0; i < d_; ++i) drift_[i] = spec.mu(i) * dt;
  Eigen::LLT<Matrix> llt(spec.sigma * dt);
  if (llt.info() != Eigen::Success) {
    throw PreconditionError("NoiseSource: sigma is not positive definite");
  }
  const Matrix lower = llt.matrixL();
  for (int i = 0; i < d_; ++i) {
    for (int j = 0; j <= i; ++j) chol_[i * d_ + j] = lower(i, j);
  }
}

void NoiseSource::next(std::span<double> dx) {
  if (!enabled_) {
    for (int i = 0; i < d_; ++i) dx[i] = drift_[i];
    return;
  }
  for (int i = 0; i < d_; ++i) xi_[i] = normal_(engine_);
  for (int i = 0; i < d_; ++i) {
    double v = drift_[i];
    const double* row = &chol_[i * d_];
    for (int j = 0; j <= i; ++j) v += row[j] * xi_[j];
    dx[i] = v;
  }
}

// ---------------------------------------------------------------------------

SrbmStepper::SrbmStepper(const ModelSpec& spec, const SimConfig& cfg, int replica)
    : d_(spec.d),
      dt_(cfg.dt),
      noise_(spec, cfg.dt,
             make_stream(cfg.seed, StreamDomain::kSimulation,
                         static_cast<std::uint64_t>(replica)),
             cfg.noise_enabled),
      solver_(spec.refl),
      z_(spec.d),
      z_prev_(spec.d),
      z_next_(spec.d),
      push_(spec.d, 0.0),
      dx_(spec.d, 0.0),
      local_sum_(spec.d, 0.0),
      local_comp_(spec.d, 0.0),
      local_time_(spec.d, 0.0),
      noise_sum_(spec.d, 0.0),
      noise_comp_(spec.d, 0.0),
      noise_total_(spec.d, 0.0) {
  const Vector z0 = cfg.initial_state(spec.d);
  for (int i = 0; i < d_; ++i) z_[i] = z_prev_[i] = z0(i);
}

void SrbmStepper::advance() {
  noise_.next(dx_);
  solver_.solve(z_, dx_, z_next_, push_);
  audit_.record(z_next_, push_, dx_);
  std::swap(z_prev_, z_);
  std::swap(z_, z_next_);
  for (int i = 0; i < d_; ++i) {
    neumaier_add(local_sum_[i], local_comp_[i], push_[i]);
    local_time_[i] = local_sum_[i] + local_comp_[i];
    neumaier_add(noise_sum_[i], noise_comp_[i], dx_[i]);
    noise_total_[i] = noise_sum_[i] + noise_comp_[i];
  }
  ++k_;
  if ((k_ & kFiniteCheckMask) == 0) {
    for (int i = 0; i < d_; ++i) {
      if (!std::isfinite(z_[i]) || !std::isfinite(local_time_[i])) {
        throw NumericalError("simulate_srbm: non-finite state at step " + std::to_string(k_));
      }
    }
  }
}

SrbmPath simulate_srbm(const ModelSpec& spec, const SimConfig& cfg, int replica) {
  require_well_formed(spec);
  cfg.validate(spec.d);
  SrbmStepper stepper(spec, cfg, replica);
  const std::int64_t n = cfg.steps();
  const auto d = static_cast<std::size_t>(spec.d);

  SrbmPath path;
  path.d = spec.d;
  path.dt = cfg.dt;
  path.times.reserve(n + 1);
  path.z.reserve((n + 1) * d);
  path.local_time.reserve((n + 1) * d);
  path.noise.reserve((n + 1) * d);

  auto record = [&] {
    path.times.push_back(stepper.time());
    path.z.insert(path.z.end(), stepper.state().begin(), stepper.state().end());
    path.local_time.insert(path.local_time.end(), stepper.local_time().begin(),
                           stepper.local_time().end());
    path.noise.insert(path.noise.end(), stepper.noise().begin(), stepper.noise().end());
  };
  record();
  for (std::int64_t k = 0; k < n; ++k) {
    stepper.advance();
    record();
  }
  for (double v : path.z) {
    if (!std::isfinite(v)) throw NumericalError("simulate_srbm: non-finite state");
  }
  path.audit = stepper.audit();
  return path;
}

SrbmPath reflect_increments(const Matrix& refl, const Vector& z0,
                            std::span<const double> increments, double dt) {
  const int d = static_cast<int>(refl.rows());
  if (z0.size() != d || increments.size() % d != 0) {
    throw ConfigError("reflect_increments: dimension mismatch");
  }
  SkorokhodSolver solver(refl);
  const std::size_t n = increments.size() / d;
  SrbmPath path;
  path.d = d;
  path.dt = dt;
  std::vector<double> z(z0.data(), z0.data() + d), z_next(d), push(d);
  std::vector<double> local(d, 0.0), noise(d, 0.0);
  auto record = [&](std::size_t k) {
    path.times.push_back(static_cast<double>(k) * dt);
    path.z.insert(path.z.end(), z.begin(), z.end());
    path.local_time.insert(path.local_time.end(), local.begin(), local.end());
    path.noise.insert(path.noise.end(), noise.begin(), noise.end());
  };
  record(0);
  for (std::size_t k = 0; k < n; ++k) {
    std::span<const double> dx = increments.subspan(k * d, d);
    solver.solve(z, dx, z_next, push);
    path.audit.record(z_next, push, dx);
    z.swap(z_next);
    for (int i = 0; i < d; ++i) {
      local[i] += push[i];
      noise[i] += dx[i];
    }
    record(k + 1);
  }
  return path;
}

double reconstruction_residual(const SrbmPath& path, const Matrix& refl) {
  const int d = path.d;
  std::span<const double> z0 = path.z_at(0);
  double worst = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    auto z = path.z_at(k);
    auto x = path.noise_at(k);
    auto l = path.local_time_at(k);
    for (int i = 0; i < d; ++i) {
      double rl = 0.0;
      for (int j = 0; j < d; ++j) rl += refl(i, j) * l[j];
      worst = std::max(worst, std::abs(z[i] - (z0[i] + x[i] + rl)));
    }
  }
  return worst;
}

void write_path_csv(const SrbmPath& path, std::ostream& out, int decimation) {
  if (decimation < 1) throw ConfigError("write_path_csv: decimation must be >= 1");
  out << "t";
  for (int i = 1; i <= path.d; ++i) out << ",z_" << i;
  for (int i = 1; i <= path.d; ++i) out << ",L_" << i;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (std::size_t k = 0; k < path.size(); k += decimation) {
    out << path.times[k];
    for (double v : path.z_at(k)) out << ',' << v;
    for (double v : path.local_time_at(k)) out << ',' << v;
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace stickybm
