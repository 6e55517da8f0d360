#include "stickybm/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "stickybm/errors.hpp"
#include "stickybm/parallel.hpp"
#include "stickybm/reflect.hpp"
#include "stickybm/rng.hpp"

namespace stickybm {
namespace {

Matrix precision_of(const ModelSpec& spec) {
  Eigen::LLT<Matrix> llt(spec.sigma);
  if (llt.info() != Eigen::Success) throw PreconditionError("Sigma must be positive definite");
  return llt.solve(Matrix::Identity(spec.d, spec.d));
}

double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Penalized path objective with incremental re-evaluation from the segment
/// that changed.
class PathProblem {
 public:
  PathProblem(const ModelSpec& spec, const Matrix& prec, const Vector& x, double tau, int n)
      : spec_(spec),
        prec_(prec),
        x_(x),
        solver_(spec.refl),
        d_(spec.d),
        n_(n),
        tau_(tau),
        dt_(tau / n),
        beta_(static_cast<std::size_t>(n) * spec.d),
        states_(static_cast<std::size_t>(n + 1) * spec.d, 0.0),
        scratch_(static_cast<std::size_t>(n + 1) * spec.d, 0.0),
        cost_(n, 0.0),
        dx_(spec.d),
        push_(spec.d) {}

  int dim() const { return d_; }
  int segments() const { return n_; }
  double tau() const { return tau_; }
  double& beta(int k, int j) { return beta_[static_cast<std::size_t>(k) * d_ + j]; }

  void set_weight(double w) {
    weight_ = w;
    objective_ = action_ + weight_ * terminal_sq(states_);
  }
  double objective() const { return objective_; }
  double action_value() const { return action_; }

  void set_velocity(const Matrix& v) {
    for (int k = 0; k < n_; ++k) {
      for (int j = 0; j < d_; ++j) beta(k, j) = v(k, j);
    }
    full_eval();
  }

  Matrix velocity() const {
    Matrix v(n_, d_);
    for (int k = 0; k < n_; ++k) {
      for (int j = 0; j < d_; ++j) v(k, j) = beta_[static_cast<std::size_t>(k) * d_ + j];
    }
    return v;
  }

  Vector endpoint() const {
    Vector e(d_);
    for (int j = 0; j < d_; ++j) e(j) = states_[static_cast<std::size_t>(n_) * d_ + j];
    return e;
  }

  double terminal_error() const { return sup_norm(endpoint() - x_); }

  void full_eval() {
    action_ = 0.0;
    for (int k = 0; k < n_; ++k) {
      cost_[k] = segment_cost(k);
      action_ += cost_[k];
    }
    propagate(0, states_);
    objective_ = action_ + weight_ * terminal_sq(states_);
  }

  /// Adds h to beta(k, j); keeps the move iff the objective drops.
  bool try_entry(int k, int j, double h) {
    beta(k, j) += h;
    const double new_cost = segment_cost(k);
    const double new_action = action_ - cost_[k] + new_cost;
    copy_prefix(k);
    propagate(k, scratch_);
    const double f = new_action + weight_ * terminal_sq(scratch_);
    if (f < objective_) {
      cost_[k] = new_cost;
      action_ = new_action;
      objective_ = f;
      std::copy(scratch_.begin() + static_cast<std::ptrdiff_t>(k) * d_, scratch_.end(),
                states_.begin() + static_cast<std::ptrdiff_t>(k) * d_);
      return true;
    }
    beta(k, j) -= h;
    return false;
  }

  /// Moves h from segment k + 1 to segment k in coordinate j.
  bool try_transfer(int k, int j, double h) {
    beta(k, j) += h;
    beta(k + 1, j) -= h;
    const double c0 = segment_cost(k), c1 = segment_cost(k + 1);
    const double new_action = action_ - cost_[k] - cost_[k + 1] + c0 + c1;
    copy_prefix(k);
    propagate(k, scratch_);
    const double f = new_action + weight_ * terminal_sq(scratch_);
    if (f < objective_) {
      cost_[k] = c0;
      cost_[k + 1] = c1;
      action_ = new_action;
      objective_ = f;
      std::copy(scratch_.begin() + static_cast<std::ptrdiff_t>(k) * d_, scratch_.end(),
                states_.begin() + static_cast<std::ptrdiff_t>(k) * d_);
      return true;
    }
    beta(k, j) -= h;
    beta(k + 1, j) += h;
    return false;
  }

  /// Adds h to coordinate j of every segment.
  bool try_collective(int j, double h) {
    const auto saved_beta = beta_;
    const auto saved_cost = cost_;
    const auto saved_states = states_;
    const double saved_action = action_, saved_obj = objective_;
    for (int k = 0; k < n_; ++k) beta(k, j) += h;
    full_eval();
    if (objective_ < saved_obj) return true;
    beta_ = saved_beta;
    cost_ = saved_cost;
    states_ = saved_states;
    action_ = saved_action;
    objective_ = saved_obj;
    return false;
  }

  /// Shifts all velocities by (x - endpoint) / tau until the endpoint is
  /// within tol or progress stalls.
  void restore(double tol) {
    for (int it = 0; it < 60; ++it) {
      const Vector gap = x_ - endpoint();
      if (sup_norm(gap) < tol) return;
      for (int k = 0; k < n_; ++k) {
        for (int j = 0; j < d_; ++j) beta(k, j) += gap(j) / tau_;
      }
      full_eval();
    }
  }

 private:
  double segment_cost(int k) const {
    double c = 0.0;
    const double* b = beta_.data() + static_cast<std::size_t>(k) * d_;
    for (int a = 0; a < d_; ++a) {
      const double da = b[a] - spec_.mu(a);
      for (int e = 0; e < d_; ++e) c += da * prec_(a, e) * (b[e] - spec_.mu(e));
    }
    return 0.5 * c * dt_;
  }

  void copy_prefix(int k) {
    std::copy(states_.begin() + static_cast<std::ptrdiff_t>(k) * d_,
              states_.begin() + static_cast<std::ptrdiff_t>(k + 1) * d_,
              scratch_.begin() + static_cast<std::ptrdiff_t>(k) * d_);
  }

  void propagate(int from, std::vector<double>& states) {
    for (int k = from; k < n_; ++k) {
      for (int j = 0; j < d_; ++j) dx_[j] = beta_[static_cast<std::size_t>(k) * d_ + j] * dt_;
      std::span<const double> z(states.data() + static_cast<std::size_t>(k) * d_, d_);
      std::span<double> next(states.data() + static_cast<std::size_t>(k + 1) * d_, d_);
      solver_.solve(z, dx_, next, push_);
    }
  }

  double terminal_sq(const std::vector<double>& states) const {
    double s = 0.0;
    for (int j = 0; j < d_; ++j) {
      const double e = states[static_cast<std::size_t>(n_) * d_ + j] - x_(j);
      s += e * e;
    }
    return s;
  }

  const ModelSpec& spec_;
  const Matrix& prec_;
  Vector x_;
  SkorokhodSolver solver_;
  int d_, n_;
  double tau_, dt_;
  std::vector<double> beta_, states_, scratch_, cost_, dx_, push_;
  double action_ = 0.0, objective_ = 0.0, weight_ = 0.0;
};

struct Candidate {
  bool feasible = false;
  double value = std::numeric_limits<double>::infinity();
  double terminal_error = std::numeric_limits<double>::infinity();
  double tau = 0.0;
  Matrix velocity;
};

/// Compass search with collective, per-entry and transfer directions.
void pattern_search(PathProblem& p, double h0, double h_min, int max_polls) {
  double h = h0;
  const int n = p.segments(), d = p.dim();
  for (int poll = 0; poll < max_polls && h > h_min; ++poll) {
    bool improved = false;
    for (int j = 0; j < d; ++j) {
      if (p.try_collective(j, h) || p.try_collective(j, -h)) improved = true;
    }
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < d; ++j) {
        if (p.try_entry(k, j, h) || p.try_entry(k, j, -h)) improved = true;
      }
    }
    for (int k = 0; k + 1 < n; ++k) {
      for (int j = 0; j < d; ++j) {
        if (p.try_transfer(k, j, h) || p.try_transfer(k, j, -h)) improved = true;
      }
    }
    if (!improved) h *= 0.5;
  }
}

/// Starts from x / tau + scale * noise, or from `noise` itself when fine.
Candidate solve_at(const ModelSpec& spec, const Matrix& prec, const Vector& x, double tau,
                   const Matrix& noise, double scale, const RateOptions& opts, bool fine) {
  const int n = static_cast<int>(noise.rows());
  PathProblem p(spec, prec, x, tau, n);
  Matrix start = noise;
  if (!fine) {
    for (int k = 0; k < n; ++k) start.row(k) = (x / tau).transpose() + scale * noise.row(k);
  }
  p.set_velocity(start);
  const double tol = terminal_tolerance(x);
  const double speed = x.norm() / tau + spec.mu.norm();
  // The polish continues from a coarse solve at the last penalty weight.
  const int first = fine ? opts.penalty_stages - 1 : 0;
  double w = opts.penalty_start * std::pow(opts.penalty_growth, first);
  double h0 = (fine ? 0.02 : 0.25) * speed;
  const double h_min = (fine ? 1e-7 : 1e-4) * speed;
  for (int stage = first; stage < opts.penalty_stages; ++stage) {
    p.set_weight(w);
    pattern_search(p, h0, h_min, fine ? opts.max_polls : opts.coarse_polls);
    h0 = std::max(h_min * 64.0, 0.02 * speed);
    w *= opts.penalty_growth;
  }
  p.restore(0.25 * tol);
  Candidate c;
  c.tau = tau;
  c.velocity = p.velocity();
  c.terminal_error = p.terminal_error();
  c.feasible = c.terminal_error < tol;
  c.value = p.action_value();
  return c;
}

Candidate run_restart(const ModelSpec& spec, const Matrix& prec, const Vector& x, int restart,
                      const RateOptions& opts) {
  auto eng = make_stream(opts.seed, StreamDomain::kOptimizer, static_cast<std::uint64_t>(restart));
  std::normal_distribution<double> normal(0.0, 1.0);
  // The horizon search runs on a coarser grid; the polish uses all segments.
  const int coarse_n = std::min(opts.segments, opts.coarse_segments);
  Matrix noise(coarse_n, spec.d);
  for (int k = 0; k < coarse_n; ++k) {
    for (int j = 0; j < spec.d; ++j) noise(k, j) = normal(eng);
  }
  const double base = x.norm() / spec.mu.norm();
  const double lo = std::log(opts.tau_lo_factor * base);
  const double hi = std::log(opts.tau_hi_factor * base);
  auto score = [&](const Candidate& c) {
    return c.feasible ? c.value : c.value + 1e3 * c.terminal_error;
  };
  auto eval = [&](double log_tau) {
    const double tau = std::exp(log_tau);
    const double scale = 0.3 * (x.norm() / tau + spec.mu.norm()) / std::sqrt(spec.d);
    return solve_at(spec, prec, x, tau, noise, scale, opts, false);
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c1 = b - g * (b - a), c2 = a + g * (b - a);
  Candidate f1 = eval(c1), f2 = eval(c2);
  for (int it = 0; it < opts.golden_iterations; ++it) {
    if (score(f1) <= score(f2)) {
      b = c2;
      c2 = c1;
      f2 = std::move(f1);
      c1 = b - g * (b - a);
      f1 = eval(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = std::move(f2);
      c2 = a + g * (b - a);
      f2 = eval(c2);
    }
  }
  const Candidate& coarse = score(f1) <= score(f2) ? f1 : f2;
  Matrix start(opts.segments, spec.d);
  for (int k = 0; k < opts.segments; ++k) {
    start.row(k) = coarse.velocity.row(static_cast<int>(
        static_cast<std::int64_t>(k) * coarse_n / opts.segments));
  }
  return solve_at(spec, prec, x, coarse.tau, start, 0.0, opts, true);
}

}  // namespace

Vector PathVariable::increment(int k) const {
  return velocity.row(k).transpose() * (tau / segments);
}

double action(const ModelSpec& spec, const PathVariable& pv) {
  if (pv.segments < 1 || pv.velocity.rows() != pv.segments) return 0.0;
  const Matrix prec = precision_of(spec);
  const double dt = pv.tau / pv.segments;
  double total = 0.0;
  for (int k = 0; k < pv.segments; ++k) {
    const Vector delta = pv.velocity.row(k).transpose() - spec.mu;
    total += 0.5 * delta.dot(prec * delta) * dt;
  }
  return total;
}

Matrix skorokhod_image(const ModelSpec& spec, const PathVariable& pv) {
  Matrix phi = Matrix::Zero(pv.segments + 1, spec.d);
  Vector z = Vector::Zero(spec.d);
  for (int k = 0; k < pv.segments; ++k) {
    z = skorokhod_step(z, pv.increment(k), spec.refl).z_next;
    phi.row(k + 1) = z.transpose();
  }
  return phi;
}

double straight_line_bound(const ModelSpec& spec, const Vector& x) {
  if ((x.array() < 0.0).any()) throw PreconditionError("target must be nonnegative");
  const double norm = x.norm();
  if (norm == 0.0) return 0.0;
  const Matrix prec = precision_of(spec);
  const Vector xh = x / norm;
  const double a = xh.dot(prec * xh);
  const double b = xh.dot(prec * spec.mu);
  const double c = spec.mu.dot(prec * spec.mu);
  return norm * (std::sqrt(a * c) - b);
}

PathVariable straight_line_path(const ModelSpec& spec, const Vector& x, int segments) {
  PathVariable pv;
  pv.segments = segments;
  const double norm = x.norm();
  if (norm == 0.0) {
    pv.segments = 0;
    pv.velocity = Matrix::Zero(0, spec.d);
    return pv;
  }
  const Matrix prec = precision_of(spec);
  const Vector xh = x / norm;
  const double speed = std::sqrt(spec.mu.dot(prec * spec.mu) / xh.dot(prec * xh));
  pv.tau = norm / speed;
  pv.velocity = Matrix(segments, spec.d);
  for (int k = 0; k < segments; ++k) pv.velocity.row(k) = (x / pv.tau).transpose();
  return pv;
}

double terminal_tolerance(const Vector& x) { return 1e-4 * (1.0 + x.norm()); }

RateResult rate_function(const ModelSpec& spec, const Vector& x, const RateOptions& opts) {
  require_well_formed(spec);
  if (x.size() != spec.d) throw PreconditionError("target has the wrong dimension");
  if ((x.array() < 0.0).any() || !x.allFinite()) {
    throw PreconditionError("target must be finite and nonnegative");
  }
  if (opts.segments < 2) throw PreconditionError("at least two path segments are required");
  if (opts.restarts < 1) throw PreconditionError("at least one restart is required");
  if (!validate_model(spec).stable) throw PreconditionError("rate function needs a stable model");
  const Matrix prec = precision_of(spec);

  RateResult res;
  res.target = x;
  res.bound = straight_line_bound(spec, x);
  if (x.norm() == 0.0) {
    res.path = straight_line_path(spec, x, opts.segments);
    res.image = Matrix::Zero(1, spec.d);
    return res;
  }

  Candidate best;
  {
    const PathVariable line = straight_line_path(spec, x, opts.segments);
    best.tau = line.tau;
    best.velocity = line.velocity;
    best.value = action(spec, line);
    const Matrix img = skorokhod_image(spec, line);
    best.terminal_error = sup_norm(img.row(opts.segments).transpose() - x);
    best.feasible = best.terminal_error < terminal_tolerance(x);
  }
  int best_index = -1;

  std::vector<Candidate> found(opts.restarts);
  parallel_for(opts.restarts, opts.threads,
               [&](int r) { found[r] = run_restart(spec, prec, x, r, opts); });
  for (int r = 0; r < opts.restarts; ++r) {
    const auto& c = found[r];
    const bool better = c.feasible && (!best.feasible || c.value < best.value);
    if (better) {
      best = c;
      best_index = r;
    }
  }
  if (!best.feasible) {
    double bv = std::numeric_limits<double>::infinity(), be = bv;
    for (const auto& c : found) {
      if (c.terminal_error < be) {
        be = c.terminal_error;
        bv = c.value;
      }
    }
    throw OptimizationFailure("no feasible path reached the target in " +
                                  std::to_string(opts.restarts) + " restarts",
                              bv, be);
  }
  res.value = best.value;
  res.path.tau = best.tau;
  res.path.segments = opts.segments;
  res.path.velocity = best.velocity;
  res.image = skorokhod_image(spec, res.path);
  res.terminal_error = sup_norm(res.image.row(opts.segments).transpose() - x);
  res.restarts_used = opts.restarts;
  res.best_restart = best_index;
  return res;
}

}  // namespace stickybm
