#include "stickybm/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stickybm/errors.hpp"
#include "stickybm/numeric.hpp"

namespace stickybm {
namespace {

double dot(const Vector& theta, std::span<const double> z) {
  double s = 0.0;
  for (int i = 0; i < theta.size(); ++i) s += theta(i) * z[i];
  return s;
}

void require_nonpositive(const std::vector<Vector>& grid, int d) {
  for (const auto& theta : grid) {
    if (theta.size() != d) {
      throw PreconditionError("theta has dimension " + std::to_string(theta.size()) +
                              ", expected " + std::to_string(d));
    }
    for (int i = 0; i < d; ++i) {
      if (!std::isfinite(theta(i)) || theta(i) > 0.0) {
        throw DomainError("MGF requested at theta with a positive or non-finite component");
      }
    }
  }
}

/// Generic leave-one-group-out jackknife; `loo(r)` is the estimate without r.
template <class F>
double jackknife_se(int groups, F loo) {
  if (groups < 2) return 0.0;
  std::vector<double> vals(groups);
  for (int r = 0; r < groups; ++r) vals[r] = loo(r);
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / groups;
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  return std::sqrt((groups - 1.0) / groups * ss);
}

double ratio_sum(const std::vector<double>& num, const std::vector<double>& den, int skip) {
  CompensatedSum n, d;
  for (std::size_t r = 0; r < num.size(); ++r) {
    if (static_cast<int>(r) == skip) continue;
    n.add(num[r]);
    d.add(den[r]);
  }
  return d.value() > 0.0 ? n.value() / d.value() : 0.0;
}

struct RatioEstimate {
  double value = 0.0;
  double se = 0.0;
};

RatioEstimate pooled_ratio(const std::vector<double>& num, const std::vector<double>& den) {
  RatioEstimate out;
  out.value = ratio_sum(num, den, -1);
  out.se = jackknife_se(static_cast<int>(num.size()),
                        [&](int r) { return ratio_sum(num, den, r); });
  return out;
}

double drift_mean(const BoundaryMeasures& b, const Vector& theta, const Vector& box,
                  bool use_box) {
  const std::size_t n = b.v0_count();
  if (n == 0) return 0.0;
  CompensatedSum s;
  for (std::size_t k = 0; k < n; ++k) {
    std::span<const double> z(b.v0_states.data() + k * b.d, static_cast<std::size_t>(b.d));
    if (use_box) {
      bool in = true;
      for (int i = 0; i < b.d; ++i) in = in && z[i] <= box(i);
      if (in) s.add(1.0);
    } else {
      s.add(std::exp(dot(theta, z)));
    }
  }
  return s.value() / static_cast<double>(n);
}

double face_integral(const FaceSamples& f, int d, const Vector& theta, const Vector& box,
                     bool use_box) {
  CompensatedSum s;
  for (std::size_t k = 0; k < f.weights.size(); ++k) {
    std::span<const double> z(f.states.data() + k * d, static_cast<std::size_t>(d));
    if (use_box) {
      bool in = true;
      for (int i = 0; i < d; ++i) in = in && z[i] <= box(i);
      if (in) s.add(f.weights[k]);
    } else {
      s.add(f.weights[k] * std::exp(dot(theta, z)));
    }
  }
  return s.value();
}

}  // namespace

EmpiricalDist::EmpiricalDist(int d, std::vector<double> states, std::vector<double> weights,
                             std::vector<int> replica, const DistOptions& options)
    : d_(d),
      atom_epsilon_(options.atom_epsilon),
      states_(std::move(states)),
      weights_(std::move(weights)),
      replica_(std::move(replica)) {
  if (d_ < 1) throw PreconditionError("empirical law needs d >= 1");
  const std::size_t n = weights_.size();
  if (states_.size() != n * static_cast<std::size_t>(d_)) {
    throw PreconditionError("state array does not match the weight count");
  }
  if (!replica_.empty() && replica_.size() != n) {
    throw PreconditionError("replica labels do not match the weight count");
  }
  if (n == 0) throw DataStarvedError("empirical law has no samples");
  CompensatedSum total;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("weights must be finite and >= 0");
    total.add(w);
  }
  if (!(total.value() > 0.0)) throw DataStarvedError("empirical law has zero total weight");
  for (double& w : weights_) w /= total.value();
  replicas_ = replica_.empty() ? 1 : *std::max_element(replica_.begin(), replica_.end()) + 1;

  atoms_ = Vector::Zero(d_);
  sorted_.resize(d_);
  suffix_.resize(d_);
  tables_.resize(d_);
  std::vector<std::size_t> order(n);
  for (int i = 0; i < d_; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return states_[a * d_ + i] < states_[b * d_ + i];
    });
    auto& vals = sorted_[i];
    auto& suf = suffix_[i];
    vals.resize(n);
    suf.assign(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) vals[k] = states_[order[k] * d_ + i];
    CompensatedSum acc;
    for (std::size_t k = n; k-- > 0;) {
      acc.add(weights_[order[k]]);
      suf[k] = acc.value();
    }
    atoms_(i) = 1.0 - survival_ge(i, atom_epsilon_);

    auto& table = tables_[i];
    const double hi = vals.back();
    if (hi > 0.0 && options.survival_points >= 2) {
      const double lo = std::max({atom_epsilon_ * 10.0, hi * 1e-4, 1e-12});
      if (lo < hi) {
        const int m = options.survival_points;
        for (int k = 0; k < m; ++k) {
          const double x = lo * std::pow(hi / lo, static_cast<double>(k) / (m - 1));
          table.thresholds.push_back(x);
          table.survival.push_back(survival_gt(i, x));
        }
      }
    }
  }
}

double EmpiricalDist::survival_gt(int i, double x) const {
  const auto& v = sorted_[i];
  const auto k = std::upper_bound(v.begin(), v.end(), x) - v.begin();
  return std::clamp(suffix_[i][k], 0.0, 1.0);
}

double EmpiricalDist::survival_ge(int i, double x) const {
  const auto& v = sorted_[i];
  const auto k = std::lower_bound(v.begin(), v.end(), x) - v.begin();
  return std::clamp(suffix_[i][k], 0.0, 1.0);
}

double EmpiricalDist::quantile(int i, double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  const auto& v = sorted_[i];
  const auto& suf = suffix_[i];
  // cdf at index k (inclusive) is 1 - suf[k + 1]; suf is non-increasing.
  std::size_t lo = 0, hi = v.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (1.0 - suf[mid + 1] >= p - 1e-15) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return v[lo];
}

double EmpiricalDist::joint_survival_ge(std::span<const double> z) const {
  CompensatedSum s;
  const std::size_t n = size();
  for (std::size_t k = 0; k < n; ++k) {
    bool in = true;
    for (int i = 0; i < d_ && in; ++i) in = states_[k * d_ + i] >= z[i];
    if (in) s.add(weights_[k]);
  }
  return s.value();
}

EmpiricalDist estimate_stationary(std::span<const StickyPath> paths, double burn_in,
                                  const DistOptions& options) {
  if (paths.empty()) throw DataStarvedError("no sticky paths supplied");
  const int d = paths.front().d;
  std::vector<double> states, weights;
  std::vector<int> replica;
  for (std::size_t r = 0; r < paths.size(); ++r) {
    const auto& p = paths[r];
    if (p.d != d) throw PreconditionError("sticky paths disagree on dimension");
    for (std::size_t n = 0; n < p.size(); ++n) {
      if (p.sticky_times[n] < burn_in) continue;
      auto z = p.z_at(n);
      states.insert(states.end(), z.begin(), z.end());
      weights.push_back(1.0);
      replica.push_back(static_cast<int>(r));
    }
  }
  if (weights.empty()) {
    throw DataStarvedError("every sample lies inside the burn-in; extend the horizon");
  }
  return EmpiricalDist(d, std::move(states), std::move(weights), std::move(replica), options);
}

EmpiricalDist estimate_stationary(std::span<const ReplicaOutput> replicas,
                                  const DistOptions& options) {
  if (replicas.empty()) throw DataStarvedError("no replicas supplied");
  const int d = replicas.front().d;
  std::size_t total = 0;
  for (const auto& r : replicas) total += r.sample_count();
  if (total == 0) {
    throw DataStarvedError("every sample lies inside the burn-in; extend the horizon");
  }
  std::vector<double> states;
  std::vector<double> weights(total, 1.0);
  std::vector<int> replica;
  states.reserve(total * d);
  replica.reserve(total);
  for (std::size_t r = 0; r < replicas.size(); ++r) {
    if (replicas[r].d != d) throw PreconditionError("replicas disagree on dimension");
    states.insert(states.end(), replicas[r].samples.begin(), replicas[r].samples.end());
    replica.insert(replica.end(), replicas[r].sample_count(), static_cast<int>(r));
  }
  return EmpiricalDist(d, std::move(states), std::move(weights), std::move(replica), options);
}

EmpiricalDist condition_above(const EmpiricalDist& dist, int i, double threshold) {
  std::vector<double> states, weights;
  std::vector<int> replica;
  for (std::size_t n = 0; n < dist.size(); ++n) {
    auto z = dist.state(n);
    if (!(z[i] > threshold)) continue;
    states.insert(states.end(), z.begin(), z.end());
    weights.push_back(dist.weight(n));
    replica.push_back(dist.replica(n));
  }
  if (weights.empty()) throw DataStarvedError("no samples above the conditioning threshold");
  DistOptions opt;
  opt.atom_epsilon = dist.atom_epsilon();
  return EmpiricalDist(dist.dim(), std::move(states), std::move(weights), std::move(replica), opt);
}

namespace {

void fill_boundary(MgfEstimate& out, std::span<const BoundaryMeasures> boundary,
                   const std::vector<Vector>& grid) {
  const int d = out.d;
  const std::size_t groups = boundary.size();
  std::vector<double> den(groups), num0(groups);
  std::vector<std::vector<double>> numf(d, std::vector<double>(groups));
  for (std::size_t r = 0; r < groups; ++r) {
    if (boundary[r].d != d) throw PreconditionError("boundary measures disagree on dimension");
    den[r] = boundary[r].window_length;
  }
  const BoundaryMeasures pooled = pool_boundary_masses(boundary);
  out.v0_mass = pooled.v0_mass;
  out.v_masses = pooled.v_masses;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto& pt = out.points[g];
    for (std::size_t r = 0; r < groups; ++r) {
      const auto& b = boundary[r];
      num0[r] = b.window_length * b.v0_mass * drift_mean(b, grid[g], grid[g], false);
      for (int i = 0; i < d; ++i) {
        numf[i][r] = b.window_length * face_integral(b.faces[i], d, grid[g], grid[g], false);
      }
    }
    const auto e0 = pooled_ratio(num0, den);
    pt.phi0 = e0.value;
    pt.phi0_se = e0.se;
    pt.phi_face = Vector::Zero(d);
    pt.phi_face_se = Vector::Zero(d);
    for (int i = 0; i < d; ++i) {
      const auto ei = pooled_ratio(numf[i], den);
      pt.phi_face(i) = ei.value;
      pt.phi_face_se(i) = ei.se;
    }
  }
  out.has_boundary = true;
}

}  // namespace

MgfEstimate empirical_mgf(const EmpiricalDist& dist, std::span<const BoundaryMeasures> boundary,
                          const std::vector<Vector>& theta_grid) {
  const int d = dist.dim();
  require_nonpositive(theta_grid, d);
  MgfEstimate out;
  out.d = d;
  out.has_phi = true;
  out.points.resize(theta_grid.size());
  const int groups = dist.replica_count();
  std::vector<double> num(groups), den(groups);
  for (std::size_t n = 0; n < dist.size(); ++n) den[dist.replica(n)] += dist.weight(n);
  for (std::size_t g = 0; g < theta_grid.size(); ++g) {
    const Vector& theta = theta_grid[g];
    std::vector<CompensatedSum> acc(groups);
    for (std::size_t n = 0; n < dist.size(); ++n) {
      acc[dist.replica(n)].add(dist.weight(n) * std::exp(dot(theta, dist.state(n))));
    }
    for (int r = 0; r < groups; ++r) num[r] = acc[r].value();
    auto& pt = out.points[g];
    pt.theta = theta;
    const auto e = pooled_ratio(num, den);
    pt.phi = e.value;
    pt.phi_se = e.se;
  }
  if (!boundary.empty()) fill_boundary(out, boundary, theta_grid);
  return out;
}

MgfEstimate boundary_mgf(int d, std::span<const BoundaryMeasures> boundary,
                         const std::vector<Vector>& theta_grid) {
  require_nonpositive(theta_grid, d);
  if (boundary.empty()) throw PreconditionError("boundary MGFs need at least one replica");
  MgfEstimate out;
  out.d = d;
  out.points.resize(theta_grid.size());
  for (std::size_t g = 0; g < theta_grid.size(); ++g) out.points[g].theta = theta_grid[g];
  fill_boundary(out, boundary, theta_grid);
  return out;
}

MgfEstimate closed_form_mgf(const ModelSpec& spec, const ProductForm& form,
                            const std::vector<Vector>& theta_grid) {
  require_nonpositive(theta_grid, spec.d);
  MgfEstimate out;
  out.d = spec.d;
  out.has_phi = true;
  out.has_boundary = true;
  out.v0_mass = form.interior_mass;
  out.v_masses = form.local_time_masses;
  for (const auto& theta : theta_grid) {
    const auto cf = product_form_mgf(spec, form, theta);
    MgfPoint pt;
    pt.theta = theta;
    pt.phi = cf.phi;
    pt.phi0 = cf.phi0;
    pt.phi_face = cf.phi_face;
    pt.phi_face_se = Vector::Zero(spec.d);
    out.points.push_back(std::move(pt));
  }
  return out;
}

BarReport bar_residual(const ModelSpec& spec, const MgfEstimate& mgf, BarMode mode) {
  require_well_formed(spec);
  if (mgf.d != spec.d) throw PreconditionError("MGF estimate dimension does not match the model");
  if (!mgf.has_boundary) throw PreconditionError("BAR needs boundary MGFs Phi_i");
  if (mode == BarMode::kSticky && !mgf.has_phi) {
    throw PreconditionError("sticky BAR needs the stationary MGF Phi");
  }
  BarReport rep;
  rep.mode = mode;
  for (std::size_t g = 0; g < mgf.points.size(); ++g) {
    const auto& pt = mgf.points[g];
    const Vector& theta = pt.theta;
    const double psi = levy_exponent(spec, theta);
    BarRecord rec;
    rec.theta = theta;
    rec.lhs = -psi * (mode == BarMode::kSticky ? pt.phi : pt.phi0);
    double rhs = 0.0;
    for (int i = 0; i < spec.d; ++i) {
      double coef = theta.dot(spec.refl.col(i));
      if (mode == BarMode::kSticky) coef -= spec.stickiness(i) * psi;
      rhs += pt.phi_face(i) * coef;
    }
    rec.rhs = rhs;
    rec.abs_resid = std::abs(rec.lhs - rec.rhs);
    rec.rel_resid = rec.abs_resid / std::max({std::abs(rec.lhs), std::abs(rec.rhs), 1e-8});
    if (!std::isfinite(rec.abs_resid)) throw NumericalError("non-finite BAR residual");
    if (rep.records.empty() || rec.rel_resid > rep.max_rel_resid) rep.worst_index = g;
    rep.max_abs_resid = std::max(rep.max_abs_resid, rec.abs_resid);
    rep.max_rel_resid = std::max(rep.max_rel_resid, rec.rel_resid);
    rep.records.push_back(std::move(rec));
  }
  return rep;
}

MassIdentityReport mass_identity_check(const ModelSpec& spec, double v0_mass,
                                       const Vector& v_masses) {
  require_well_formed(spec);
  if (v_masses.size() != spec.d) throw PreconditionError("v_masses dimension does not match the model");
  MassIdentityReport rep;
  const auto lt = expected_local_times(spec);
  rep.expected_v = lt.expected;
  rep.expected_nonnegative = lt.nonnegative;
  rep.expected_v0 = 1.0 - spec.stickiness.dot(lt.expected);
  rep.simulated_v = v_masses;
  rep.simulated_v0 = v0_mass;
  rep.rel_error_v = Vector::Zero(spec.d);
  for (int i = 0; i < spec.d; ++i) {
    const double e = rep.expected_v(i);
    rep.rel_error_v(i) = std::abs(v_masses(i) - e) / std::max(std::abs(e), 1e-12);
  }
  rep.rel_error_v0 =
      std::abs(v0_mass - rep.expected_v0) / std::max(std::abs(rep.expected_v0), 1e-12);
  rep.clock_identity_residual = v0_mass + spec.stickiness.dot(v_masses) - 1.0;
  return rep;
}

BoundaryMeasures pool_boundary_masses(std::span<const BoundaryMeasures> boundary) {
  if (boundary.empty()) throw PreconditionError("no boundary measures to pool");
  BoundaryMeasures out;
  out.d = boundary.front().d;
  out.window_start = boundary.front().window_start;
  CompensatedSum len, v0;
  std::vector<CompensatedSum> v(out.d);
  for (const auto& b : boundary) {
    if (b.d != out.d) throw PreconditionError("boundary measures disagree on dimension");
    len.add(b.window_length);
    v0.add(b.v0_mass * b.window_length);
    for (int i = 0; i < out.d; ++i) v[i].add(b.v_masses(i) * b.window_length);
  }
  out.window_length = len.value();
  out.v0_mass = v0.value() / out.window_length;
  out.v_masses = Vector::Zero(out.d);
  for (int i = 0; i < out.d; ++i) out.v_masses(i) = v[i].value() / out.window_length;
  out.faces.resize(out.d);
  return out;
}

DecompositionCheck decomposition_check(const EmpiricalDist& dist,
                                       std::span<const BoundaryMeasures> boundary,
                                       const Vector& u, const Vector& box) {
  const int d = dist.dim();
  const int groups = dist.replica_count();
  if (static_cast<int>(boundary.size()) != groups) {
    throw PreconditionError("decomposition check needs one boundary record per replica");
  }
  if (box.size() != d || u.size() != d) throw PreconditionError("box or u has the wrong dimension");
  std::vector<double> pi_num(groups), pi_den(groups), dec_num(groups), dec_den(groups);
  for (std::size_t n = 0; n < dist.size(); ++n) {
    const int r = dist.replica(n);
    pi_den[r] += dist.weight(n);
    auto z = dist.state(n);
    bool in = true;
    for (int i = 0; i < d; ++i) in = in && z[i] <= box(i);
    if (in) pi_num[r] += dist.weight(n);
  }
  for (int r = 0; r < groups; ++r) {
    const auto& b = boundary[r];
    double m = b.v0_mass * drift_mean(b, box, box, true);
    for (int i = 0; i < d; ++i) m += u(i) * face_integral(b.faces[i], d, box, box, true);
    dec_num[r] = m * b.window_length;
    dec_den[r] = b.window_length;
  }
  DecompositionCheck out;
  out.box = box;
  out.pi_mass = ratio_sum(pi_num, pi_den, -1);
  out.decomposed_mass = ratio_sum(dec_num, dec_den, -1);
  out.difference = out.pi_mass - out.decomposed_mass;
  out.se = jackknife_se(groups, [&](int r) {
    return ratio_sum(pi_num, pi_den, r) - ratio_sum(dec_num, dec_den, r);
  });
  out.consistent = std::abs(out.difference) <= std::max(3.0 * out.se, 1e-12);
  return out;
}

}  // namespace stickybm
