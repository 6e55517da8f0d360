#include "stickybm/sticky.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace stickybm {
namespace {

double weighted_sum(const Vector& u, std::span<const double> local_time) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) acc += u(i) * local_time[i];
  return acc;
}

void require_stickiness(const Vector& u, int d) {
  if (u.size() != d) throw ConfigError("stickiness vector must have d entries");
  if (!u.allFinite() || (u.array() < 0.0).any()) {
    throw ConfigError("stickiness entries must be finite and >= 0");
  }
}

struct PathCollector {
  StickyPath* out;
  double horizon;

  void on_sample(const StickyPoint& p) {
    if (!(p.s < horizon)) return;
    out->sticky_times.push_back(p.s);
    out->t_of.push_back(p.t);
    out->z.insert(out->z.end(), p.z.begin(), p.z.end());
    out->local_time_at_T.insert(out->local_time_at_T.end(), p.local_time.begin(),
                                p.local_time.end());
    out->segment.push_back(static_cast<std::int8_t>(p.segment));
  }
  void on_segment(const StickySegment&) {}
};

}  // namespace

StickySampler::StickySampler(int d, Vector u, double sticky_dt)
    : d_(d),
      u_(std::move(u)),
      sticky_dt_(sticky_dt),
      z_interp_(d),
      l_interp_(d) {
  require_stickiness(u_, d);
  if (!(sticky_dt > 0.0)) throw ConfigError("sticky_dt must be > 0");
}

double StickySampler::weighted_local_time(std::span<const double> local_time) const {
  return weighted_sum(u_, local_time);
}

TimeChange clock_forward(const SrbmPath& path, const Vector& u) {
  require_stickiness(u, path.d);
  TimeChange tc;
  tc.u = u;
  tc.grid = path.times;
  const std::size_t n = path.size();
  tc.clock.resize(n);
  tc.clock_left.resize(n);
  double weighted_prev = weighted_sum(u, path.local_time_at(0));
  tc.clock[0] = tc.clock_left[0] = path.times[0] + weighted_prev;
  for (std::size_t k = 1; k < n; ++k) {
    const double weighted = weighted_sum(u, path.local_time_at(k));
    tc.clock_left[k] = path.times[k] + weighted_prev;
    tc.clock[k] = path.times[k] + weighted;
    if (!(tc.clock_left[k] > tc.clock[k - 1]) || tc.clock[k] < tc.clock_left[k]) {
      throw IntegrityError("clock_forward: clock not strictly increasing at grid index " +
                           std::to_string(k));
    }
    weighted_prev = weighted;
  }
  return tc;
}

double clock_inverse(const TimeChange& tc, double s) {
  if (tc.clock.empty()) throw RangeError("clock_inverse: empty clock");
  if (!(s >= tc.clock.front()) || !(s <= tc.clock.back())) {
    throw RangeError("clock_inverse: s = " + std::to_string(s) + " outside [" +
                     std::to_string(tc.clock.front()) + ", " +
                     std::to_string(tc.clock.back()) + "]");
  }
  const auto it = std::upper_bound(tc.clock.begin(), tc.clock.end(), s);
  if (it == tc.clock.end()) return tc.grid.back();
  const auto k = static_cast<std::size_t>(it - tc.clock.begin());
  if (s >= tc.clock_left[k]) return tc.grid[k];
  const double frac = (s - tc.clock[k - 1]) / (tc.clock_left[k] - tc.clock[k - 1]);
  return tc.grid[k - 1] + frac * (tc.grid[k] - tc.grid[k - 1]);
}

StickyPath build_sticky_path(const SrbmPath& path, const Vector& u, double sticky_dt,
                             double sticky_horizon) {
  StickySampler sampler(path.d, u, sticky_dt);
  StickyPath out;
  out.d = path.d;
  out.sticky_dt = sticky_dt;
  const double end_clock = path.times.back() + weighted_sum(u, path.local_time_at(path.size() - 1));
  if (sticky_horizon > end_clock) {
    throw RangeError("build_sticky_path: sticky horizon " + std::to_string(sticky_horizon) +
                     " exceeds S(T_phys) = " + std::to_string(end_clock) +
                     "; simulate a longer physical horizon");
  }
  const double horizon = sticky_horizon < 0.0 ? end_clock : sticky_horizon;
  PathCollector collector{&out, horizon};
  for (std::size_t k = 0; k < path.size(); ++k) {
    sampler.feed(path.times[k], path.z_at(k), path.local_time_at(k), collector);
  }
  out.sticky_horizon = sampler.clock();
  return out;
}

StickyPath resample_path(const SrbmPath& path, double step) {
  if (!(step > 0.0)) throw ConfigError("resample_path: step must be > 0");
  StickyPath out;
  out.d = path.d;
  out.sticky_dt = step;
  out.sticky_horizon = path.times.back();
  const int d = path.d;
  std::vector<double> z(d);
  for (std::int64_t n = 0;; ++n) {
    const double s = static_cast<double>(n) * step;
    if (!(s < path.times.back())) break;
    const auto it = std::upper_bound(path.times.begin(), path.times.end(), s);
    const auto k = static_cast<std::size_t>(it - path.times.begin());
    const double frac = (s - path.times[k - 1]) / (path.times[k] - path.times[k - 1]);
    auto lo = path.z_at(k - 1);
    auto hi = path.z_at(k);
    for (int i = 0; i < d; ++i) z[i] = lo[i] + frac * (hi[i] - lo[i]);
    out.sticky_times.push_back(s);
    out.t_of.push_back(path.times[k - 1] + frac * (path.times[k] - path.times[k - 1]));
    out.z.insert(out.z.end(), z.begin(), z.end());
    auto l = path.local_time_at(k - 1);
    out.local_time_at_T.insert(out.local_time_at_T.end(), l.begin(), l.end());
    out.segment.push_back(kDriftSegment);
  }
  return out;
}

// ---------------------------------------------------------------------------

BoundaryAccumulator::BoundaryAccumulator(int d, Vector u, BoundaryWindow window)
    : d_(d), u_(std::move(u)), window_(window), push_sum_(d, 0.0), push_comp_(d, 0.0) {
  require_stickiness(u_, d);
  if (!(window.start >= 0.0) || !(window.end > window.start)) {
    throw ConfigError("boundary window must satisfy 0 <= start < end");
  }
  out_.d = d;
  out_.window_start = window.start;
  out_.faces.resize(d);
}

void BoundaryAccumulator::on_sample(const StickyPoint& p) {
  if (p.segment != kDriftSegment || p.s < window_.start || !(p.s < window_.end)) return;
  out_.v0_states.insert(out_.v0_states.end(), p.z.begin(), p.z.end());
}

namespace {

void compensated_add(double& sum, double& comp, double x) {
  const double t = sum + x;
  comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
  sum = t;
}

}  // namespace

void BoundaryAccumulator::on_segment(const StickySegment& seg) {
  const double lo = std::max(seg.begin, window_.start);
  const double hi = std::min(seg.end, window_.end);
  if (seg.segment == kDriftSegment) {
    if (hi > lo) compensated_add(drift_sum_, drift_comp_, hi - lo);
    return;
  }
  const int face = seg.segment - 1;
  double weight = 0.0;
  const double length = seg.end - seg.begin;
  if (length > 0.0) {
    if (hi <= lo) return;
    weight = hi - lo >= length ? seg.push : seg.push * ((hi - lo) / length);
  } else {
    // Zero-length hold (u_i = 0): a point event at seg.begin.
    if (seg.begin < window_.start || !(seg.begin < window_.end)) return;
    weight = seg.push;
  }
  compensated_add(push_sum_[face], push_comp_[face], weight);
  FaceSamples& f = out_.faces[face];
  f.states.insert(f.states.end(), seg.z_end.begin(), seg.z_end.end());
  f.weights.push_back(weight);
}

BoundaryMeasures BoundaryAccumulator::finish(double clock_end) && {
  const double end = std::min(window_.end, clock_end);
  const double length = end - window_.start;
  if (!(length > 0.0)) {
    throw ConfigError("boundary window is empty: start " + std::to_string(window_.start) +
                      " is beyond the simulated sticky horizon " + std::to_string(clock_end));
  }
  out_.window_length = length;
  out_.v0_mass = (drift_sum_ + drift_comp_) / length;
  out_.v_masses.resize(d_);
  for (int i = 0; i < d_; ++i) {
    out_.v_masses(i) = (push_sum_[i] + push_comp_[i]) / length;
    for (double& w : out_.faces[i].weights) w /= length;
  }
  return std::move(out_);
}

BoundaryMeasures accumulate_boundary_measures(const SrbmPath& path, const TimeChange& tc,
                                              BoundaryWindow window, double sticky_dt) {
  if (tc.clock.size() != path.size()) {
    throw ConfigError("accumulate_boundary_measures: time change does not match the path");
  }
  if (window.end != std::numeric_limits<double>::infinity() && window.end > tc.horizon()) {
    throw ConfigError("accumulate_boundary_measures: window ends after S(horizon)");
  }
  StickySampler sampler(path.d, tc.u, sticky_dt);
  BoundaryAccumulator acc(path.d, tc.u, window);
  for (std::size_t k = 0; k < path.size(); ++k) {
    sampler.feed(path.times[k], path.z_at(k), path.local_time_at(k), acc);
  }
  return std::move(acc).finish(sampler.clock());
}

void write_sticky_csv(const StickyPath& path, std::ostream& out, int decimation) {
  if (decimation < 1) throw ConfigError("write_sticky_csv: decimation must be >= 1");
  out << "s,T";
  for (int i = 1; i <= path.d; ++i) out << ",z_" << i;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (std::size_t n = 0; n < path.size(); n += decimation) {
    out << path.sticky_times[n] << ',' << path.t_of[n];
    for (double v : path.z_at(n)) out << ',' << v;
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace stickybm
