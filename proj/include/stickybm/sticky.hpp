#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stickybm/errors.hpp"
#include "stickybm/model.hpp"
#include "stickybm/reflect.hpp"

namespace stickybm {

/// Clock S(t) = t + sum_i u_i L_i(t) on the SRBM grid.
///
/// The discrete local time jumps at grid points, so S has a left limit
/// clock_left[k] = t_k + sum_i u_i L_i(t_{k-1}) and a right value clock[k].
/// On [clock_left[k], clock[k]) the inverse clock is flat: the sticky
/// process holds on the face it was pushed from.
struct TimeChange {
  Vector u;
  std::vector<double> grid;
  std::vector<double> clock;
  std::vector<double> clock_left;

  double horizon() const { return clock.back(); }
};

TimeChange clock_forward(const SrbmPath& path, const Vector& u);

/// T(s) = S^{-1}(s); exact (T(S(t_k)) = t_k) at grid points.
double clock_inverse(const TimeChange& tc, double s);

/// segment value of a sticky sample taken while the clock runs physically.
inline constexpr int kDriftSegment = 0;

struct StickyPoint {
  double s = 0.0;
  double t = 0.0;
  int segment = kDriftSegment;  // or 1 + i for a hold on face i
  std::span<const double> z;
  std::span<const double> local_time;  // L(T(s)), growing linearly in holds
};

/// One piece of sticky time: a drift piece [S(t_{k-1}), S(t_k-)) or a hold
/// on one face.
struct StickySegment {
  int segment = kDriftSegment;
  double begin = 0.0;
  double end = 0.0;
  double push = 0.0;  // dL_i for a hold
  std::span<const double> z_end;
};

/// Streams SRBM grid points and emits sticky-clock samples on the uniform
/// grid s_n = n * sticky_dt plus the drift/hold segments between them.
class StickySampler {
 public:
  StickySampler(int d, Vector u, double sticky_dt);

  /// Feeds grid point k. Sink needs on_sample(const StickyPoint&) and
  /// on_segment(const StickySegment&).
  template <class Sink>
  void feed(double t, std::span<const double> z, std::span<const double> local_time,
            Sink& sink);

  double clock() const { return clock_; }
  std::int64_t samples_emitted() const { return next_index_; }

 private:
  double next_sample() const { return static_cast<double>(next_index_) * sticky_dt_; }
  double weighted_local_time(std::span<const double> local_time) const;

  int d_;
  Vector u_;
  double sticky_dt_;
  bool started_ = false;
  double t_prev_ = 0.0;
  double clock_ = 0.0;
  double weighted_prev_ = 0.0;
  std::int64_t next_index_ = 0;
  std::vector<double> z_prev_, z_cur_, l_prev_, l_cur_, z_interp_, l_interp_;
};

struct StickyPath {
  int d = 0;
  double sticky_dt = 0.0;
  double sticky_horizon = 0.0;  // S at the end of the SRBM path
  std::vector<double> sticky_times;
  std::vector<double> t_of;            // T(s)
  std::vector<double> z;               // row-major
  std::vector<double> local_time_at_T; // row-major L(T(s))
  std::vector<std::int8_t> segment;

  std::size_t size() const { return sticky_times.size(); }
  std::span<const double> z_at(std::size_t n) const {
    return {z.data() + n * d, static_cast<std::size_t>(d)};
  }
  std::span<const double> local_time_at(std::size_t n) const {
    return {local_time_at_T.data() + n * d, static_cast<std::size_t>(d)};
  }
};

/// Samples Z(s) = Z~(T(s)) on s = 0, sticky_dt, ... below `sticky_horizon`
/// (default: the whole clock range). Throws RangeError if the requested
/// horizon exceeds S at the end of the path.
StickyPath build_sticky_path(const SrbmPath& path, const Vector& u, double sticky_dt,
                             double sticky_horizon = -1.0);

/// SRBM path linearly interpolated onto t = 0, step, ... strictly below the
/// last grid time. With u = 0 this is the sticky path bit for bit.
StickyPath resample_path(const SrbmPath& path, double step);

struct BoundaryWindow {
  double start = 0.0;
  double end = std::numeric_limits<double>::infinity();
};

struct FaceSamples {
  std::vector<double> states;   // row-major
  std::vector<double> weights;  // dL_i / window length
};

/// Per unit of sticky time inside the window: v0_mass estimates E[T(1)],
/// v_masses[i] estimates E[L_i(T(1))]. v0_states are the sticky-grid samples
/// taken in drift pieces (the support of V0); faces[i] holds every push on
/// face i weighted by its local-time increment.
struct BoundaryMeasures {
  int d = 0;
  double window_start = 0.0;
  double window_length = 0.0;
  double v0_mass = 0.0;
  Vector v_masses;
  std::vector<double> v0_states;
  std::vector<FaceSamples> faces;

  std::size_t v0_count() const { return d == 0 ? 0 : v0_states.size() / d; }
};

/// Streaming accumulator behind accumulate_boundary_measures.
class BoundaryAccumulator {
 public:
  BoundaryAccumulator(int d, Vector u, BoundaryWindow window);

  void on_sample(const StickyPoint& p);
  void on_segment(const StickySegment& seg);
  /// `clock_end` closes an open-ended window.
  BoundaryMeasures finish(double clock_end) &&;

 private:
  int d_;
  Vector u_;
  BoundaryWindow window_;
  double drift_sum_ = 0.0, drift_comp_ = 0.0;
  std::vector<double> push_sum_, push_comp_;
  BoundaryMeasures out_;
};

/// Window must lie inside [0, S(horizon)] and have positive length.
BoundaryMeasures accumulate_boundary_measures(const SrbmPath& path, const TimeChange& tc,
                                              BoundaryWindow window, double sticky_dt);

/// Columns s, T(s), z_1..z_d.
void write_sticky_csv(const StickyPath& path, std::ostream& out, int decimation = 1);

// ---------------------------------------------------------------------------

template <class Sink>
void StickySampler::feed(double t, std::span<const double> z,
                         std::span<const double> local_time, Sink& sink) {
  if (!started_) {
    started_ = true;
    t_prev_ = t;
    weighted_prev_ = weighted_local_time(local_time);
    clock_ = t + weighted_prev_;
    z_cur_.assign(z.begin(), z.end());
    l_cur_.assign(local_time.begin(), local_time.end());
    return;
  }
  z_prev_.swap(z_cur_);
  l_prev_.swap(l_cur_);
  z_cur_.assign(z.begin(), z.end());
  l_cur_.assign(local_time.begin(), local_time.end());

  const double begin = clock_;
  const double left = t + weighted_prev_;
  const double weighted = weighted_local_time(local_time);
  const double right = t + weighted;
  if (!(left > begin) || right < left) {
    throw IntegrityError("sticky clock is not strictly increasing at t = " + std::to_string(t));
  }

  const double span_t = t - t_prev_;
  const double span_s = left - begin;
  for (double s = next_sample(); s < left; s = next_sample()) {
    const double frac = (s - begin) / span_s;
    for (int i = 0; i < d_; ++i) {
      z_interp_[i] = z_prev_[i] + frac * (z_cur_[i] - z_prev_[i]);
    }
    sink.on_sample(StickyPoint{s, t_prev_ + frac * span_t, kDriftSegment, z_interp_, l_prev_});
    ++next_index_;
  }
  sink.on_segment(StickySegment{kDriftSegment, begin, left, 0.0, z_cur_});

  // Holds, face by face in index order; the last one ends exactly at `right`.
  int last_face = -1;
  for (int i = 0; i < d_; ++i) {
    if (l_cur_[i] > l_prev_[i]) last_face = i;
  }
  double hold_begin = left;
  l_interp_ = l_prev_;
  for (int i = 0; i <= last_face; ++i) {
    const double push = l_cur_[i] - l_prev_[i];
    if (!(push > 0.0)) continue;
    const double hold_end = i == last_face ? right : hold_begin + u_(i) * push;
    for (double s = next_sample(); s < hold_end; s = next_sample()) {
      l_interp_[i] = u_(i) > 0.0 ? l_prev_[i] + (s - hold_begin) / u_(i) : l_cur_[i];
      sink.on_sample(StickyPoint{s, t, 1 + i, z_cur_, l_interp_});
      ++next_index_;
    }
    sink.on_segment(StickySegment{1 + i, hold_begin, hold_end, push, z_cur_});
    l_interp_[i] = l_cur_[i];
    hold_begin = hold_end;
  }

  t_prev_ = t;
  weighted_prev_ = weighted;
  clock_ = right;
}

}  // namespace stickybm
