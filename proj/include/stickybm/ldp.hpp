#pragma once

#include <cstdint>

#include "stickybm/model.hpp"

namespace stickybm {

/// Piecewise-constant-velocity free path on [0, tau] with N equal segments.
struct PathVariable {
  double tau = 0.0;
  int segments = 0;
  Matrix velocity;  // segments x d

  /// Free-path increment over segment k.
  Vector increment(int k) const;
};

/// sum_k 1/2 (beta_k - mu)' Sigma^{-1} (beta_k - mu) * tau / N.
double action(const ModelSpec& spec, const PathVariable& pv);

/// Discrete Skorokhod image of the free path started at 0: (N + 1) x d.
Matrix skorokhod_image(const ModelSpec& spec, const PathVariable& pv);

/// Best interior constant-velocity path along the ray of x:
/// |x| (sqrt(a c) - b) with a = x^' S x^, b = x^' S mu, c = mu' S mu,
/// S = Sigma^{-1}, x^ = x / |x|. Zero for x = 0.
double straight_line_bound(const ModelSpec& spec, const Vector& x);

/// The path achieving straight_line_bound with the given segment count.
PathVariable straight_line_path(const ModelSpec& spec, const Vector& x, int segments);

struct RateOptions {
  int segments = 32;
  int restarts = 8;
  std::uint64_t seed = 0;
  int penalty_stages = 4;
  double penalty_start = 10.0;
  double penalty_growth = 10.0;
  double tau_lo_factor = 0.05;  // times |x| / |mu|
  double tau_hi_factor = 20.0;
  int golden_iterations = 16;
  int coarse_segments = 16;  // grid used while searching over tau
  int coarse_polls = 15;  // per penalty stage while searching over tau
  int max_polls = 200;    // per penalty stage in the final polish
  int threads = 0;
};

struct RateResult {
  Vector target;
  double value = 0.0;
  PathVariable path;
  Matrix image;  // skorokhod_image(path)
  double terminal_error = 0.0;  // sup-norm distance of the image endpoint to x
  int restarts_used = 0;
  int best_restart = -1;  // -1: the straight-line candidate won
  double bound = 0.0;     // straight_line_bound(x)
};

/// Terminal tolerance 1e-4 (1 + |x|).
double terminal_tolerance(const Vector& x);

/// Minimal discrete action over paths whose reflected image ends at x. This
/// is the reflected-process rate; the time change leaves it unchanged at
/// terminal points. Throws PreconditionError for x with a negative entry or
/// an unstable model, and OptimizationFailure if no restart is feasible.
RateResult rate_function(const ModelSpec& spec, const Vector& x, const RateOptions& opts = {});

}  // namespace stickybm
