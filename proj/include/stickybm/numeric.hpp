#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace stickybm {

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

/// Leave-one-group-out jackknife standard error from per-group totals of a
/// ratio estimator num/den. Returns 0 for fewer than two groups.
inline double jackknife_ratio_se(const std::vector<double>& num, const std::vector<double>& den) {
  const std::size_t g = num.size();
  if (g < 2) return 0.0;
  CompensatedSum n_all, d_all;
  for (std::size_t r = 0; r < g; ++r) {
    n_all.add(num[r]);
    d_all.add(den[r]);
  }
  std::vector<double> loo;
  loo.reserve(g);
  for (std::size_t r = 0; r < g; ++r) {
    const double dd = d_all.value() - den[r];
    if (dd > 0.0) loo.push_back((n_all.value() - num[r]) / dd);
  }
  if (loo.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : loo) mean += v;
  mean /= static_cast<double>(loo.size());
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  const double k = static_cast<double>(loo.size());
  return std::sqrt((k - 1.0) / k * ss);
}

}  // namespace stickybm
