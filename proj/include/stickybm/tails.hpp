#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "stickybm/stationary.hpp"

namespace stickybm {

struct QuantileWindow {
  double lo = 0.90;
  double hi = 0.999;
};

inline constexpr int kMinTailThresholds = 20;

struct LogLinearFit {
  double slope = 0.0;      // of -log S against x
  double intercept = 0.0;  // -log S at x = 0
  double slope_se = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

/// Least squares of -log(survival) on threshold. Non-positive survivals are
/// skipped; throws DataStarvedError with fewer than two usable points.
LogLinearFit fit_log_linear(std::span<const double> thresholds, std::span<const double> survival);

/// Optional refinement S(x) ~ K x^{-beta} e^{-alpha x}; only the exponent is
/// reported, with its standard error.
struct PolynomialCorrection {
  double alpha = 0.0;
  double beta = 0.0;
  double beta_se = 0.0;
};

struct TailFit {
  int coordinate = 0;
  double alpha_hat = 0.0;
  double stderr_alpha = 0.0;
  double intercept = 0.0;
  QuantileWindow window;
  double r_squared = 0.0;
  std::vector<double> thresholds;
  std::vector<double> survival;
  std::vector<double> fitted;
  std::optional<PolynomialCorrection> correction;
};

/// Slope of -log P(Z_i > x) over equally spaced thresholds between the window
/// quantiles. Throws DataStarvedError with fewer than kMinTailThresholds
/// positive survivals, and NumericalError if the slope is not positive.
TailFit fit_decay_rate(const EmpiricalDist& dist, int i, QuantileWindow window = {},
                       int thresholds = 40, bool with_correction = false);

/// Same fit on an explicit survival table; the same threshold minimum applies.
TailFit fit_decay_rate(std::span<const double> thresholds, std::span<const double> survival,
                       int coordinate = 0);

inline constexpr double kGumbelKsThreshold = 0.05;
inline constexpr std::size_t kMinGumbelBlocks = 50;

struct GumbelReport {
  int coordinate = 0;
  std::size_t block_size = 0;
  std::size_t blocks = 0;
  double alpha = 0.0;
  double a_n = 0.0;
  double b_n = 0.0;
  double ks = 0.0;
  bool consistent = false;  // ks < kGumbelKsThreshold
};

/// Kolmogorov-Smirnov distance of standardized maxima to exp(-e^{-x}).
double gumbel_ks(std::vector<double> standardized);

/// Block maxima of consecutive samples, standardized with a_n = 1/alpha and
/// b_n = log(n)/alpha. Throws DataStarvedError below kMinGumbelBlocks blocks.
GumbelReport gumbel_doa_check(std::span<const double> samples, std::size_t block_size,
                              double alpha, int coordinate = 0);

/// Blocks are taken within replicas in time order. The rate comes from a prior
/// fit; throws DependencyError without one.
GumbelReport gumbel_doa_check(const EmpiricalDist& dist, int i, std::size_t block_size,
                              const TailFit* fit);

struct LambdaPoint {
  double t = 0.0;
  double lambda = 0.0;
  double se = 0.0;
  double upper_bound = 0.0;  // one-sided 95% bound, set when nothing is jointly exceeded
  double marginal_count = 0.0;
  double joint_count = 0.0;
};

struct RatioPoint {
  Vector z;
  Vector levels;  // quantile levels behind z, when known
  double joint = 0.0;
  double product = 0.0;
  double ratio = 0.0;
  double se = 0.0;            // delta method, multinomial covariance
  double jackknife_se = 0.0;  // over replicas
  bool skipped = false;
};

struct CopulaDiag {
  int i = 0;
  int j = 1;
  std::vector<LambdaPoint> lambda;
  double lambda_summary = 0.0;  // mean over the last third of thresholds
  std::vector<RatioPoint> ratio;
};

/// lambda(t) = P(Z_i > t, Z_j > t) / P(Z_i > t) with binomial standard errors.
CopulaDiag tail_dependence(const EmpiricalDist& dist, int i, int j,
                           std::span<const double> thresholds);
/// Thresholds at the quantiles of coordinate i.
CopulaDiag tail_dependence_at_levels(const EmpiricalDist& dist, int i, int j,
                                     std::span<const double> levels);

/// rho(z) = P(Z >= z) / prod_i P(Z_i >= z_i). Points with a zero denominator
/// are flagged as skipped.
CopulaDiag joint_factorization_ratio(const EmpiricalDist& dist, const std::vector<Vector>& z_grid);
/// Grid points z = (q_1(p), ..., q_d(p)) for each level p.
CopulaDiag joint_factorization_at_levels(const EmpiricalDist& dist, std::span<const double> levels);

/// Empirical copula of selected coordinates from weighted pseudo-observations
/// U_i = F_i(Z_i), with F_i the empirical distribution function.
class EmpiricalCopula {
 public:
  EmpiricalCopula(const EmpiricalDist& dist, std::vector<int> coords);

  int dim() const { return static_cast<int>(coords_.size()); }
  /// C(u) = P(U <= u).
  double operator()(std::span<const double> u) const;
  /// P(U_k > 1 - ubar_k for all k), counted directly.
  double joint_exceedance(std::span<const double> ubar) const;
  /// Jackknife standard error of joint_exceedance over replicas.
  double joint_exceedance_se(std::span<const double> ubar) const;

 private:
  std::vector<int> coords_;
  std::vector<double> pseudo_;  // row-major, dim() columns
  std::vector<double> weights_;
  std::vector<int> replica_;
  int replicas_ = 1;
};

using CopulaFunction = std::function<double(std::span<const double>)>;

/// Survival copula by inclusion-exclusion over the lower-order margins of C:
/// sum over subsets S of (-1)^|S| C(u^S), u^S_k = 1 - ubar_k on S and 1 off
/// it. Throws UnsupportedDimensionError for d > 3.
double survival_copula(const CopulaFunction& copula, std::span<const double> ubar);

/// Evaluates survival_copula at every grid point.
std::vector<double> survival_copula_grid(const CopulaFunction& copula,
                                         const std::vector<std::vector<double>>& ubar_grid);

void write_tail_fit_csv(const TailFit& fit, std::ostream& out);
void write_lambda_csv(const CopulaDiag& diag, std::ostream& out);
void write_ratio_csv(const CopulaDiag& diag, std::ostream& out);

}  // namespace stickybm
