#include "stickybm/tails.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "stickybm/errors.hpp"
#include "stickybm/numeric.hpp"

namespace stickybm {
namespace {

void check_coordinate(const EmpiricalDist& dist, int i) {
  if (i < 0 || i >= dist.dim()) {
    throw PreconditionError("coordinate " + std::to_string(i) + " out of range");
  }
}

void check_window(QuantileWindow w) {
  if (!(w.lo > 0.0 && w.lo < w.hi && w.hi < 1.0)) {
    throw DomainError("quantile window must satisfy 0 < lo < hi < 1");
  }
}

std::optional<PolynomialCorrection> polynomial_correction(const std::vector<double>& x,
                                                          const std::vector<double>& s) {
  std::vector<int> keep;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] > 0.0 && s[k] > 0.0) keep.push_back(static_cast<int>(k));
  }
  const int n = static_cast<int>(keep.size());
  if (n < 4) return std::nullopt;
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) {
    const double xv = x[keep[r]];
    a(r, 0) = 1.0;
    a(r, 1) = xv;
    a(r, 2) = std::log(xv);
    y(r) = std::log(s[keep[r]]);
  }
  const Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ata);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::VectorXd coef = lu.solve(a.transpose() * y);
  const Eigen::VectorXd resid = y - a * coef;
  const double sigma2 = resid.squaredNorm() / std::max(1, n - 3);
  const Eigen::MatrixXd cov = sigma2 * lu.inverse();
  PolynomialCorrection pc;
  pc.alpha = -coef(1);
  pc.beta = -coef(2);
  pc.beta_se = std::sqrt(std::max(0.0, cov(2, 2)));
  return pc;
}

}  // namespace

LogLinearFit fit_log_linear(std::span<const double> thresholds, std::span<const double> survival) {
  if (thresholds.size() != survival.size()) {
    throw PreconditionError("threshold and survival tables differ in length");
  }
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (survival[k] > 0.0 && std::isfinite(thresholds[k])) {
      xs.push_back(thresholds[k]);
      ys.push_back(-std::log(survival[k]));
    }
  }
  const std::size_t n = xs.size();
  if (n < 2) throw DataStarvedError("log-linear fit needs at least two positive survivals");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (!(sxx > 0.0)) throw DataStarvedError("log-linear fit needs distinct thresholds");
  LogLinearFit fit;
  fit.points = static_cast<int>(n);
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = ys[k] - fit.intercept - fit.slope * xs[k];
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.slope_se = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  return fit;
}

TailFit fit_decay_rate(std::span<const double> thresholds, std::span<const double> survival,
                       int coordinate) {
  const auto positive = std::count_if(survival.begin(), survival.end(), [](double s) { return s > 0.0; });
  if (positive < kMinTailThresholds) {
    throw DataStarvedError("only " + std::to_string(positive) +
                           " positive survivals in the tail window; run a longer horizon");
  }
  const auto ll = fit_log_linear(thresholds, survival);
  TailFit fit;
  fit.coordinate = coordinate;
  fit.alpha_hat = ll.slope;
  fit.stderr_alpha = ll.slope_se;
  fit.intercept = ll.intercept;
  fit.r_squared = ll.r_squared;
  fit.thresholds.assign(thresholds.begin(), thresholds.end());
  fit.survival.assign(survival.begin(), survival.end());
  for (double x : fit.thresholds) fit.fitted.push_back(std::exp(-ll.intercept - ll.slope * x));
  return fit;
}

TailFit fit_decay_rate(const EmpiricalDist& dist, int i, QuantileWindow window, int thresholds,
                       bool with_correction) {
  check_coordinate(dist, i);
  check_window(window);
  if (thresholds < kMinTailThresholds) {
    throw PreconditionError("a tail fit uses at least " + std::to_string(kMinTailThresholds) +
                            " thresholds");
  }
  const double lo = dist.quantile(i, window.lo);
  const double hi = dist.quantile(i, window.hi);
  if (!(hi > lo)) {
    throw DataStarvedError("tail window of coordinate " + std::to_string(i) +
                           " is degenerate; run a longer horizon");
  }
  std::vector<double> xs, ss;
  for (int k = 0; k < thresholds; ++k) {
    const double x = lo + (hi - lo) * k / (thresholds - 1);
    xs.push_back(x);
    ss.push_back(dist.survival_gt(i, x));
  }
  TailFit fit = fit_decay_rate(xs, ss, i);
  fit.window = window;
  if (!(fit.alpha_hat > 0.0)) {
    throw NumericalError("fitted decay rate of coordinate " + std::to_string(i) +
                         " is not positive");
  }
  if (with_correction) fit.correction = polynomial_correction(xs, ss);
  return fit;
}

double gumbel_ks(std::vector<double> z) {
  if (z.empty()) throw DataStarvedError("KS distance needs samples");
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double g = std::exp(-std::exp(-z[k]));
    d = std::max({d, (k + 1) / n - g, g - k / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

GumbelReport gumbel_doa_check(std::span<const double> samples, std::size_t block_size,
                              double alpha, int coordinate) {
  if (block_size < 1) throw PreconditionError("block size must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("decay rate must be positive");
  const std::size_t blocks = samples.size() / block_size;
  if (blocks < kMinGumbelBlocks) {
    throw DataStarvedError("only " + std::to_string(blocks) + " blocks; need " +
                           std::to_string(kMinGumbelBlocks));
  }
  GumbelReport rep;
  rep.coordinate = coordinate;
  rep.block_size = block_size;
  rep.blocks = blocks;
  rep.alpha = alpha;
  rep.a_n = 1.0 / alpha;
  rep.b_n = std::log(static_cast<double>(block_size)) / alpha;
  std::vector<double> z(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto first = samples.begin() + b * block_size;
    const double m = *std::max_element(first, first + block_size);
    z[b] = (m - rep.b_n) / rep.a_n;
  }
  rep.ks = gumbel_ks(std::move(z));
  rep.consistent = rep.ks < kGumbelKsThreshold;
  return rep;
}

GumbelReport gumbel_doa_check(const EmpiricalDist& dist, int i, std::size_t block_size,
                              const TailFit* fit) {
  check_coordinate(dist, i);
  if (fit == nullptr || fit->coordinate != i) {
    throw DependencyError("Gumbel check of coordinate " + std::to_string(i) +
                          " needs a decay-rate fit first");
  }
  if (block_size < 1) throw PreconditionError("block size must be positive");
  std::vector<double> maxima;
  std::vector<double> block;
  int current = -1;
  for (std::size_t n = 0; n < dist.size(); ++n) {
    if (dist.replica(n) != current) {
      block.clear();
      current = dist.replica(n);
    }
    block.push_back(dist.state(n)[i]);
    if (block.size() == block_size) {
      maxima.push_back(*std::max_element(block.begin(), block.end()));
      block.clear();
    }
  }
  if (maxima.size() < kMinGumbelBlocks) {
    throw DataStarvedError("only " + std::to_string(maxima.size()) + " blocks; need " +
                           std::to_string(kMinGumbelBlocks) + "; run a longer horizon");
  }
  // Maxima are already block maxima: reuse the standardization with n = block_size.
  GumbelReport rep;
  rep.coordinate = i;
  rep.block_size = block_size;
  rep.blocks = maxima.size();
  rep.alpha = fit->alpha_hat;
  rep.a_n = 1.0 / rep.alpha;
  rep.b_n = std::log(static_cast<double>(block_size)) / rep.alpha;
  for (double& m : maxima) m = (m - rep.b_n) / rep.a_n;
  rep.ks = gumbel_ks(std::move(maxima));
  rep.consistent = rep.ks < kGumbelKsThreshold;
  return rep;
}

CopulaDiag tail_dependence(const EmpiricalDist& dist, int i, int j,
                           std::span<const double> thresholds) {
  check_coordinate(dist, i);
  check_coordinate(dist, j);
  CopulaDiag diag;
  diag.i = i;
  diag.j = j;
  const std::size_t n = dist.size();
  for (double t : thresholds) {
    CompensatedSum marg, joint, marg_sq;
    for (std::size_t k = 0; k < n; ++k) {
      auto z = dist.state(k);
      if (!(z[i] > t)) continue;
      const double w = dist.weight(k);
      marg.add(w);
      marg_sq.add(w * w);
      if (z[j] > t) joint.add(w);
    }
    LambdaPoint pt;
    pt.t = t;
    const double m = marg.value();
    const double neff = m > 0.0 ? m * m / marg_sq.value() : 0.0;
    pt.marginal_count = neff;
    pt.joint_count = m > 0.0 ? joint.value() / m * neff : 0.0;
    if (m > 0.0) {
      pt.lambda = std::clamp(joint.value() / m, 0.0, 1.0);
      pt.se = std::sqrt(pt.lambda * (1.0 - pt.lambda) / neff);
      if (joint.value() == 0.0) pt.upper_bound = std::min(1.0, 3.0 / neff);
    } else {
      pt.upper_bound = 1.0;
    }
    diag.lambda.push_back(pt);
  }
  if (!diag.lambda.empty()) {
    const std::size_t m = diag.lambda.size();
    const std::size_t start = m - std::max<std::size_t>(1, m / 3);
    double s = 0.0;
    for (std::size_t k = start; k < m; ++k) s += diag.lambda[k].lambda;
    diag.lambda_summary = s / static_cast<double>(m - start);
  }
  return diag;
}

CopulaDiag tail_dependence_at_levels(const EmpiricalDist& dist, int i, int j,
                                     std::span<const double> levels) {
  check_coordinate(dist, i);
  std::vector<double> t;
  for (double p : levels) t.push_back(dist.quantile(i, p));
  return tail_dependence(dist, i, j, t);
}

CopulaDiag joint_factorization_ratio(const EmpiricalDist& dist, const std::vector<Vector>& z_grid) {
  const int d = dist.dim();
  const int groups = dist.replica_count();
  const std::size_t n = dist.size();
  double w2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) w2 += dist.weight(k) * dist.weight(k);
  const double neff = 1.0 / w2;  // weights sum to one

  CopulaDiag diag;
  diag.i = 0;
  diag.j = d > 1 ? 1 : 0;
  for (const auto& z : z_grid) {
    if (z.size() != d) throw PreconditionError("grid point has the wrong dimension");
    // pairwise[a][b] = P(Z_a >= z_a, Z_b >= z_b); joint = P(Z >= z).
    Eigen::MatrixXd pairwise = Eigen::MatrixXd::Zero(d, d);
    double joint = 0.0;
    std::vector<double> g_joint(groups, 0.0), g_total(groups, 0.0);
    std::vector<std::vector<double>> g_marg(groups, std::vector<double>(d, 0.0));
    std::vector<char> hit(d);
    for (std::size_t k = 0; k < n; ++k) {
      auto s = dist.state(k);
      const double w = dist.weight(k);
      const int r = dist.replica(k);
      g_total[r] += w;
      bool all = true;
      for (int a = 0; a < d; ++a) {
        hit[a] = s[a] >= z(a);
        all = all && hit[a];
        if (hit[a]) g_marg[r][a] += w;
      }
      for (int a = 0; a < d; ++a) {
        if (!hit[a]) continue;
        for (int b = a; b < d; ++b) {
          if (hit[b]) pairwise(a, b) += w;
        }
      }
      if (all) {
        joint += w;
        g_joint[r] += w;
      }
    }
    RatioPoint pt;
    pt.z = z;
    pt.joint = joint;
    double product = 1.0;
    for (int a = 0; a < d; ++a) product *= pairwise(a, a);
    pt.product = product;
    if (!(product > 0.0) || !(joint > 0.0)) {
      pt.skipped = true;
      diag.ratio.push_back(std::move(pt));
      continue;
    }
    pt.ratio = joint / product;
    // Delta method on log rho = log J - sum log M_a with multinomial covariances.
    Eigen::VectorXd grad(d + 1);
    Eigen::VectorXd p(d + 1);
    grad(0) = 1.0 / joint;
    p(0) = joint;
    for (int a = 0; a < d; ++a) {
      grad(a + 1) = -1.0 / pairwise(a, a);
      p(a + 1) = pairwise(a, a);
    }
    Eigen::MatrixXd inter(d + 1, d + 1);
    inter(0, 0) = joint;
    for (int a = 0; a < d; ++a) {
      inter(0, a + 1) = inter(a + 1, 0) = joint;
      for (int b = a; b < d; ++b) inter(a + 1, b + 1) = inter(b + 1, a + 1) = pairwise(a, b);
    }
    const Eigen::MatrixXd cov = (inter - p * p.transpose()) / neff;
    const double var = grad.dot(cov * grad);
    pt.se = pt.ratio * std::sqrt(std::max(0.0, var));
    if (groups >= 2) {
      std::vector<double> loo;
      for (int r = 0; r < groups; ++r) {
        const double tot = 1.0 - g_total[r];
        if (!(tot > 0.0)) continue;
        double prod = 1.0;
        for (int a = 0; a < d; ++a) prod *= (pairwise(a, a) - g_marg[r][a]) / tot;
        const double jt = (joint - g_joint[r]) / tot;
        if (prod > 0.0) loo.push_back(jt / prod);
      }
      if (loo.size() >= 2) {
        double mean = 0.0;
        for (double v : loo) mean += v;
        mean /= loo.size();
        double ss = 0.0;
        for (double v : loo) ss += (v - mean) * (v - mean);
        const double k = static_cast<double>(loo.size());
        pt.jackknife_se = std::sqrt((k - 1.0) / k * ss);
      }
    }
    diag.ratio.push_back(std::move(pt));
  }
  return diag;
}

CopulaDiag joint_factorization_at_levels(const EmpiricalDist& dist, std::span<const double> levels) {
  std::vector<Vector> grid;
  for (double p : levels) {
    Vector z(dist.dim());
    for (int i = 0; i < dist.dim(); ++i) z(i) = dist.quantile(i, p);
    grid.push_back(std::move(z));
  }
  auto diag = joint_factorization_ratio(dist, grid);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    diag.ratio[k].levels = Vector::Constant(dist.dim(), levels[k]);
  }
  return diag;
}

EmpiricalCopula::EmpiricalCopula(const EmpiricalDist& dist, std::vector<int> coords)
    : coords_(std::move(coords)) {
  if (coords_.empty()) throw PreconditionError("copula needs at least one coordinate");
  for (int c : coords_) check_coordinate(dist, c);
  const std::size_t n = dist.size();
  const int m = dim();
  pseudo_.resize(n * m);
  weights_ = dist.weights();
  replica_.resize(n);
  replicas_ = dist.replica_count();
  for (std::size_t k = 0; k < n; ++k) {
    replica_[k] = dist.replica(k);
    auto z = dist.state(k);
    for (int a = 0; a < m; ++a) {
      pseudo_[k * m + a] = 1.0 - dist.survival_gt(coords_[a], z[coords_[a]]);
    }
  }
}

double EmpiricalCopula::operator()(std::span<const double> u) const {
  const int m = dim();
  if (static_cast<int>(u.size()) != m) throw PreconditionError("copula argument has the wrong dimension");
  CompensatedSum s;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    bool in = true;
    for (int a = 0; a < m && in; ++a) in = pseudo_[k * m + a] <= u[a];
    if (in) s.add(weights_[k]);
  }
  return s.value();
}

double EmpiricalCopula::joint_exceedance(std::span<const double> ubar) const {
  const int m = dim();
  if (static_cast<int>(ubar.size()) != m) throw PreconditionError("copula argument has the wrong dimension");
  CompensatedSum s;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    bool in = true;
    for (int a = 0; a < m && in; ++a) in = pseudo_[k * m + a] > 1.0 - ubar[a];
    if (in) s.add(weights_[k]);
  }
  return s.value();
}

double EmpiricalCopula::joint_exceedance_se(std::span<const double> ubar) const {
  const int m = dim();
  std::vector<double> num(replicas_, 0.0), den(replicas_, 0.0);
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    den[replica_[k]] += weights_[k];
    bool in = true;
    for (int a = 0; a < m && in; ++a) in = pseudo_[k * m + a] > 1.0 - ubar[a];
    if (in) num[replica_[k]] += weights_[k];
  }
  return jackknife_ratio_se(num, den);
}

double survival_copula(const CopulaFunction& copula, std::span<const double> ubar) {
  const int d = static_cast<int>(ubar.size());
  if (d < 1) throw PreconditionError("survival copula needs d >= 1");
  if (d > 3) {
    throw UnsupportedDimensionError("survival copula supports d <= 3, got d = " +
                                    std::to_string(d));
  }
  std::vector<double> arg(d);
  double total = 0.0;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    int bits = 0;
    for (int k = 0; k < d; ++k) {
      if (mask & (1u << k)) {
        arg[k] = 1.0 - ubar[k];
        ++bits;
      } else {
        arg[k] = 1.0;
      }
    }
    const double c = copula(arg);
    total += (bits % 2 == 0) ? c : -c;
  }
  return total;
}

std::vector<double> survival_copula_grid(const CopulaFunction& copula,
                                         const std::vector<std::vector<double>>& ubar_grid) {
  std::vector<double> out;
  out.reserve(ubar_grid.size());
  for (const auto& u : ubar_grid) out.push_back(survival_copula(copula, u));
  return out;
}

void write_tail_fit_csv(const TailFit& fit, std::ostream& out) {
  out.precision(17);
  out << "threshold,survival,fitted\n";
  for (std::size_t k = 0; k < fit.thresholds.size(); ++k) {
    out << fit.thresholds[k] << ',' << fit.survival[k] << ',' << fit.fitted[k] << '\n';
  }
}

void write_lambda_csv(const CopulaDiag& diag, std::ostream& out) {
  out.precision(17);
  out << "t,lambda_hat,se\n";
  for (const auto& p : diag.lambda) out << p.t << ',' << p.lambda << ',' << p.se << '\n';
}

void write_ratio_csv(const CopulaDiag& diag, std::ostream& out) {
  out.precision(17);
  out << "level";
  const int d = diag.ratio.empty() ? 0 : static_cast<int>(diag.ratio.front().z.size());
  for (int a = 0; a < d; ++a) out << ",z" << (a + 1);
  out << ",ratio,se,skipped\n";
  for (const auto& p : diag.ratio) {
    out << (p.levels.size() > 0 ? p.levels(0) : std::numeric_limits<double>::quiet_NaN());
    for (int a = 0; a < d; ++a) out << ',' << p.z(a);
    out << ',' << p.ratio << ',' << p.se << ',' << (p.skipped ? 1 : 0) << '\n';
  }
}

}  // namespace stickybm
