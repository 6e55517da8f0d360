#include "stickybm/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stickybm/errors.hpp"
#include "stickybm/lp.hpp"

namespace stickybm {
namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix principal_submatrix(const Matrix& a, std::span<const int> rows,
                           std::span<const int> cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(r, c) = a(rows[r], cols[c]);
    }
  }
  return out;
}

Matrix skew_rhs(const Matrix& sigma, const Matrix& refl) {
  const Vector ratio = sigma.diagonal().array() / refl.diagonal().array();
  // R D_R^{-1} D_Sigma + D_Sigma D_R^{-1} R'
  const Matrix left = refl * ratio.asDiagonal();
  return left + left.transpose();
}

}  // namespace

void require_well_formed(const ModelSpec& spec) {
  std::vector<std::string> issues;
  const auto d = static_cast<Eigen::Index>(spec.d);
  if (spec.d <= 0) issues.push_back("model.d: must be a positive integer");
  if (spec.sigma.rows() != d || spec.sigma.cols() != d) {
    issues.push_back("model.sigma: expected a d x d matrix");
  }
  if (spec.mu.size() != d) issues.push_back("model.mu: expected a d-vector");
  if (spec.refl.rows() != d || spec.refl.cols() != d) {
    issues.push_back("model.R: expected a d x d matrix");
  }
  if (spec.stickiness.size() != d) {
    issues.push_back("model.u: expected a d-vector");
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));

  if (!all_finite(spec.sigma)) issues.push_back("model.sigma: non-finite entry");
  if (!spec.mu.allFinite()) issues.push_back("model.mu: non-finite entry");
  if (!all_finite(spec.refl)) issues.push_back("model.R: non-finite entry");
  if (!spec.stickiness.allFinite() || (spec.stickiness.array() < 0.0).any()) {
    issues.push_back("model.u: entries must be finite and >= 0");
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

bool is_completely_s(const Matrix& refl) {
  const auto d = static_cast<int>(refl.rows());
  if (refl.cols() != refl.rows()) {
    throw ConfigError("is_completely_s: matrix must be square");
  }
  if (d > kMaxCompletelySDim) {
    throw UnsupportedDimensionError(
        "is_completely_s: dimension " + std::to_string(d) +
        " exceeds the enumeration bound d <= " +
        std::to_string(kMaxCompletelySDim));
  }
  constexpr double kMargin = 1e-9;
  std::vector<int> idx;
  idx.reserve(d);
  for (unsigned mask = 1; mask < (1u << d); ++mask) {
    idx.clear();
    for (int i = 0; i < d; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    if (lp::game_value(principal_submatrix(refl, idx, idx)) <= kMargin) {
      return false;
    }
  }
  return true;
}

bool is_m_matrix(const Matrix& refl, double tol) {
  const Eigen::Index d = refl.rows();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i != j && refl(i, j) > tol) return false;
    }
  }
  Eigen::FullPivLU<Matrix> lu(refl);
  if (!lu.isInvertible()) return false;
  return (lu.inverse().array() >= -tol).all();
}

ValidationReport validate_model(const ModelSpec& spec, const Tolerances& tol) {
  require_well_formed(spec);
  ValidationReport report;

  const double asym = (spec.sigma - spec.sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol.symmetry) {
    report.messages.push_back("sigma is not symmetric (max asymmetry " +
                              std::to_string(asym) + ")");
  } else {
    const Matrix sym = 0.5 * (spec.sigma + spec.sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    report.spd_ok = min_eig > tol.eigen_floor;
    if (!report.spd_ok) {
      report.messages.push_back("sigma is not positive definite (min eigenvalue " +
                                std::to_string(min_eig) + ")");
    }
  }

  try {
    report.completely_s_ok = is_completely_s(spec.refl);
    if (!report.completely_s_ok) {
      report.messages.push_back("R is not completely-S");
    }
  } catch (const UnsupportedDimensionError& e) {
    report.messages.push_back(e.what());
  }

  report.m_matrix = is_m_matrix(spec.refl);

  Eigen::FullPivLU<Matrix> lu(spec.refl);
  if (!lu.isInvertible()) {
    report.messages.push_back("R is singular");
  } else {
    const Vector r_inv_mu = lu.solve(spec.mu);
    report.stable = (r_inv_mu.array() < 0.0).all();
    if (!report.stable) {
      std::ostringstream os;
      os << "R^{-1} mu = (" << r_inv_mu.transpose() << ") is not strictly negative";
      report.messages.push_back(os.str());
    }
  }

  if ((spec.refl.diagonal().array() == 0.0).any()) {
    report.messages.push_back("R has a zero diagonal entry; skew symmetry undefined");
  } else {
    report.skew_symmetric = check_skew_symmetry(spec, tol.matrix).holds;
  }
  return report;
}

double levy_exponent(const ModelSpec& spec, const Vector& theta) {
  return theta.dot(spec.mu) + 0.5 * theta.dot(spec.sigma * theta);
}

SkewCheck check_skew_symmetry(const ModelSpec& spec, double tol) {
  if ((spec.refl.diagonal().array() == 0.0).any()) {
    throw PreconditionError("check_skew_symmetry: degenerate reflection (zero diagonal in R)");
  }
  const Matrix resid = 2.0 * spec.sigma - skew_rhs(spec.sigma, spec.refl);
  SkewCheck out;
  out.residual = resid.cwiseAbs().maxCoeff();
  out.holds = out.residual < tol;
  return out;
}

DecomposabilityCheck check_decomposability(const ModelSpec& spec,
                                           std::span<const int> k_set,
                                           std::span<const int> l_set,
                                           CrossBlockForm form, double tol) {
  if (k_set.empty() || l_set.empty()) {
    throw ConfigError("check_decomposability: K and L must both be nonempty");
  }
  std::vector<int> seen(spec.d, 0);
  for (auto set : {k_set, l_set}) {
    for (int i : set) {
      if (i < 0 || i >= spec.d) {
        throw ConfigError("check_decomposability: index " + std::to_string(i) +
                          " out of range");
      }
      ++seen[i];
    }
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
    throw ConfigError("check_decomposability: (K, L) is not a partition of the index set");
  }

  const Matrix sigma_kk = principal_submatrix(spec.sigma, k_set, k_set);
  const Matrix refl_kk = principal_submatrix(spec.refl, k_set, k_set);
  if ((refl_kk.diagonal().array() == 0.0).any()) {
    throw PreconditionError("check_decomposability: zero diagonal in R^(K,K)");
  }
  const Matrix sigma_lk = principal_submatrix(spec.sigma, l_set, k_set);
  const Matrix refl_lk = principal_submatrix(spec.refl, l_set, k_set);

  DecomposabilityCheck out;
  out.block_residual = (2.0 * sigma_kk - skew_rhs(sigma_kk, refl_kk)).cwiseAbs().maxCoeff();

  Matrix cross_rhs;
  if (form == CrossBlockForm::kLiteral) {
    const Vector diag = refl_kk.diagonal();
    cross_rhs = refl_lk * diag.asDiagonal() * diag.cwiseInverse().asDiagonal();
  } else {
    const Vector ratio = sigma_kk.diagonal().array() / refl_kk.diagonal().array();
    cross_rhs = refl_lk * ratio.asDiagonal();
  }
  out.cross_residual = (2.0 * sigma_lk - cross_rhs).cwiseAbs().maxCoeff();
  out.holds = out.block_residual < tol && out.cross_residual < tol;
  return out;
}

LocalTimeSolution expected_local_times(const ModelSpec& spec) {
  require_well_formed(spec);
  const Matrix system = spec.mu * spec.stickiness.transpose() - spec.refl;
  Eigen::PartialPivLU<Matrix> lu(system);
  const double rcond = lu.rcond();
  LocalTimeSolution out;
  out.condition_estimate = rcond > 0.0 ? 1.0 / rcond : INFINITY;
  if (!(rcond > 1e-14)) {
    throw SingularSystemError("expected_local_times: (mu u' - R) is singular", out.condition_estimate);
  }
  out.expected = lu.solve(spec.mu);
  for (Eigen::Index i = 0; i < out.expected.size(); ++i) {
    if (out.expected(i) < 0.0) {
      out.nonnegative = false;
      out.warnings.push_back("E[L_" + std::to_string(i + 1) + "(T(1))] = " +
                             std::to_string(out.expected(i)) +
                             " < 0: model unusable for stationary estimation");
    }
  }
  return out;
}

ClosedFormMgf product_form_mgf(const ModelSpec& spec, const ProductForm& form,
                               const Vector& theta) {
  const int d = spec.d;
  Vector factor(d);
  for (int j = 0; j < d; ++j) {
    if (!(theta(j) < form.rates(j))) {
      throw DomainError("product_form_mgf: theta_j must be below the rate eta_j");
    }
    factor(j) = form.rates(j) / (form.rates(j) - theta(j));
  }
  ClosedFormMgf out;
  out.phi0 = form.interior_mass * factor.prod();
  out.phi_face.resize(d);
  out.phi = out.phi0;
  for (int i = 0; i < d; ++i) {
    double face = form.local_time_masses(i);
    for (int j = 0; j < d; ++j) {
      if (j != i) face *= factor(j);
    }
    out.phi_face(i) = face;
    out.phi += spec.stickiness(i) * face;
  }
  return out;
}

ProductForm product_form_marginals(const ModelSpec& spec) {
  const ValidationReport report = validate_model(spec);
  if (!report.stable) {
    throw PreconditionError("product_form_marginals: model is not stable");
  }
  if (!report.skew_symmetric) {
    throw PreconditionError("product_form_marginals: skew symmetry does not hold");
  }
  const int d = spec.d;
  ProductForm form;
  const Vector r_inv_mu = spec.refl.fullPivLu().solve(spec.mu);
  form.rates = -2.0 * (spec.refl.diagonal().array() / spec.sigma.diagonal().array() *
                       r_inv_mu.array()).matrix();
  if ((form.rates.array() <= 0.0).any()) {
    throw NumericalError("product_form_marginals: non-positive exponential rate");
  }
  const LocalTimeSolution lt = expected_local_times(spec);
  form.local_time_masses = lt.expected;
  form.interior_mass = 1.0 - spec.stickiness.dot(lt.expected);

  // Verify the candidate against both adjoint relations on a theta grid.
  const double scale = form.rates.minCoeff();
  const double levels[] = {0.0, -0.25, -0.5, -1.0, -2.0};
  const int per_axis = 5;
  const int grid_dims = std::min(d, 4);
  int total = 1;
  for (int i = 0; i < grid_dims; ++i) total *= per_axis;
  double worst = 0.0;
  for (int idx = 0; idx < total; ++idx) {
    Vector theta = Vector::Zero(d);
    int rest = idx;
    for (int i = 0; i < grid_dims; ++i) {
      theta(i) = levels[rest % per_axis] * scale;
      rest /= per_axis;
    }
    for (int i = grid_dims; i < d; ++i) theta(i) = theta(i % grid_dims);
    const ClosedFormMgf mgf = product_form_mgf(spec, form, theta);
    const double psi = levy_exponent(spec, theta);
    double srbm_rhs = 0.0;
    double sticky_rhs = 0.0;
    for (int i = 0; i < d; ++i) {
      const double push = theta.dot(spec.refl.col(i));
      srbm_rhs += mgf.phi_face(i) * push;
      sticky_rhs += mgf.phi_face(i) * (push - spec.stickiness(i) * psi);
    }
    const double srbm_lhs = -psi * mgf.phi0;
    const double sticky_lhs = -psi * mgf.phi;
    const double denom = std::max({1.0, std::abs(srbm_lhs), std::abs(sticky_lhs)});
    worst = std::max({worst, std::abs(srbm_lhs - srbm_rhs) / denom,
                      std::abs(sticky_lhs - sticky_rhs) / denom});
  }
  form.bar_residual = worst;
  if (worst >= 1e-9) {
    throw NumericalError("product_form_marginals: candidate product form fails the BAR check (residual " +
                         std::to_string(worst) + ")");
  }

  form.marginals.resize(d);
  for (int i = 0; i < d; ++i) {
    MarginalForm& m = form.marginals[i];
    m.exp_rate = form.rates(i);
    m.atom_mass = spec.stickiness(i) * form.local_time_masses(i);
    m.tail_mass = form.interior_mass;
    for (int j = 0; j < d; ++j) {
      if (j != i) m.tail_mass += spec.stickiness(j) * form.local_time_masses(j);
    }
  }
  return form;
}

}  // namespace stickybm
