#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stickybm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Problem data of a sticky Brownian motion on the nonnegative orthant:
/// driving Brownian motion (sigma, mu), reflection matrix R and the
/// stickiness vector u that enters the clock S(t) = t + sum_i u_i L_i(t).
struct ModelSpec {
  int d = 0;
  Matrix sigma;       // covariance per unit time
  Vector mu;          // drift per unit time
  Matrix refl;        // column i is the push direction on face {x_i = 0}
  Vector stickiness;  // u_i >= 0, time per unit local time
};

/// Throws ConfigError when shapes disagree with d, an entry is not finite,
/// or a stickiness entry is negative.
void require_well_formed(const ModelSpec& spec);

struct Tolerances {
  double matrix = 1e-9;
  double symmetry = 1e-10;
  double eigen_floor = 1e-10;
};

struct ValidationReport {
  bool spd_ok = false;
  bool completely_s_ok = false;
  bool m_matrix = false;
  bool stable = false;  // R nonsingular and R^{-1} mu < 0
  bool skew_symmetric = false;
  std::vector<std::string> messages;

  /// Hypotheses needed to simulate and to expect a stationary law.
  bool usable() const { return spd_ok && completely_s_ok && stable; }
};

ValidationReport validate_model(const ModelSpec& spec, const Tolerances& tol = {});

/// Largest dimension accepted by is_completely_s (2^d - 1 submatrices).
inline constexpr int kMaxCompletelySDim = 16;

/// Every principal submatrix admits x >= 0 with R~ x > 0.
bool is_completely_s(const Matrix& refl);

bool is_m_matrix(const Matrix& refl, double tol = 1e-12);

/// Psi(theta) = <theta, mu> + 1/2 <theta, Sigma theta>.
double levy_exponent(const ModelSpec& spec, const Vector& theta);

struct SkewCheck {
  bool holds = false;
  double residual = 0.0;
};

/// Max-abs entry of 2 Sigma - (R D_R^{-1} D_Sigma + D_Sigma D_R^{-1} R').
SkewCheck check_skew_symmetry(const ModelSpec& spec, double tol = 1e-9);

enum class CrossBlockForm {
  kLiteral,    // 2 Sigma^{LK} = R^{LK} D_{R^{KK}} D_{R^{KK}}^{-1}  (= R^{LK})
  kCorrected,  // 2 Sigma^{LK} = R^{LK} D_{R^{KK}}^{-1} D_{Sigma^{KK}}
};

struct DecomposabilityCheck {
  bool holds = false;
  double block_residual = 0.0;  // skew symmetry restricted to (K, K)
  double cross_residual = 0.0;  // the (L, K) condition
};

/// Indices are zero-based; (K, L) must partition {0, ..., d-1}.
DecomposabilityCheck check_decomposability(const ModelSpec& spec,
                                           std::span<const int> k_set,
                                           std::span<const int> l_set,
                                           CrossBlockForm form,
                                           double tol = 1e-9);

struct LocalTimeSolution {
  Vector expected;  // E[L_i(T(1))]
  double condition_estimate = 0.0;
  bool nonnegative = true;
  std::vector<std::string> warnings;
};

/// Solves (mu u' - R) L = mu for the expected local times per unit sticky
/// time (u = 0 gives the SRBM rates -R^{-1} mu). Negative entries are
/// reported as warnings, not errors.
LocalTimeSolution expected_local_times(const ModelSpec& spec);

struct MarginalForm {
  double atom_mass = 0.0;  // pi{x_i = 0}
  double exp_rate = 0.0;   // rate of the exponential part
  double tail_mass = 0.0;  // pi{x_i > 0}
};

/// Stationary structure of a skew-symmetric model: the SRBM part is a product
/// of exponentials with rates eta, and the sticky law is
/// pi = V0 + sum_i u_i V_i with V_i supported on face i.
struct ProductForm {
  Vector rates;
  Vector local_time_masses;  // E[L_i(T(1))]
  double interior_mass = 0.0;  // E[T(1)] = V0 total mass
  std::vector<MarginalForm> marginals;
  double bar_residual = 0.0;  // worst check residual on the verification grid
};

/// Throws PreconditionError unless the model is stable and skew symmetric,
/// and NumericalError if the candidate fails the BAR verification.
ProductForm product_form_marginals(const ModelSpec& spec);

struct ClosedFormMgf {
  double phi = 0.0;
  double phi0 = 0.0;
  Vector phi_face;
};

/// Moment generating functions of pi, V0 and V_i implied by a product form.
ClosedFormMgf product_form_mgf(const ModelSpec& spec, const ProductForm& form,
                               const Vector& theta);

}  // namespace stickybm
