#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stickybm/model.hpp"
#include "stickybm/pipeline.hpp"
#include "stickybm/sticky.hpp"

namespace stickybm {

/// Samples on a face sit at exactly zero; the default threshold only has to
/// absorb rounding.
inline constexpr double kDefaultAtomEpsilon = 1e-9;

struct DistOptions {
  double atom_epsilon = kDefaultAtomEpsilon;
  int survival_points = 64;
};

struct SurvivalTable {
  std::vector<double> thresholds;  // log-spaced, increasing
  std::vector<double> survival;    // P(Z_i > threshold)
};

/// Time-weighted empirical law pooled across replicas.
class EmpiricalDist {
 public:
  EmpiricalDist() = default;
  /// `states` row-major; weights are normalized here. `replica` labels each
  /// sample for the jackknife and may be empty (single group).
  EmpiricalDist(int d, std::vector<double> states, std::vector<double> weights,
                std::vector<int> replica, const DistOptions& options = {});

  int dim() const { return d_; }
  std::size_t size() const { return weights_.size(); }
  int replica_count() const { return replicas_; }
  std::span<const double> state(std::size_t n) const {
    return {states_.data() + n * d_, static_cast<std::size_t>(d_)};
  }
  const std::vector<double>& states() const { return states_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<int>& replica_ids() const { return replica_; }
  double weight(std::size_t n) const { return weights_[n]; }
  int replica(std::size_t n) const { return replica_.empty() ? 0 : replica_[n]; }

  double atom_epsilon() const { return atom_epsilon_; }
  /// Per coordinate: mass of {z_i < atom_epsilon}.
  const Vector& atom_estimates() const { return atoms_; }
  const std::vector<SurvivalTable>& survival_tables() const { return tables_; }

  double survival_gt(int i, double x) const;  // P(Z_i > x)
  double survival_ge(int i, double x) const;  // P(Z_i >= x)
  /// Smallest sample value x with P(Z_i <= x) >= p.
  double quantile(int i, double p) const;
  /// P(Z >= z componentwise).
  double joint_survival_ge(std::span<const double> z) const;
  const std::vector<double>& sorted_marginal(int i) const { return sorted_[i]; }

 private:
  int d_ = 0;
  int replicas_ = 1;
  double atom_epsilon_ = kDefaultAtomEpsilon;
  std::vector<double> states_;
  std::vector<double> weights_;
  std::vector<int> replica_;
  Vector atoms_;
  std::vector<SurvivalTable> tables_;
  std::vector<std::vector<double>> sorted_;
  std::vector<std::vector<double>> suffix_;  // suffix_[i][k] = weight of sorted_[i][k..]
};

/// Pools sticky-grid samples with s >= burn_in. Throws DataStarvedError when
/// nothing survives the burn-in.
EmpiricalDist estimate_stationary(std::span<const StickyPath> paths, double burn_in,
                                  const DistOptions& options = {});
EmpiricalDist estimate_stationary(std::span<const ReplicaOutput> replicas,
                                  const DistOptions& options = {});

/// Samples with z_i > threshold, reweighted to a probability law.
EmpiricalDist condition_above(const EmpiricalDist& dist, int i, double threshold);

struct MgfPoint {
  Vector theta;
  double phi = 0.0;
  double phi_se = 0.0;
  double phi0 = 0.0;
  double phi0_se = 0.0;
  Vector phi_face;
  Vector phi_face_se;
};

struct MgfEstimate {
  int d = 0;
  bool has_phi = false;
  bool has_boundary = false;
  double v0_mass = 0.0;
  Vector v_masses;
  std::vector<MgfPoint> points;
};

/// Phi from the pooled law; Phi0 and Phi_i from the boundary measures (one per
/// replica, or none). Standard errors are jackknife over replicas. Throws
/// DomainError for a theta with a positive component.
MgfEstimate empirical_mgf(const EmpiricalDist& dist, std::span<const BoundaryMeasures> boundary,
                          const std::vector<Vector>& theta_grid);

/// Boundary MGFs only (no pooled law), e.g. for the reflected-process identity.
MgfEstimate boundary_mgf(int d, std::span<const BoundaryMeasures> boundary,
                         const std::vector<Vector>& theta_grid);

/// Exact MGFs of a skew-symmetric model; standard errors are zero.
MgfEstimate closed_form_mgf(const ModelSpec& spec, const ProductForm& form,
                            const std::vector<Vector>& theta_grid);

enum class BarMode { kSticky, kSrbm };

struct BarRecord {
  Vector theta;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_resid = 0.0;
  double rel_resid = 0.0;
};

struct BarReport {
  BarMode mode = BarMode::kSticky;
  std::vector<BarRecord> records;
  double max_abs_resid = 0.0;
  double max_rel_resid = 0.0;
  std::size_t worst_index = 0;
};

/// Sticky: -Psi(theta) Phi = sum_i Phi_i (<theta, R_i> - u_i Psi(theta)).
/// Reflected: -Psi(theta) Phi0 = sum_i Phi_i <theta, R_i>.
/// Throws PreconditionError if the estimate lacks the needed components.
BarReport bar_residual(const ModelSpec& spec, const MgfEstimate& mgf, BarMode mode);

struct MassIdentityReport {
  Vector expected_v;
  double expected_v0 = 0.0;
  Vector simulated_v;
  double simulated_v0 = 0.0;
  Vector rel_error_v;
  double rel_error_v0 = 0.0;
  double clock_identity_residual = 0.0;  // v0 + sum u_i v_i - 1
  bool expected_nonnegative = true;
};

MassIdentityReport mass_identity_check(const ModelSpec& spec, double v0_mass,
                                       const Vector& v_masses);

/// Window-length weighted pooling of per-replica measures (masses only).
BoundaryMeasures pool_boundary_masses(std::span<const BoundaryMeasures> boundary);

struct DecompositionCheck {
  Vector box;  // B = prod [0, b_i]
  double pi_mass = 0.0;
  double decomposed_mass = 0.0;  // V0(B) + sum u_i V_i(B)
  double difference = 0.0;
  double se = 0.0;
  bool consistent = false;  // |difference| <= 3 se (or tiny)
};

/// Compares the pooled law with V0 + sum u_i V_i on a box. Needs one
/// BoundaryMeasures per replica with replica ids matching the law.
DecompositionCheck decomposition_check(const EmpiricalDist& dist,
                                       std::span<const BoundaryMeasures> boundary,
                                       const Vector& u, const Vector& box);

}  // namespace stickybm
