#pragma once

#include <Eigen/Dense>

namespace stickybm::lp {

/// Value of the zero-sum matrix game max_{x in simplex} min_i (A x)_i.
///
/// Positive iff some x >= 0 has A x > 0 componentwise (the S-matrix
/// property). Solved exactly with a dense tableau simplex on the shifted
/// packing LP  max 1'y  s.t.  B'y <= 1, y >= 0  where B = A + c > 0, using
/// 1 / opt = value(B) = value(A) + c. Bland's rule rules out cycling.
double game_value(const Eigen::MatrixXd& a);

}  // namespace stickybm::lp
