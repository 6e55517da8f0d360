#include "stickybm/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "stickybm/errors.hpp"

namespace stickybm::lp {

double game_value(const Eigen::MatrixXd& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (m == 0 || n == 0) throw ConfigError("game_value: empty matrix");

  const double shift = 1.0 - a.minCoeff();
  const Eigen::MatrixXd b = a.array() + shift;

  // Tableau for max 1'y, B'y + s = 1: n constraint rows, m + n columns + rhs.
  const Eigen::Index cols = m + n;
  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(n + 1, cols + 1);
  tab.topLeftCorner(n, m) = b.transpose();
  tab.block(0, m, n, n).setIdentity();
  tab.col(cols).head(n).setOnes();
  tab.row(n).head(m).setConstant(-1.0);

  std::vector<Eigen::Index> basis(n);
  for (Eigen::Index r = 0; r < n; ++r) basis[r] = m + r;

  constexpr double kEps = 1e-12;
  const int max_pivots = 50 * static_cast<int>(cols + n) + 100;
  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (tab(n, j) < -kEps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) {
      const double opt = tab(n, cols);
      return 1.0 / opt - shift;
    }
    Eigen::Index leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < n; ++r) {
      if (tab(r, enter) > kEps) {
        const double ratio = tab(r, cols) / tab(r, enter);
        if (ratio < best_ratio - kEps ||
            (std::abs(ratio - best_ratio) <= kEps && leave >= 0 &&
             basis[r] < basis[leave])) {
          best_ratio = ratio;
          leave = r;
        }
      }
    }
    // B > 0 keeps the packing LP bounded.
    if (leave < 0) throw NumericalError("game_value: unbounded tableau");

    tab.row(leave) /= tab(leave, enter);
    for (Eigen::Index r = 0; r <= n; ++r) {
      if (r != leave && tab(r, enter) != 0.0) {
        tab.row(r) -= tab(r, enter) * tab.row(leave);
      }
    }
    basis[leave] = enter;
  }
  throw NumericalError("game_value: simplex pivot limit reached");
}

}  // namespace stickybm::lp
