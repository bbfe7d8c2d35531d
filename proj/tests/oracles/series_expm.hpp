#pragma once

// Independent matrix exponential: plain truncated Taylor series (k <= 30)
// with scaling-and-squaring down to ||A|| <= 0.5.

#include <Eigen/Dense>

namespace oracles {

inline Eigen::MatrixXd series_expm(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm > 0.5) {
    a *= 0.5;
    norm *= 0.5;
    ++squarings;
  }
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = (term * a / double(k)).eval();
    result += term;
  }
  for (int k = 0; k < squarings; ++k) result = (result * result).eval();
  return result;
}

}  // namespace oracles
