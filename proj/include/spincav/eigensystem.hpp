#pragma once

#include <Eigen/Dense>

#include "spincav/errors.hpp"

namespace spincav {

inline bool is_hermitian(const Eigen::MatrixXcd& h, double rel_tol = 1e-12) {
  if (h.rows() != h.cols()) return false;
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  return (h - h.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

struct EigenSystem {
  Eigen::VectorXd values;    // ascending
  Eigen::MatrixXcd vectors;  // columns, orthonormal
};

/// Eigendecomposition of a Hermitian matrix; rejects non-Hermitian input.
inline EigenSystem eigensystem(const Eigen::MatrixXcd& h) {
  if (!is_hermitian(h))
    throw std::invalid_argument("eigensystem: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  if (solver.info() != Eigen::Success)
    throw NumericsError("eigensystem: solver failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace spincav
