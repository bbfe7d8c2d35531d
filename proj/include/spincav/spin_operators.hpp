#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spincav {

/// Multiplicity 2S+1 of a spin-S system. S must be a non-negative multiple
/// of 1/2 with 2S+1 >= 2.
inline int spin_multiplicity(double spin) {
  const double two_s = 2.0 * spin;
  if (!(spin > 0) || std::abs(two_s - std::round(two_s)) > 1e-12) {
    throw std::invalid_argument("spin must be a positive half-integer, got " +
                                std::to_string(spin));
  }
  return static_cast<int>(std::lround(two_s)) + 1;
}

/// m value of basis state k in the |m> basis, ordered m = S ... -S.
inline double m_of_index(double spin, int k) { return spin - k; }

struct SpinMatrices {
  Eigen::MatrixXcd sx, sy, sz, sp, sm;  // sp/sm are the ladder operators
};

/// Spin matrices in the |m> basis (m descending from S to -S), built from
/// the ladder operators: <m+1|S+|m> = sqrt(S(S+1) - m(m+1)).
inline SpinMatrices spin_operators(double spin) {
  const int n = spin_multiplicity(spin);
  SpinMatrices ops;
  ops.sp = Eigen::MatrixXcd::Zero(n, n);
  ops.sz = Eigen::MatrixXcd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double m = m_of_index(spin, k);
    ops.sz(k, k) = m;
    if (k > 0) {
      // S+ maps |m> (column k) to |m+1> (row k-1)
      ops.sp(k - 1, k) = std::sqrt(spin * (spin + 1.0) - m * (m + 1.0));
    }
  }
  ops.sm = ops.sp.adjoint();
  ops.sx = 0.5 * (ops.sp + ops.sm);
  ops.sy = std::complex<double>(0, -0.5) * (ops.sp - ops.sm);
  return ops;
}

}  // namespace spincav
