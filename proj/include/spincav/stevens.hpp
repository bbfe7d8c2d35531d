#pragma once

#include <Eigen/Dense>

#include "spincav/spin_operators.hpp"

namespace spincav {

struct StevensOperators {
  Eigen::MatrixXcd o20, o40, o60, o44, o64;
};

/// Stevens operator equivalents for the tetragonal terms used here,
/// X = S(S+1):
///   O20 = 3 Sz^2 - X
///   O40 = 35 Sz^4 - (30X - 25) Sz^2 + 3X^2 - 6X
///   O60 = 231 Sz^6 - (315X - 735) Sz^4 + (105X^2 - 525X + 294) Sz^2
///         - 5X^3 + 40X^2 - 60X
///   O44 = (S+^4 + S-^4) / 2
///   O64 = [ (11 Sz^2 - X - 38)(S+^4 + S-^4) + h.c. ] / 4
/// O44/O64 connect |m> and |m +- 4>; for 2S+1 <= 4 they vanish identically.
inline StevensOperators stevens_operators(double spin) {
  const auto ops = spin_operators(spin);
  const int n = spin_multiplicity(spin);
  const double x = spin * (spin + 1.0);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  const Eigen::MatrixXcd sz2 = ops.sz * ops.sz;
  const Eigen::MatrixXcd sz4 = sz2 * sz2;
  const Eigen::MatrixXcd sz6 = sz4 * sz2;
  const Eigen::MatrixXcd p4 =
      ops.sp * ops.sp * ops.sp * ops.sp + ops.sm * ops.sm * ops.sm * ops.sm;

  StevensOperators st;
  st.o20 = 3.0 * sz2 - x * id;
  st.o40 = 35.0 * sz4 - (30.0 * x - 25.0) * sz2 + (3.0 * x * x - 6.0 * x) * id;
  st.o60 = 231.0 * sz6 - (315.0 * x - 735.0) * sz4 +
           (105.0 * x * x - 525.0 * x + 294.0) * sz2 -
           (5.0 * x * x * x - 40.0 * x * x + 60.0 * x) * id;
  st.o44 = 0.5 * p4;
  const Eigen::MatrixXcd q = 11.0 * sz2 - (x + 38.0) * id;
  st.o64 = 0.25 * (q * p4 + p4 * q);
  return st;
}

}  // namespace spincav
