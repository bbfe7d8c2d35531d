#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "spincav/constants.hpp"
#include "spincav/errors.hpp"
#include "spincav/spin_operators.hpp"
#include "spincav/stevens.hpp"

namespace spincav {

/// Crystal-field coefficients in GHz multiplying the Stevens operator
/// matrices directly (H_cf/h = b20 O20 + b40 O40 + b60 O60 + b44 O44 + b64 O64).
struct StevensCoefficients {
  double b20 = 0.0;
  double b40 = 0.0;
  double b60 = 0.0;
  double b44 = 0.0;
  double b64 = 0.0;
};

/// A spin-S ion in a tetragonal crystal field with the DC field tilted by
/// tilt_rad from the crystal c-axis (tilt taken in the x-z plane).
struct SpinSystem {
  double spin = 3.5;
  double g_factor = 1.99;
  StevensCoefficients cf;
  double tilt_rad = 0.0;

  int dim() const { return spin_multiplicity(spin); }

  void validate() const {
    spin_multiplicity(spin);  // throws on non-half-integer
    if (!(g_factor > 0)) throw ConfigError("g_factor must be > 0");
    if (!(tilt_rad >= 0.0) || tilt_rad >= 1.5707963267948966)
      throw ConfigError("tilt_rad must satisfy 0 <= tilt < pi/2");
    for (double b : {cf.b20, cf.b40, cf.b60, cf.b44, cf.b64})
      if (!std::isfinite(b))
        throw ConfigError("crystal-field coefficients must be finite");
  }
};

/// H/h in GHz at field b_mT:
///   H = sum_kq b_kq O_kq + g muB/h * B * (cos(tilt) Sz + sin(tilt) Sx)
inline Eigen::MatrixXcd hamiltonian(const SpinSystem& sys, double b_mT) {
  if (!std::isfinite(b_mT)) throw std::invalid_argument("field must be finite");
  const auto ops = spin_operators(sys.spin);
  const auto st = stevens_operators(sys.spin);
  const double zeeman =
      sys.g_factor * constants::mu_bohr_over_h_GHz_per_mT * b_mT;
  Eigen::MatrixXcd h = sys.cf.b20 * st.o20 + sys.cf.b40 * st.o40 +
                       sys.cf.b60 * st.o60 + sys.cf.b44 * st.o44 +
                       sys.cf.b64 * st.o64;
  h += zeeman * (std::cos(sys.tilt_rad) * ops.sz +
                 std::sin(sys.tilt_rad) * ops.sx);
  return h;
}

}  // namespace spincav
