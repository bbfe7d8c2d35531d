#pragma once

#include <cmath>
#include <complex>
#include <string>

#include "spincav/constants.hpp"
#include "spincav/errors.hpp"

namespace spincav {

/// One whispering-gallery mode. All rates are ordinary frequencies in GHz;
/// no 2*pi factors appear in the line-shape formulas.
struct CavityMode {
  std::string label;
  double f0_GHz = 0.0;       // resonance
  double kappa_c_GHz = 0.0;  // probe coupling
  double gamma_d_GHz = 0.0;  // dielectric loss
  double beta = 1.0;         // magnetic filling factor

  void validate() const {
    if (!(f0_GHz > 0)) throw ConfigError("mode " + label + ": f0_GHz must be > 0");
    if (!(kappa_c_GHz > 0))
      throw ConfigError("mode " + label + ": kappa_c_GHz must be > 0");
    if (!(gamma_d_GHz > 0))
      throw ConfigError("mode " + label + ": gamma_d_GHz must be > 0");
    if (!(beta > 0) || beta > 1.0)
      throw ConfigError("mode " + label + ": beta must be in (0, 1]");
  }
};

/// Cylindrical host crystal.
struct CrystalSpec {
  double diameter_mm = 0.0;
  double height_mm = 0.0;
  double mu_r = 1.0;

  double volume_cm3() const {
    const double r_cm = 0.05 * diameter_mm;
    return M_PI * r_cm * r_cm * (0.1 * height_mm);
  }

  void validate() const {
    if (!(diameter_mm > 0) || !(height_mm > 0))
      throw ConfigError("crystal dimensions must be > 0");
    if (!(mu_r > 0)) throw ConfigError("crystal mu_r must be > 0");
  }
};

struct SpinBath {
  double f_s_GHz = 0.0;     // spin transition frequency at the working field
  double gamma_s_GHz = 0.0; // spin linewidth
  double g_eff_GHz = 0.0;   // ensemble coupling
};

/// Coupling of a single spin to the mode,
///   g0 = (g muB / 2h) sqrt(h f0 mu beta / 2V),
/// evaluated in SI units and returned in GHz.
inline double single_spin_coupling_GHz(double g_factor, const CavityMode& mode,
                                       const CrystalSpec& crystal) {
  mode.validate();
  crystal.validate();
  namespace c = constants;
  const double v_m3 = crystal.volume_cm3() * 1e-6;
  const double mu = c::mu0_H_per_m * crystal.mu_r;
  const double g0_Hz =
      g_factor * c::mu_bohr_J_per_T / (2.0 * c::planck_J_s) *
      std::sqrt(c::planck_J_s * mode.f0_GHz * 1e9 * mu * mode.beta /
                (2.0 * v_m3));
  return g0_Hz * 1e-9;
}

/// Ensemble coupling g0 sqrt(N) for N spins in the probed level.
inline double effective_coupling(double g0_GHz, double n_spins) {
  if (n_spins < 0) throw std::invalid_argument("spin count must be >= 0");
  return g0_GHz * std::sqrt(n_spins);
}

/// Complex cavity transmission
///   S21(f) = kc / [ (kc + gd/2) - i(f - f0) + g^2 / (gs/2 - i(f - fs)) ].
inline std::complex<double> s21(double f_GHz, const CavityMode& mode,
                                const SpinBath& bath) {
  if (!(bath.gamma_s_GHz > 0))
    throw std::invalid_argument("gamma_s must be > 0");
  const std::complex<double> i(0.0, 1.0);
  std::complex<double> denom = mode.kappa_c_GHz + 0.5 * mode.gamma_d_GHz -
                               i * (f_GHz - mode.f0_GHz);
  denom += bath.g_eff_GHz * bath.g_eff_GHz /
           (0.5 * bath.gamma_s_GHz - i * (f_GHz - bath.f_s_GHz));
  return mode.kappa_c_GHz / denom;
}

/// On-resonance transmission with the probe tuned to the spin line
/// (f = f0 = fs): kc / (kc + gd/2 + 2 g0^2 N / gs).
inline double s21_resonance(const CavityMode& mode, double g0_GHz,
                            double gamma_s_GHz, double n_upper) {
  if (!(gamma_s_GHz > 0)) throw std::invalid_argument("gamma_s must be > 0");
  return mode.kappa_c_GHz /
         (mode.kappa_c_GHz + 0.5 * mode.gamma_d_GHz +
          2.0 * g0_GHz * g0_GHz * n_upper / gamma_s_GHz);
}

/// Invert s21_resonance back to the occupation of the probed level.
inline double resonance_population(double s21_value, const CavityMode& mode,
                                   double g0_GHz, double gamma_s_GHz) {
  if (!(s21_value > 0)) throw DataError("transmission must be > 0 to invert");
  const double spin_term = mode.kappa_c_GHz / s21_value - mode.kappa_c_GHz -
                           0.5 * mode.gamma_d_GHz;
  return spin_term * gamma_s_GHz / (2.0 * g0_GHz * g0_GHz);
}

/// Steady-state photon number of a cavity driven on resonance with incident
/// power P. Rates converted to angular units: with ktot = 2 kc + gd,
///   N_cav = 4 kc_ang P / (h f0 ktot_ang^2).
inline double photon_number(double p_inc_W, const CavityMode& mode) {
  if (p_inc_W < 0) throw std::invalid_argument("incident power must be >= 0");
  namespace c = constants;
  const double two_pi = 2.0 * M_PI;
  const double kc = two_pi * mode.kappa_c_GHz * 1e9;
  const double ktot = two_pi * (2.0 * mode.kappa_c_GHz + mode.gamma_d_GHz) * 1e9;
  return 4.0 * kc * p_inc_W / (c::planck_J_s * mode.f0_GHz * 1e9 * ktot * ktot);
}

/// Spin concentration from a measured ensemble coupling: n = g^2 / (g0^2 V),
/// in cm^-3 when V is in cm^3.
inline double concentration_per_cm3(double g_meas_GHz, double g0_GHz,
                                    const CrystalSpec& crystal) {
  if (!(g0_GHz > 0)) throw std::invalid_argument("g0 must be > 0");
  return g_meas_GHz * g_meas_GHz / (g0_GHz * g0_GHz * crystal.volume_cm3());
}

}  // namespace spincav
