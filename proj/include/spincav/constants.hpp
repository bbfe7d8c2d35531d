#pragma once

namespace spincav::constants {

// Energies are stored as frequencies (E/h, GHz) and magnetic fields in mT
// throughout; these two constants fix the Zeeman scale.
inline constexpr double mu_bohr_over_h_GHz_per_T = 13.996245;
inline constexpr double mu_bohr_over_h_GHz_per_mT = mu_bohr_over_h_GHz_per_T * 1e-3;

// SI values (CODATA 2018) for the few places that need absolute units:
// single-spin coupling, photon number, Boltzmann factors.
inline constexpr double planck_J_s = 6.62607015e-34;
inline constexpr double boltzmann_J_per_K = 1.380649e-23;
inline constexpr double mu_bohr_J_per_T = 9.2740100783e-24;
inline constexpr double mu0_H_per_m = 1.25663706212e-6;

inline constexpr double boltzmann_over_h_GHz_per_K =
    boltzmann_J_per_K / planck_J_s / 1e9;

}  // namespace spincav::constants
