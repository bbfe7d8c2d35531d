// Sweep the probe frequency across a mode coupled to a spin line and print
// the transmission doublet.

#include <cstdio>

#include "spincav/cavity.hpp"

int main() {
  spincav::CavityMode mode{"WGH311", 9.45, 5e-6, 2e-5, 0.7177};
  spincav::SpinBath bath{9.45, 1e-3, 2.6e-3};  // on resonance, 2.6 MHz ensemble

  for (int k = -10; k <= 10; ++k) {
    const double f = mode.f0_GHz + k * 5e-4;
    const double mag = std::abs(spincav::s21(f, mode, bath));
    std::printf("f = %.6f GHz  |S21| = %.4g\n", f, mag);
  }
  return 0;
}
