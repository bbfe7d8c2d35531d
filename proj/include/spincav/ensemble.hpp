#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "spincav/constants.hpp"
#include "spincav/errors.hpp"
#include "spincav/level_diagram.hpp"
#include "spincav/spectra.hpp"

namespace spincav {

/// Occupation numbers per level, indexed like the |m> basis (m = S ... -S).
struct PopulationVector {
  double spin = 0.0;
  Eigen::VectorXd counts;
  double total = 0.0;

  void validate() const {
    double sum = 0.0;
    for (int k = 0; k < counts.size(); ++k) {
      if (counts(k) < -1e-9 * std::max(total, 1.0))
        throw NumericsError("negative level population");
      sum += counts(k);
    }
    if (std::abs(sum - total) > 1e-9 * std::max(total, 1.0))
      throw NumericsError("population sum drifted from total");
  }
};

/// Thermal occupation of the given levels: counts_i ~ exp(-E_i / (kB T / h)),
/// energies shifted so the minimum is zero before exponentiating.
inline PopulationVector boltzmann(const Eigen::VectorXd& energies_GHz,
                                  double temperature_K, double n_total) {
  if (!(temperature_K > 0)) throw std::invalid_argument("temperature must be > 0");
  const double kt_GHz =
      constants::boltzmann_over_h_GHz_per_K * temperature_K;
  const double e_min = energies_GHz.minCoeff();
  Eigen::VectorXd w = (-(energies_GHz.array() - e_min) / kt_GHz).exp();
  PopulationVector pop;
  pop.counts = n_total * w / w.sum();
  pop.total = n_total;
  return pop;
}

/// Zero-field thermal state transported unchanged along the adiabatic
/// branches: Boltzmann over the zero-field levels with degenerate groups
/// sharing equally, indexed by the dominant |m> of each zero-field state.
inline PopulationVector frozen_state(const SpinSystem& sys,
                                     double temperature_K, double n_total) {
  EigenSystem es = eigensystem(hamiltonian(sys, 0.0));
  detail::align_degenerate(es);
  PopulationVector pop = boltzmann(es.values, temperature_K, n_total);
  // equal sharing within degenerate groups
  const int n = static_cast<int>(es.values.size());
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && es.values(j + 1) - es.values(i) < 1e-6) ++j;
    if (j > i) {
      const double share = pop.counts.segment(i, j - i + 1).mean();
      pop.counts.segment(i, j - i + 1).setConstant(share);
    }
    i = j + 1;
  }
  // reindex by dominant basis component
  Eigen::VectorXd by_label = Eigen::VectorXd::Zero(n);
  std::vector<bool> used(n, false);
  for (int k = 0; k < n; ++k) {
    int dom = 0;
    double best = -1.0;
    for (int r = 0; r < n; ++r) {
      const double w = std::norm(es.vectors(r, k));
      if (!used[r] && w > best) { best = w; dom = r; }
    }
    used[dom] = true;
    by_label(dom) = pop.counts(k);
  }
  pop.counts = by_label;
  pop.spin = sys.spin;
  return pop;
}

/// Diabatic Landau-Zener jump probability for a crossing with coupling g_lz
/// (GHz), relative diabatic slope dE/dB (GHz/mT) and sweep rate (mT/min):
///   P = exp( -(2 pi)^2 g^2 / (s r) )   with g in Hz, s in Hz/mT, r in mT/s.
/// The (2 pi)^2 factor comes from rewriting the standard form
/// P = exp(-2 pi a^2 / (hbar |alpha|)), a = h g, alpha = h s r, in ordinary
/// frequency units (see docs/models.md for the derivation).
inline double lz_probability(double g_lz_GHz, double dEdB_GHz_per_mT,
                             double rate_mT_per_min) {
  if (!(rate_mT_per_min > 0))
    throw std::invalid_argument("sweep rate must be > 0");
  if (dEdB_GHz_per_mT == 0.0)
    throw std::invalid_argument("diabatic slope must be nonzero");
  const double g_Hz = g_lz_GHz * 1e9;
  const double slope_Hz_mT = std::abs(dEdB_GHz_per_mT) * 1e9;
  const double rate_mT_s = rate_mT_per_min / 60.0;
  const double two_pi = 2.0 * M_PI;
  return std::exp(-two_pi * two_pi * g_Hz * g_Hz /
                  (slope_Hz_mT * rate_mT_s));
}

inline double lz_probability(const AvoidedCrossing& alc,
                             double dEdB_GHz_per_mT, double rate_mT_per_min) {
  return lz_probability(alc.g_lz_GHz, dEdB_GHz_per_mT, rate_mT_per_min);
}

struct SweepProtocol {
  double b_start_mT = 0.0;
  double b_turn_mT = 100.0;
  double b_end_mT = 43.0;
  double rate_mT_per_min = 2.0;
  double temperature_K = 0.020;
  // single-photon relaxations applied instantaneously, as (2m from, 2m to)
  std::vector<std::pair<int, int>> relax_fast;

  void validate() const {
    if (!(rate_mT_per_min > 0)) throw ConfigError("protocol rate must be > 0");
    if (b_start_mT > b_turn_mT || b_end_mT > b_turn_mT)
      throw ConfigError("protocol requires b_start <= b_turn and b_end <= b_turn");
    for (const auto& [from, to] : relax_fast)
      if (std::abs(from - to) != 2)
        throw ConfigError("relax_fast entries must be single-photon (|dm| = 1): " +
                          label_name(from) + ">" + label_name(to));
  }
};

struct LZEvent {
  int twom_a = 0, twom_b = 0;
  double b_c_mT = 0.0;
  double gap_GHz = 0.0;
  double g_lz_GHz = 0.0;
  double slope_GHz_per_mT = 0.0;
  double p_diabatic = 1.0;
};

struct SweepResult {
  std::vector<double> b_mT;     // trajectory sample fields (up then down)
  Eigen::MatrixXd fractions;    // (sample, level) occupation / total
  std::vector<LZEvent> events;  // in traversal order
  PopulationVector final_state;
};

namespace detail {

// Label-resolved ("diabatic") energies: at each grid point assign basis
// labels to branches by greedy maximum weight, so each label follows the
// eigenvalue of whichever branch currently carries its character.
inline Eigen::MatrixXd label_energies(const LevelDiagram& dia) {
  const int n = dia.branches();
  Eigen::MatrixXd out(dia.b_grid.size(), n);
  for (std::size_t p = 0; p < dia.b_grid.size(); ++p) {
    Eigen::MatrixXd weight(n, n);  // (branch, basis index)
    for (int k = 0; k < n; ++k)
      for (int r = 0; r < n; ++r)
        weight(k, r) = std::norm(dia.states[p](r, k));
    std::vector<int> branch_of_label(n, -1);
    std::vector<bool> branch_used(n, false);
    for (int pass = 0; pass < n; ++pass) {
      double best = -1.0;
      int bk = 0, br = 0;
      for (int k = 0; k < n; ++k) {
        if (branch_used[k]) continue;
        for (int r = 0; r < n; ++r) {
          if (branch_of_label[r] >= 0) continue;
          if (weight(k, r) > best) { best = weight(k, r); bk = k; br = r; }
        }
      }
      branch_used[bk] = true;
      branch_of_label[br] = bk;
    }
    for (int r = 0; r < n; ++r)
      out(p, r) = dia.energies(p, branch_of_label[r]);
  }
  return out;
}

// Least-squares slope of y over the grid points with b in [lo, hi].
inline double window_slope(const std::vector<double>& b,
                           const Eigen::VectorXd& y, double lo, double hi) {
  double sb = 0, sy = 0, sbb = 0, sby = 0;
  int n = 0;
  for (std::size_t p = 0; p < b.size(); ++p) {
    if (b[p] < lo || b[p] > hi) continue;
    sb += b[p]; sy += y(p); sbb += b[p] * b[p]; sby += b[p] * y(p);
    ++n;
  }
  if (n < 2) throw NumericsError("slope window contains fewer than 2 grid points");
  return (n * sby - sb * sy) / (n * sbb - sb * sb);
}

}  // namespace detail

/// Relative diabatic slope |d(E_a - E_b)/dB| at an ALC, from linear fits of
/// the label-resolved energy difference over [bc - w_hi, bc - w_lo] and
/// [bc + w_lo, bc + w_hi] (both sides averaged).
inline double diabatic_slope(const LevelDiagram& dia, int twom_a, int twom_b,
                             double b_c_mT, double window_lo_mT = 2.0,
                             double window_hi_mT = 5.0) {
  const Eigen::MatrixXd led = detail::label_energies(dia);
  const int n = dia.branches();
  const int two_s = static_cast<int>(std::lround(2.0 * dia.spin));
  const int ia = (two_s - twom_a) / 2;
  const int ib = (two_s - twom_b) / 2;
  if (ia < 0 || ia >= n || ib < 0 || ib >= n)
    throw DataError("diabatic_slope: label outside basis");
  const Eigen::VectorXd diff = led.col(ia) - led.col(ib);
  const double below = detail::window_slope(dia.b_grid, diff,
                                            b_c_mT - window_hi_mT,
                                            b_c_mT - window_lo_mT);
  const double above = detail::window_slope(dia.b_grid, diff,
                                            b_c_mT + window_lo_mT,
                                            b_c_mT + window_hi_mT);
  return 0.5 * (std::abs(below) + std::abs(above));
}

namespace detail {

struct CrossingCandidate {
  int label_a, label_b;  // basis indices
  double b_lo, b_hi;     // bracketing fields
};

inline std::vector<CrossingCandidate> scan_crossings(
    const LevelDiagram& dia, const Eigen::MatrixXd& led, double lo, double hi) {
  std::vector<CrossingCandidate> out;
  const int n = dia.branches();
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (std::size_t p = 1; p + 1 < dia.b_grid.size(); ++p) {
        if (dia.b_grid[p] < lo || dia.b_grid[p + 1] > hi) continue;
        const double d0 = led(p, a) - led(p, b);
        const double d1 = led(p + 1, a) - led(p + 1, b);
        if (d0 * d1 < 0.0)
          out.push_back({a, b, dia.b_grid[p], dia.b_grid[p + 1]});
      }
    }
  }
  return out;
}

inline void apply_relaxation(PopulationVector& pop, double spin,
                             const std::vector<std::pair<int, int>>& rules) {
  const int two_s = static_cast<int>(std::lround(2.0 * spin));
  for (std::size_t pass = 0; pass <= rules.size(); ++pass) {
    bool moved = false;
    for (const auto& [from, to] : rules) {
      const int i_from = (two_s - from) / 2;
      const int i_to = (two_s - to) / 2;
      if (pop.counts(i_from) > 0.0) {
        pop.counts(i_to) += pop.counts(i_from);
        pop.counts(i_from) = 0.0;
        moved = true;
      }
    }
    if (!moved) break;
  }
}

}  // namespace detail

/// Transport a population through the field protocol. Populations ride the
/// diabatic labels; each avoided crossing acts as a probabilistic splitter
/// (fraction P_diabatic keeps its label, 1 - P_diabatic follows the
/// adiabatic branch and swaps), and relax_fast decays fire instantly.
inline SweepResult run_sweep(const SpinSystem& sys,
                             const SweepProtocol& protocol,
                             const PopulationVector& initial,
                             double grid_step_mT = 0.1,
                             double slope_window_lo_mT = 2.0,
                             double slope_window_hi_mT = 5.0) {
  protocol.validate();
  initial.validate();

  const double b_min =
      std::min({protocol.b_start_mT, protocol.b_end_mT, 0.0});
  const double b_max = protocol.b_turn_mT + 2.0 * slope_window_hi_mT;
  const std::size_t npts =
      static_cast<std::size_t>(std::ceil((b_max - b_min) / grid_step_mT)) + 1;
  const LevelDiagram dia =
      sweep_levels(sys, linspace(b_min, b_max, std::max<std::size_t>(npts, 2)));
  const Eigen::MatrixXd led = detail::label_energies(dia);
  const int n = dia.branches();
  const int two_s = static_cast<int>(std::lround(2.0 * sys.spin));

  PopulationVector pop = initial;
  pop.spin = sys.spin;
  detail::apply_relaxation(pop, sys.spin, protocol.relax_fast);

  SweepResult result;

  // resolve candidates to events once; both legs share the field axis
  struct ResolvedEvent { LZEvent ev; int ia, ib; };
  std::vector<ResolvedEvent> table;
  for (const auto& cand :
       detail::scan_crossings(dia, led, b_min, protocol.b_turn_mT)) {
    const int twom_a = two_s - 2 * cand.label_a;
    const int twom_b = two_s - 2 * cand.label_b;
    const double margin = 3.0;
    AvoidedCrossing alc;
    try {
      alc = find_alc(dia, twom_a, twom_b,
                     std::max(b_min, cand.b_lo - margin),
                     std::min(b_max, cand.b_hi + margin));
    } catch (const NoCrossingError&) {
      continue;  // shallow character exchange without a gap minimum
    }
    ResolvedEvent re;
    re.ia = cand.label_a;
    re.ib = cand.label_b;
    re.ev.twom_a = twom_a;
    re.ev.twom_b = twom_b;
    re.ev.b_c_mT = alc.b_c_mT;
    re.ev.gap_GHz = alc.gap_GHz;
    re.ev.g_lz_GHz = alc.g_lz_GHz;
    re.ev.slope_GHz_per_mT = diabatic_slope(
        dia, twom_a, twom_b, alc.b_c_mT, slope_window_lo_mT, slope_window_hi_mT);
    re.ev.p_diabatic = lz_probability(re.ev.g_lz_GHz, re.ev.slope_GHz_per_mT,
                                      protocol.rate_mT_per_min);
    table.push_back(re);
  }

  std::vector<std::pair<double, Eigen::VectorXd>> rows;
  auto record = [&](double b) {
    rows.emplace_back(b, pop.counts / pop.total);
  };

  auto run_leg = [&](double from, double to, bool record_start) {
    const bool up = to > from;
    std::vector<ResolvedEvent> leg;
    for (const auto& re : table) {
      const double bc = re.ev.b_c_mT;
      if (bc > std::min(from, to) && bc < std::max(from, to)) leg.push_back(re);
    }
    std::sort(leg.begin(), leg.end(), [up](const auto& x, const auto& y) {
      return up ? x.ev.b_c_mT < y.ev.b_c_mT : x.ev.b_c_mT > y.ev.b_c_mT;
    });

    auto sample_open = [&](double lo, double hi) {
      for (std::size_t p = 0; p < dia.b_grid.size(); ++p) {
        const double b = dia.b_grid[up ? p : dia.b_grid.size() - 1 - p];
        if (b <= std::min(lo, hi) || b >= std::max(lo, hi)) continue;
        record(b);
      }
    };

    if (record_start) record(from);
    double cursor = from;
    for (const auto& re : leg) {
      sample_open(cursor, re.ev.b_c_mT);
      const double p_d = re.ev.p_diabatic;
      const double na = pop.counts(re.ia);
      const double nb = pop.counts(re.ib);
      pop.counts(re.ia) = p_d * na + (1.0 - p_d) * nb;
      pop.counts(re.ib) = (1.0 - p_d) * na + p_d * nb;
      detail::apply_relaxation(pop, sys.spin, protocol.relax_fast);
      result.events.push_back(re.ev);
      record(re.ev.b_c_mT);
      cursor = re.ev.b_c_mT;
    }
    sample_open(cursor, to);
    record(to);
  };

  bool first = true;
  if (protocol.b_turn_mT > protocol.b_start_mT) {
    run_leg(protocol.b_start_mT, protocol.b_turn_mT, first);
    first = false;
  }
  if (protocol.b_end_mT < protocol.b_turn_mT)
    run_leg(protocol.b_turn_mT, protocol.b_end_mT, first);
  if (rows.empty()) record(protocol.b_start_mT);

  result.b_mT.resize(rows.size());
  result.fractions.resize(rows.size(), n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    result.b_mT[r] = rows[r].first;
    result.fractions.row(r) = rows[r].second.transpose();
  }

  pop.validate();
  result.final_state = pop;
  return result;
}

struct Probe {
  int lower_twom = 0;  // 2m of the probed (lower) level
  double b_mT = 0.0;   // working field of the probe
};

/// Predicted ensemble coupling vs temperature assuming thermal equilibrium
/// at the probe field: g(T) = g0 sqrt(N p_lower(T, B_probe)).
inline std::vector<double> equilibrium_coupling_curve(
    const LevelDiagram& dia, const Probe& probe, double g0_GHz, double n_total,
    const std::vector<double>& temperatures_K) {
  const int branch = dia.branch_of_twom(probe.lower_twom);
  Eigen::VectorXd energies(dia.branches());
  for (int k = 0; k < dia.branches(); ++k)
    energies(k) = dia.energy_at(k, probe.b_mT);
  std::vector<double> g;
  g.reserve(temperatures_K.size());
  for (double t : temperatures_K) {
    const PopulationVector pop = boltzmann(energies, t, n_total);
    g.push_back(g0_GHz * std::sqrt(pop.counts(branch)));
  }
  return g;
}

/// Same observable for the frozen (zero-field thermal, transported) state.
inline std::vector<double> frozen_coupling_curve(
    const SpinSystem& sys, int lower_twom, double g0_GHz, double n_total,
    const std::vector<double>& temperatures_K) {
  const int two_s = static_cast<int>(std::lround(2.0 * sys.spin));
  const int idx = (two_s - lower_twom) / 2;
  std::vector<double> g;
  g.reserve(temperatures_K.size());
  for (double t : temperatures_K) {
    const PopulationVector pop = frozen_state(sys, t, n_total);
    g.push_back(g0_GHz * std::sqrt(pop.counts(idx)));
  }
  return g;
}

}  // namespace spincav
