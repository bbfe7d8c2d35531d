#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spincav/level_diagram.hpp"
#include "spincav/spin_operators.hpp"

namespace spincav {

struct Transition {
  std::string from_label, to_label;  // diabatic labels, from = lower branch
  double f_GHz = 0.0;                // transition frequency, >= 0
  double element = 0.0;              // |<to| S+ + S- |from>|
  int order = 0;                     // photon order = |m_from - m_to|
};

struct AvoidedCrossing {
  std::string label_a, label_b;
  double b_c_mT = 0.0;   // field of minimum gap
  double gap_GHz = 0.0;  // minimum splitting
  double g_lz_GHz = 0.0; // = gap / 2
};

struct Hybridization {
  std::string state_label;
  // (2m, squared amplitude) sorted by descending weight; sums to 1
  std::vector<std::pair<int, double>> composition;
};

/// All branch pairs at field B: frequency from linearly interpolated tracked
/// energies, matrix element from the interpolated eigenvectors, photon order
/// from the diabatic labels.
inline std::vector<Transition> transitions(const LevelDiagram& dia,
                                           double b_mT) {
  dia.require_in_range(b_mT);
  const int n = dia.branches();
  Eigen::MatrixXcd drive;
  if (dia.has_spin_labels()) {
    const auto ops = spin_operators(dia.spin);
    drive = ops.sp + ops.sm;
  } else {
    drive = Eigen::MatrixXcd::Zero(n, n);
  }
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double ei = dia.energy_at(i, b_mT);
      const double ej = dia.energy_at(j, b_mT);
      const int lo = ei <= ej ? i : j;
      const int hi = ei <= ej ? j : i;
      Transition t;
      t.from_label = dia.branch_label(lo);
      t.to_label = dia.branch_label(hi);
      t.f_GHz = std::abs(ej - ei);
      if (dia.has_spin_labels()) {
        const Eigen::VectorXcd vlo = dia.state_at(lo, b_mT);
        const Eigen::VectorXcd vhi = dia.state_at(hi, b_mT);
        t.element = std::abs(vhi.dot(drive * vlo));
        t.order = std::abs(dia.twom_of_branch(lo) - dia.twom_of_branch(hi)) / 2;
      }
      out.push_back(t);
    }
  }
  return out;
}

namespace detail {

// Gap between the two diagram branches at an off-grid field: diagonalize
// there and pick the two eigenvectors with the largest projection onto the
// span of the tracked reference states at the nearest grid point. Symmetric
// in the pair, so it stays well defined inside the mixing window.
inline double pair_gap(const LevelDiagram& dia, int branch_a, int branch_b,
                       double b_mT) {
  const EigenSystem es = eigensystem(dia.ham(b_mT));
  const std::size_t ref = dia.nearest_index(b_mT);
  const Eigen::VectorXcd ra = dia.states[ref].col(branch_a);
  const Eigen::VectorXcd rb = dia.states[ref].col(branch_b);
  const int n = static_cast<int>(es.values.size());
  std::array<int, 2> top = {0, 1};
  double p0 = -1.0, p1 = -1.0;
  for (int k = 0; k < n; ++k) {
    const double proj = std::norm(ra.dot(es.vectors.col(k))) +
                        std::norm(rb.dot(es.vectors.col(k)));
    if (proj > p0) {
      p1 = p0; top[1] = top[0];
      p0 = proj; top[0] = k;
    } else if (proj > p1) {
      p1 = proj; top[1] = k;
    }
  }
  return std::abs(es.values(top[0]) - es.values(top[1]));
}

}  // namespace detail

/// Locate the minimum gap between two tracked branches inside [b_lo, b_hi].
/// A coarse scan brackets the interior minimum (monotone gap -> no-crossing
/// error), golden-section narrows it to 0.01 mT, and a quadratic fit of
/// gap^2 -- exact for a linear two-level crossing -- refines the centre and
/// the gap so couplings far below the golden-section step stay resolvable.
inline AvoidedCrossing find_alc_branches(const LevelDiagram& dia, int ba,
                                         int bb, double b_lo, double b_hi) {
  if (!dia.ham) throw DataError("find_alc: diagram lacks a Hamiltonian");
  auto gap = [&](double b) { return detail::pair_gap(dia, ba, bb, b); };

  const int scan_n = 81;
  double best = std::numeric_limits<double>::infinity();
  int best_k = 0;
  std::vector<double> bs(scan_n), gs(scan_n);
  for (int k = 0; k < scan_n; ++k) {
    bs[k] = b_lo + (b_hi - b_lo) * double(k) / double(scan_n - 1);
    gs[k] = gap(bs[k]);
    if (gs[k] < best) { best = gs[k]; best_k = k; }
  }
  if (best_k == 0 || best_k == scan_n - 1)
    throw NoCrossingError("find_alc: gap of (" + dia.branch_label(ba) + ", " +
                          dia.branch_label(bb) + ") is monotone over [" +
                          std::to_string(b_lo) + ", " + std::to_string(b_hi) +
                          "] mT");

  // golden-section on the bracketing neighbours, to 0.01 mT
  const double inv_phi = 0.6180339887498949;
  double a = bs[best_k - 1], b = bs[best_k + 1];
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = gap(x1), f2 = gap(x2);
  while (b - a > 0.01) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = gap(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = gap(x2);
    }
  }
  const double b_center = 0.5 * (a + b);

  // quadratic fit of gap^2 over 5 points spanning the bracket
  const double hw = std::max(0.5 * (b - a), 0.005);
  Eigen::MatrixXd design(5, 3);
  Eigen::VectorXd rhs(5);
  for (int k = 0; k < 5; ++k) {
    const double db = hw * (k - 2);
    const double g = gap(b_center + db);
    design(k, 0) = db * db;
    design(k, 1) = db;
    design(k, 2) = 1.0;
    rhs(k) = g * g;
  }
  const Eigen::Vector3d coef =
      design.colPivHouseholderQr().solve(rhs);
  double bc = b_center;
  double gap_min2 = rhs.minCoeff();
  if (coef(0) > 0) {
    const double shift = -coef(1) / (2.0 * coef(0));
    if (std::abs(shift) <= 3.0 * hw) {
      bc = b_center + shift;
      gap_min2 = coef(2) - coef(1) * coef(1) / (4.0 * coef(0));
    }
  }

  AvoidedCrossing alc;
  alc.label_a = dia.branch_label(ba);
  alc.label_b = dia.branch_label(bb);
  alc.b_c_mT = bc;
  alc.gap_GHz = std::sqrt(std::max(gap_min2, 0.0));
  alc.g_lz_GHz = 0.5 * alc.gap_GHz;
  return alc;
}

inline AvoidedCrossing find_alc(const LevelDiagram& dia, int twom_a,
                                int twom_b, double b_lo, double b_hi) {
  return find_alc_branches(dia, dia.branch_of_twom(twom_a),
                           dia.branch_of_twom(twom_b), b_lo, b_hi);
}

/// Squared amplitudes of a tracked branch in the |m> basis at field B.
inline Hybridization hybridization(const LevelDiagram& dia, int twom,
                                   double b_mT) {
  const int branch = dia.branch_of_twom(twom);
  const Eigen::VectorXcd v = dia.state_at(branch, b_mT);
  Hybridization hy;
  hy.state_label = label_name(twom);
  const int n = static_cast<int>(v.size());
  const int two_s = static_cast<int>(std::lround(2.0 * dia.spin));
  for (int k = 0; k < n; ++k)
    hy.composition.emplace_back(two_s - 2 * k, std::norm(v(k)));
  std::sort(hy.composition.begin(), hy.composition.end(),
            [](const auto& x, const auto& y) { return x.second > y.second; });
  return hy;
}

/// Weight of the basis state 2m = twom_component in the given branch.
inline double hybrid_weight(const LevelDiagram& dia, int twom_branch,
                            int twom_component, double b_mT) {
  const auto hy = hybridization(dia, twom_branch, b_mT);
  for (const auto& [tm, w] : hy.composition)
    if (tm == twom_component) return w;
  throw DataError("no such basis component: " + label_name(twom_component));
}

struct TransitionCurve {
  std::string pair_label;
  std::vector<double> b_mT;
  std::vector<double> f_GHz;
};

/// Transition-frequency curves f(B) for the requested label pairs.
inline std::vector<TransitionCurve> transition_map(
    const SpinSystem& sys, const std::vector<double>& b_grid,
    const std::vector<std::pair<int, int>>& pairs) {
  const LevelDiagram dia = sweep_levels(sys, b_grid);
  std::vector<TransitionCurve> out;
  for (const auto& [ta, tb] : pairs) {
    TransitionCurve c;
    c.pair_label = label_name(ta) + ">" + label_name(tb);
    const int ba = dia.branch_of_twom(ta);
    const int bb = dia.branch_of_twom(tb);
    for (std::size_t p = 0; p < b_grid.size(); ++p) {
      c.b_mT.push_back(b_grid[p]);
      c.f_GHz.push_back(std::abs(dia.energies(p, bb) - dia.energies(p, ba)));
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace spincav
