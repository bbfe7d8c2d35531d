#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "spincav/eigensystem.hpp"
#include "spincav/errors.hpp"
#include "spincav/spin_system.hpp"

namespace spincav {

using HamiltonianFn = std::function<Eigen::MatrixXcd(double b_mT)>;

/// Printable name of the basis state with 2m = twom, e.g. "+7/2", "-1/2",
/// or "+2", "0" for integer spin.
inline std::string label_name(int twom) {
  std::string sign = twom > 0 ? "+" : (twom < 0 ? "-" : "");
  const int a = std::abs(twom);
  if (a % 2 == 0) return sign + std::to_string(a / 2);
  return sign + std::to_string(a) + "/2";
}

/// Parse "+7/2", "-5/2", "3", "-2" back to 2m.
inline int parse_label(const std::string& text) {
  std::string s = text;
  s.erase(std::remove_if(s.begin(), s.end(), ::isspace), s.end());
  if (s.empty()) throw DataError("empty level label");
  int sign = 1;
  std::size_t pos = 0;
  if (s[0] == '+') pos = 1;
  if (s[0] == '-') { sign = -1; pos = 1; }
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos)
      return sign * 2 * std::stoi(s.substr(pos));
    if (s.substr(slash + 1) != "2") throw DataError("bad label: " + text);
    return sign * std::stoi(s.substr(pos, slash - pos));
  } catch (const std::invalid_argument&) {
    throw DataError("bad level label: " + text);
  }
}

/// Energies and adiabatically tracked eigenvectors over a field grid.
/// Branch k carries the diabatic label of the basis state that dominates
/// its eigenvector at b_grid[0].
struct LevelDiagram {
  std::vector<double> b_grid;                // mT, strictly ascending
  Eigen::MatrixXd energies;                  // (grid point, branch) in GHz
  std::vector<Eigen::MatrixXcd> states;      // per point; column = branch
  std::vector<int> diabatic_index;           // per branch: basis index at start
  std::vector<std::size_t> crossing_flags;   // grid indices with overlap <= 0.5
  HamiltonianFn ham;                         // for off-grid queries
  double spin = -1.0;                        // < 0 when not a spin system

  int branches() const { return static_cast<int>(energies.cols()); }

  bool has_spin_labels() const { return spin > 0; }

  int twom_of_branch(int branch) const {
    return static_cast<int>(std::lround(2.0 * spin)) -
           2 * diabatic_index[branch];
  }

  std::string branch_label(int branch) const {
    if (has_spin_labels()) return label_name(twom_of_branch(branch));
    return "s" + std::to_string(diabatic_index[branch]);
  }

  /// Branch whose diabatic label is the basis state with 2m = twom.
  int branch_of_twom(int twom) const {
    if (!has_spin_labels())
      throw DataError("diagram has no spin labels");
    const int idx = (static_cast<int>(std::lround(2.0 * spin)) - twom) / 2;
    for (int k = 0; k < branches(); ++k)
      if (diabatic_index[k] == idx) return k;
    throw DataError("no branch with diabatic label " + label_name(twom));
  }

  std::size_t nearest_index(double b_mT) const {
    const auto it = std::lower_bound(b_grid.begin(), b_grid.end(), b_mT);
    if (it == b_grid.begin()) return 0;
    if (it == b_grid.end()) return b_grid.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - b_grid.begin());
    return (b_mT - b_grid[hi - 1] <= b_grid[hi] - b_mT) ? hi - 1 : hi;
  }

  void require_in_range(double b_mT) const {
    if (b_mT < b_grid.front() - 1e-12 || b_mT > b_grid.back() + 1e-12)
      throw DataError("field " + std::to_string(b_mT) +
                      " mT outside diagram grid [" +
                      std::to_string(b_grid.front()) + ", " +
                      std::to_string(b_grid.back()) + "]");
  }

  /// Linear interpolation of a tracked branch energy.
  double energy_at(int branch, double b_mT) const {
    require_in_range(b_mT);
    const auto hi_it = std::upper_bound(b_grid.begin(), b_grid.end(), b_mT);
    std::size_t hi = static_cast<std::size_t>(hi_it - b_grid.begin());
    if (hi == 0) hi = 1;
    if (hi == b_grid.size()) hi = b_grid.size() - 1;
    const std::size_t lo = hi - 1;
    const double t = (b_mT - b_grid[lo]) / (b_grid[hi] - b_grid[lo]);
    return (1.0 - t) * energies(lo, branch) + t * energies(hi, branch);
  }

  /// Renormalized linear interpolation of a tracked eigenvector.
  Eigen::VectorXcd state_at(int branch, double b_mT) const {
    require_in_range(b_mT);
    const auto hi_it = std::upper_bound(b_grid.begin(), b_grid.end(), b_mT);
    std::size_t hi = static_cast<std::size_t>(hi_it - b_grid.begin());
    if (hi == 0) hi = 1;
    if (hi == b_grid.size()) hi = b_grid.size() - 1;
    const std::size_t lo = hi - 1;
    const double t = (b_mT - b_grid[lo]) / (b_grid[hi] - b_grid[lo]);
    Eigen::VectorXcd a = states[lo].col(branch);
    Eigen::VectorXcd b = states[hi].col(branch);
    // fix the relative gauge before mixing
    const std::complex<double> phase = a.dot(b);
    if (std::abs(phase) > 0) b *= std::conj(phase) / std::abs(phase);
    Eigen::VectorXcd v = (1.0 - t) * a + t * b;
    const double norm = v.norm();
    if (norm > 0) v /= norm;
    return v;
  }
};

namespace detail {

// Within each numerically degenerate eigenvalue cluster, rotate the basis to
// diagonalize the basis-index operator restricted to the cluster. This pins
// the otherwise arbitrary degenerate eigenbasis to maximally pure |m> states
// (Kramers pairs at zero field would otherwise come out as random mixtures).
inline void align_degenerate(EigenSystem& es, double tol_GHz = 1e-9) {
  const int n = static_cast<int>(es.values.size());
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && es.values(j + 1) - es.values(i) < tol_GHz) ++j;
    if (j > i) {
      const int k = j - i + 1;
      Eigen::MatrixXcd sub = es.vectors.middleCols(i, k);
      Eigen::MatrixXcd proj(k, k);
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
          std::complex<double> acc = 0;
          for (int r = 0; r < n; ++r)
            acc += std::conj(sub(r, a)) * double(r) * sub(r, b);
          proj(a, b) = acc;
        }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> rot(proj);
      es.vectors.middleCols(i, k) = sub * rot.eigenvectors();
    }
    i = j + 1;
  }
}

}  // namespace detail

/// Diagonalize ham over a strictly ascending field grid and track branches
/// by maximum eigenvector overlap with the previous point. Points where the
/// assigned overlap drops to 0.5 or below are flagged; ties between the two
/// best overlaps (within 1e-6) abort with the offending grid index.
inline LevelDiagram sweep_levels(HamiltonianFn ham,
                                 const std::vector<double>& b_grid,
                                 double spin = -1.0) {
  if (b_grid.size() < 2)
    throw std::invalid_argument("sweep_levels: need at least 2 grid points");
  for (std::size_t k = 1; k < b_grid.size(); ++k)
    if (!(b_grid[k] > b_grid[k - 1]))
      throw std::invalid_argument("sweep_levels: grid must be strictly ascending");

  LevelDiagram dia;
  dia.b_grid = b_grid;
  dia.ham = ham;
  dia.spin = spin;

  const std::size_t npts = b_grid.size();
  Eigen::MatrixXcd prev;
  for (std::size_t p = 0; p < npts; ++p) {
    EigenSystem es = eigensystem(ham(b_grid[p]));
    detail::align_degenerate(es);
    const int n = static_cast<int>(es.values.size());
    if (p == 0) {
      dia.energies.resize(npts, n);
      dia.states.assign(npts, Eigen::MatrixXcd());
      dia.diabatic_index.resize(n);
      for (int k = 0; k < n; ++k) {
        int dom = 0;
        es.vectors.col(k).cwiseAbs().maxCoeff(&dom);
        dia.diabatic_index[k] = dom;
      }
    } else {
      // overlap(i, j) = |<prev_i | next_j>|
      const Eigen::MatrixXd overlap = (prev.adjoint() * es.vectors).cwiseAbs();
      std::vector<int> assign(n, -1);
      std::vector<bool> used(n, false);
      for (int i = 0; i < n; ++i) {
        double best = -1.0, second = -1.0;
        for (int j = 0; j < n; ++j) {
          const double o = overlap(i, j);
          if (o > best) { second = best; best = o; }
          else if (o > second) second = o;
        }
        if (best - second < 1e-6)
          throw TrackingError("ambiguous branch tracking", p);
      }
      // greedy one-to-one assignment, largest overlaps first
      for (int pass = 0; pass < n; ++pass) {
        double best = -1.0;
        int bi = -1, bj = -1;
        for (int i = 0; i < n; ++i) {
          if (assign[i] >= 0) continue;
          for (int j = 0; j < n; ++j) {
            if (used[j]) continue;
            if (overlap(i, j) > best) { best = overlap(i, j); bi = i; bj = j; }
          }
        }
        assign[bi] = bj;
        used[bj] = true;
        if (best <= 0.5) dia.crossing_flags.push_back(p);
      }
      Eigen::VectorXd vals(n);
      Eigen::MatrixXcd vecs(n, n);
      for (int i = 0; i < n; ++i) {
        vals(i) = es.values(assign[i]);
        vecs.col(i) = es.vectors.col(assign[i]);
      }
      es.values = vals;
      es.vectors = vecs;
    }
    dia.energies.row(p) = es.values.transpose();
    dia.states[p] = es.vectors;
    prev = es.vectors;
  }
  return dia;
}

inline LevelDiagram sweep_levels(const SpinSystem& sys,
                                 const std::vector<double>& b_grid) {
  sys.validate();
  return sweep_levels([sys](double b) { return hamiltonian(sys, b); }, b_grid,
                      sys.spin);
}

/// Uniform grid helper, endpoints included.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k)
    g[k] = lo + (hi - lo) * double(k) / double(n - 1);
  return g;
}

}  // namespace spincav
