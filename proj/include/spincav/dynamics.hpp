#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <array>
#include <cmath>
#include <vector>

#include "spincav/cavity.hpp"
#include "spincav/errors.hpp"

namespace spincav {

/// Three-level Lambda scheme: |1> pumped to |2> at rate W, |2> decays back
/// to |1> (Gamma21) and onward to the sink |3> (Gamma23). Rates in 1/s.
struct LambdaSystem {
  double pump_per_s = 0.0;     // W(N_cav)
  double gamma21_per_s = 0.0;  // |2> -> |1>
  double gamma23_per_s = 0.0;  // |2> -> |3>

  void validate() const {
    if (pump_per_s < 0 || gamma21_per_s < 0 || gamma23_per_s < 0)
      throw ConfigError("Lambda-scheme rates must be >= 0");
  }
};

/// Rate matrix of dN/dt = M N. Diagonals are the negated off-diagonal
/// column sums, so each column sums to zero exactly in floating point when
/// the off-diagonals are added first.
inline Eigen::Matrix3d rate_matrix(const LambdaSystem& sys) {
  sys.validate();
  Eigen::Matrix3d m;
  m << -sys.pump_per_s, sys.gamma21_per_s, 0.0,
       sys.pump_per_s, -(sys.gamma21_per_s + sys.gamma23_per_s), 0.0,
       0.0, sys.gamma23_per_s, 0.0;
  return m;
}

/// Exact eigenvalues {0, lambda_slow, lambda_fast} (ascending magnitude) of
/// the rate matrix, from the quadratic of its upper 2x2 block:
///   lambda^2 + (W + G21 + G23) lambda + W G23 = 0.
/// Evaluated with the cancellation-free quadratic formula.
inline std::array<double, 3> eigen_rates(const LambdaSystem& sys) {
  sys.validate();
  const double b = sys.pump_per_s + sys.gamma21_per_s + sys.gamma23_per_s;
  const double c = sys.pump_per_s * sys.gamma23_per_s;
  const double disc = std::sqrt(std::max(b * b - 4.0 * c, 0.0));
  const double fast = -0.5 * (b + disc);
  const double slow = (fast != 0.0) ? c / fast : 0.0;
  return {0.0, slow, fast};
}

/// Population trajectory of the three levels.
struct RateTrajectory {
  std::vector<double> t_s;
  Eigen::MatrixXd n;  // (time, level)
};

struct DecayTrace {
  std::vector<double> t_s;
  std::vector<double> n1;   // population of |1>
  std::vector<double> s21;  // optional transmission, same length when set
};

/// n(t) = exp(M t) n0 by scaling-and-squaring matrix exponential.
inline RateTrajectory propagate(const Eigen::Matrix3d& m,
                                const Eigen::Vector3d& n0,
                                const std::vector<double>& t_grid) {
  for (std::size_t k = 1; k < t_grid.size(); ++k)
    if (!(t_grid[k] > t_grid[k - 1]))
      throw std::invalid_argument("propagate: time grid must be ascending");
  RateTrajectory traj;
  traj.t_s = t_grid;
  traj.n.resize(t_grid.size(), 3);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const Eigen::Matrix3d em = (m * t_grid[k]).exp();
    traj.n.row(k) = (em * n0).transpose();
  }
  return traj;
}

/// Same trajectory by adaptive step-doubling RK4; agrees with propagate()
/// to better than 1e-8 relative. Kept as an independent integration path.
inline RateTrajectory propagate_ode(const Eigen::Matrix3d& m,
                                    const Eigen::Vector3d& n0,
                                    const std::vector<double>& t_grid,
                                    double rel_tol = 1e-11) {
  RateTrajectory traj;
  traj.t_s = t_grid;
  traj.n.resize(t_grid.size(), 3);
  auto rk4 = [&m](const Eigen::Vector3d& y, double h) {
    const Eigen::Vector3d k1 = m * y;
    const Eigen::Vector3d k2 = m * (y + 0.5 * h * k1);
    const Eigen::Vector3d k3 = m * (y + 0.5 * h * k2);
    const Eigen::Vector3d k4 = m * (y + h * k3);
    return (y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).eval();
  };
  const double scale = std::max(n0.cwiseAbs().maxCoeff(), 1e-300);
  const double rate_scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::Vector3d y = n0;
  double t = 0.0;
  double h = 0.1 / rate_scale;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (t_grid[k] < 0)
      throw std::invalid_argument("propagate_ode: negative time");
    while (t < t_grid[k]) {
      double step = std::min(h, t_grid[k] - t);
      while (true) {
        const Eigen::Vector3d full = rk4(y, step);
        const Eigen::Vector3d half = rk4(rk4(y, 0.5 * step), 0.5 * step);
        const double err = (full - half).cwiseAbs().maxCoeff() / scale;
        if (err <= rel_tol || step <= 1e-16 / rate_scale) {
          y = half;
          t += step;
          if (err < 0.1 * rel_tol) h = std::min(2.0 * step, 4.0 / rate_scale);
          else h = step;
          break;
        }
        step *= 0.5;
      }
    }
    traj.n.row(k) = y.transpose();
  }
  return traj;
}

/// Saturated pump rate of the driven transition:
///   W = 4 (2 pi g0)^2 N_cav / (2 pi gamma_s)   [1/s, rates in Hz inside].
inline double pump_rate(double g0_GHz, double n_cav, double gamma_s_GHz) {
  if (!(g0_GHz > 0) || !(gamma_s_GHz > 0))
    throw std::invalid_argument("pump_rate: g0 and gamma_s must be > 0");
  if (n_cav < 0) throw std::invalid_argument("pump_rate: N_cav must be >= 0");
  const double g_ang = 2.0 * M_PI * g0_GHz * 1e9;
  const double gs_ang = 2.0 * M_PI * gamma_s_GHz * 1e9;
  return 4.0 * g_ang * g_ang * n_cav / gs_ang;
}

/// Convert a population trace into the on-resonance transmission trace.
inline DecayTrace to_decay_trace(const RateTrajectory& traj) {
  DecayTrace trace;
  trace.t_s = traj.t_s;
  trace.n1.assign(traj.n.col(0).data(), traj.n.col(0).data() + traj.n.rows());
  return trace;
}

inline void trace_to_transmission(DecayTrace& trace, const CavityMode& mode,
                                  double g0_GHz, double gamma_s_GHz) {
  trace.s21.resize(trace.n1.size());
  for (std::size_t k = 0; k < trace.n1.size(); ++k)
    trace.s21[k] = s21_resonance(mode, g0_GHz, gamma_s_GHz, trace.n1[k]);
}

struct DecayAnalysis {
  double tau_i_s = 0.0;    // initial time constant
  double tau_f_s = 0.0;    // final time constant
  double t_star_s = 0.0;   // changeover time
  double residual = 0.0;   // rms of the piecewise fit, log space
};

namespace detail {

struct LineFit {
  double intercept, slope;
};

// least squares y = a + s t over index range [lo, hi]
inline LineFit fit_line(const std::vector<double>& t,
                        const std::vector<double>& y, std::size_t lo,
                        std::size_t hi) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = double(hi - lo + 1);
  for (std::size_t k = lo; k <= hi; ++k) {
    st += t[k]; sy += y[k]; stt += t[k] * t[k]; sty += t[k] * y[k];
  }
  const double denom = n * stt - st * st;
  if (denom == 0) throw NumericsError("degenerate line fit");
  LineFit f;
  f.slope = (n * sty - st * sy) / denom;
  f.intercept = (sy - f.slope * st) / n;
  return f;
}

}  // namespace detail

/// Split a decay into two exponential processes: a breakpoint scan picks the
/// changeover that minimises the total squared log residual, then each
/// segment is refit away from the blending region (the slow tail of the fast
/// mode contaminates slopes near the knee) and the changeover is re-derived
/// as the intersection of the two fitted lines.
inline DecayAnalysis analyze_decay(const DecayTrace& trace) {
  // usable points: strictly positive population
  std::vector<double> t, y;
  for (std::size_t k = 0; k < trace.n1.size(); ++k) {
    if (trace.n1[k] <= 0) break;
    t.push_back(trace.t_s[k]);
    y.push_back(std::log(trace.n1[k]));
  }
  const std::size_t n = t.size();
  if (n < 8) throw DataError("analyze_decay: too few usable points");
  double n1_min = trace.n1[0], n1_max = trace.n1[0];
  for (std::size_t k = 0; k < n; ++k) {
    n1_min = std::min(n1_min, trace.n1[k]);
    n1_max = std::max(n1_max, trace.n1[k]);
  }
  if (!(n1_min < 0.1 * n1_max))
    throw DataError("analyze_decay: insufficient dynamic range "
                    "(population never drops below 10% of its peak)");

  // breakpoint scan on prefix sums
  std::vector<double> p1(n + 1, 0), pt(n + 1, 0), ptt(n + 1, 0), py(n + 1, 0),
      pty(n + 1, 0), pyy(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) {
    p1[k + 1] = p1[k] + 1.0;
    pt[k + 1] = pt[k] + t[k];
    ptt[k + 1] = ptt[k] + t[k] * t[k];
    py[k + 1] = py[k] + y[k];
    pty[k + 1] = pty[k] + t[k] * y[k];
    pyy[k + 1] = pyy[k] + y[k] * y[k];
  }
  auto sse = [&](std::size_t lo, std::size_t hi) {
    const double cnt = p1[hi + 1] - p1[lo];
    const double st = pt[hi + 1] - pt[lo];
    const double stt = ptt[hi + 1] - ptt[lo];
    const double sy = py[hi + 1] - py[lo];
    const double sty = pty[hi + 1] - pty[lo];
    const double syy = pyy[hi + 1] - pyy[lo];
    const double denom = cnt * stt - st * st;
    if (denom <= 0) return syy - sy * sy / cnt;
    const double slope = (cnt * sty - st * sy) / denom;
    const double icpt = (sy - slope * st) / cnt;
    return syy - 2.0 * (icpt * sy + slope * sty) + cnt * icpt * icpt +
           2.0 * icpt * slope * st + slope * slope * stt;
  };
  std::size_t best_k = n / 2;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t k = 3; k + 4 < n; ++k) {
    const double s = sse(0, k) + sse(k, n - 1);
    if (s < best_sse) { best_sse = s; best_k = k; }
  }

  detail::LineFit early = detail::fit_line(t, y, 0, best_k);
  detail::LineFit late = detail::fit_line(t, y, best_k, n - 1);
  double t_star = t[best_k];

  // refinement: trim the blending window around the knee and refit
  for (int iter = 0; iter < 2; ++iter) {
    const double ri = -early.slope, rf = -late.slope;
    if (!(ri > 0) || !(rf > 0)) break;
    const double dl = std::abs(ri - rf);
    if (dl <= 0.01 * std::max(ri, rf)) break;  // effectively one exponential
    t_star = (late.intercept - early.intercept) / (early.slope - late.slope);
    if (!(t_star > t.front()) || !(t_star < t.back())) break;
    double guard_early = 3.5 / dl;
    double guard_late = std::log(std::max(10.0 * dl / std::min(ri, rf), 3.0)) / dl;
    auto count_before = [&](double tmax) {
      std::size_t c = 0;
      while (c < n && t[c] <= tmax) ++c;
      return c;
    };
    auto first_after = [&](double tmin) {
      std::size_t c = 0;
      while (c < n && t[c] < tmin) ++c;
      return c;
    };
    std::size_t e_hi, l_lo;
    while (true) {
      e_hi = count_before(t_star - guard_early);
      if (e_hi >= 3 || guard_early < 1e-12) break;
      guard_early *= 0.5;
    }
    while (true) {
      l_lo = first_after(t_star + guard_late);
      if (n - l_lo >= 3 || guard_late < 1e-12) break;
      guard_late *= 0.5;
    }
    if (e_hi < 3 || n - l_lo < 3) break;
    early = detail::fit_line(t, y, 0, e_hi - 1);
    late = detail::fit_line(t, y, l_lo, n - 1);
    const double cross =
        (late.intercept - early.intercept) / (early.slope - late.slope);
    if (cross > t.front() && cross < t.back()) t_star = cross;
  }

  DecayAnalysis out;
  if (!(early.slope < 0) || !(late.slope < 0))
    throw NumericsError("analyze_decay: non-decaying segment");
  out.tau_i_s = -1.0 / early.slope;
  out.tau_f_s = -1.0 / late.slope;
  out.t_star_s = t_star;
  double sse_total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const detail::LineFit& f = (t[k] < t_star) ? early : late;
    const double r = y[k] - (f.intercept + f.slope * t[k]);
    sse_total += r * r;
  }
  out.residual = std::sqrt(sse_total / double(n));
  return out;
}

}  // namespace spincav
