#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spincav/cavity.hpp"
#include "spincav/dynamics.hpp"
#include "spincav/errors.hpp"
#include "spincav/levmar.hpp"
#include "spincav/spectra.hpp"
#include "spincav/spin_system.hpp"

namespace spincav {

struct FitResult {
  std::map<std::string, double> params;
  double residual = 0.0;  // root mean square
  int iterations = 0;
  bool converged = false;
};

/// |S21| magnitudes over a (field, frequency) grid.
struct TransmissionMap {
  std::vector<double> b_mT;
  std::vector<double> f_GHz;
  Eigen::MatrixXd values;  // (field index, frequency index), linear magnitude

  void validate() const {
    if (values.rows() != static_cast<Eigen::Index>(b_mT.size()) ||
        values.cols() != static_cast<Eigen::Index>(f_GHz.size()))
      throw DataError("transmission map dimensions are inconsistent");
    if ((values.array() < 0).any())
      throw DataError("transmission magnitudes must be >= 0");
  }
};

/// Least-squares fit of the transmission line shape to one spectrum slice.
/// free_names selects among {f0, kappa_c, gamma_d, f_s, gamma_s, g_eff};
/// the rest stay at their initial values.
inline FitResult fit_spectrum(const std::vector<double>& f_GHz,
                              const std::vector<double>& s21_abs,
                              const CavityMode& init_mode,
                              const SpinBath& init_bath,
                              const std::set<std::string>& free_names,
                              const LMOptions& opt = {}) {
  static const std::vector<std::string> known = {"f0",      "kappa_c", "gamma_d",
                                                 "f_s",     "gamma_s", "g_eff"};
  for (const auto& name : free_names)
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw DataError("fit_spectrum: unknown parameter '" + name + "'");
  if (f_GHz.size() != s21_abs.size())
    throw DataError("fit_spectrum: frequency and magnitude counts differ");
  if (s21_abs.size() < 5 * std::max<std::size_t>(free_names.size(), 1))
    throw DataError("fit_spectrum: need at least 5 points per free parameter");

  std::map<std::string, double> value = {
      {"f0", init_mode.f0_GHz},       {"kappa_c", init_mode.kappa_c_GHz},
      {"gamma_d", init_mode.gamma_d_GHz}, {"f_s", init_bath.f_s_GHz},
      {"gamma_s", init_bath.gamma_s_GHz}, {"g_eff", init_bath.g_eff_GHz}};

  std::vector<std::string> free_order;
  for (const auto& name : known)
    if (free_names.count(name)) free_order.push_back(name);

  auto model = [&](const std::map<std::string, double>& v, double f) {
    CavityMode mode = init_mode;
    mode.f0_GHz = v.at("f0");
    mode.kappa_c_GHz = std::abs(v.at("kappa_c"));
    mode.gamma_d_GHz = std::abs(v.at("gamma_d"));
    SpinBath bath;
    bath.f_s_GHz = v.at("f_s");
    bath.gamma_s_GHz = std::abs(v.at("gamma_s"));
    bath.g_eff_GHz = v.at("g_eff");
    return std::abs(s21(f, mode, bath));
  };

  auto residuals = [&](const Eigen::VectorXd& p) {
    std::map<std::string, double> v = value;
    for (std::size_t k = 0; k < free_order.size(); ++k)
      v[free_order[k]] = p(static_cast<Eigen::Index>(k));
    Eigen::VectorXd r(f_GHz.size());
    for (std::size_t k = 0; k < f_GHz.size(); ++k)
      r(k) = model(v, f_GHz[k]) - s21_abs[k];
    return r;
  };

  Eigen::VectorXd p0(free_order.size());
  for (std::size_t k = 0; k < free_order.size(); ++k)
    p0(k) = value[free_order[k]];

  const LMResult lm = levenberg_marquardt(residuals, p0, opt);
  if (!lm.converged)
    throw NumericsError("fit_spectrum did not converge after " +
                        std::to_string(lm.iterations) + " iterations");

  FitResult out;
  for (std::size_t k = 0; k < free_order.size(); ++k)
    value[free_order[k]] = lm.params(static_cast<Eigen::Index>(k));
  value["kappa_c"] = std::abs(value["kappa_c"]);
  value["gamma_d"] = std::abs(value["gamma_d"]);
  value["gamma_s"] = std::abs(value["gamma_s"]);
  value["g_eff"] = std::abs(value["g_eff"]);
  out.params = value;
  out.residual = lm.rms;
  out.iterations = lm.iterations;
  out.converged = lm.converged;
  return out;
}

namespace detail {

struct Peak {
  double b_mT, f_GHz, height;
};

// Per-column local maxima above `prominence` x (column max), with parabolic
// sub-bin refinement. Columns are lightly smoothed first and only the two
// strongest maxima survive -- the dispersion has at most two branches, and
// this keeps measurement noise from minting spurious peaks.
inline std::vector<Peak> extract_peaks(const TransmissionMap& map,
                                       double prominence,
                                       int smooth_bins = 5) {
  std::vector<Peak> peaks;
  const Eigen::Index nb = map.values.rows();
  const Eigen::Index nf = map.values.cols();
  const int half = std::max(smooth_bins, 1) / 2;
  Eigen::VectorXd col(nf);
  for (Eigen::Index ib = 0; ib < nb; ++ib) {
    for (Eigen::Index k = 0; k < nf; ++k) {
      double acc = 0.0;
      int cnt = 0;
      for (Eigen::Index j = std::max<Eigen::Index>(k - half, 0);
           j <= std::min(k + half, nf - 1); ++j) {
        acc += map.values(ib, j);
        ++cnt;
      }
      col(k) = acc / cnt;
    }
    const double col_max = col.maxCoeff();
    if (!(col_max > 0)) continue;
    std::vector<Peak> column_peaks;
    for (Eigen::Index k = 1; k + 1 < nf; ++k) {
      const double v = col(k);
      if (v < prominence * col_max) continue;
      if (!(v >= col(k - 1) && v > col(k + 1))) continue;
      const double y0 = col(k - 1), y1 = v, y2 = col(k + 1);
      const double denom = y0 - 2.0 * y1 + y2;
      double f = map.f_GHz[k];
      if (denom < 0) {
        const double delta = 0.5 * (y0 - y2) / denom;
        if (std::abs(delta) <= 1.0)
          f += delta * (map.f_GHz[k + 1] - map.f_GHz[k]);
      }
      column_peaks.push_back({map.b_mT[ib], f, v});
    }
    std::sort(column_peaks.begin(), column_peaks.end(),
              [](const Peak& x, const Peak& y) { return x.height > y.height; });
    if (column_peaks.size() > 2) column_peaks.resize(2);
    peaks.insert(peaks.end(), column_peaks.begin(), column_peaks.end());
  }
  return peaks;
}

}  // namespace detail

struct MapFitInit {
  CavityMode mode;          // f0, kappa_c, gamma_d taken as the slice seed
  double g_eff_GHz = 1e-3;
  double fs_slope_GHz_per_mT = 0.03;
  double b_crossing_mT = 0.0;  // field where f_s crosses f0 (seed)
  double gamma_s_GHz = 1e-3;
  double peak_prominence = 0.02;
};

/// Recover the ensemble coupling from an avoided-crossing transmission map:
/// per-column peak extraction, then a least-squares fit of the two-branch
/// dispersion f+-(B) derived from the transmission denominator,
///   f+- = (f0 + fs)/2 +- sqrt((f0 - fs)^2 + 4 g^2)/2,  fs = slope (B - Bc) + f0.
/// gamma_s is refined afterwards on the column nearest the crossing.
inline FitResult fit_alc_map(const TransmissionMap& map, const MapFitInit& init,
                             const LMOptions& opt = {}) {
  map.validate();
  const std::vector<detail::Peak> peaks =
      detail::extract_peaks(map, init.peak_prominence);

  // a crossing shows up as columns carrying two resolved branches
  std::map<double, int> per_column;
  for (const auto& p : peaks) ++per_column[p.b_mT];
  const bool split = std::any_of(per_column.begin(), per_column.end(),
                                 [](const auto& kv) { return kv.second >= 2; });
  if (!split)
    throw NoCrossingError(
        "fit_alc_map: no field column shows two branches; the map does not "
        "span a resolvable spin-cavity crossing");

  auto branches = [](double f0, double fs, double g) {
    const double mid = 0.5 * (f0 + fs);
    const double split2 = 0.5 * std::sqrt((f0 - fs) * (f0 - fs) + 4.0 * g * g);
    return std::pair<double, double>(mid - split2, mid + split2);
  };

  // params: g_eff, b_crossing, slope, f0
  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(peaks.size());
    for (std::size_t k = 0; k < peaks.size(); ++k) {
      const double fs = p(3) + p(2) * (peaks[k].b_mT - p(1));
      const auto [flo, fhi] = branches(p(3), fs, p(0));
      r(k) = std::min(std::abs(peaks[k].f_GHz - flo),
                      std::abs(peaks[k].f_GHz - fhi));
    }
    return r;
  };

  Eigen::VectorXd p0(4);
  p0 << init.g_eff_GHz, init.b_crossing_mT, init.fs_slope_GHz_per_mT,
      init.mode.f0_GHz;
  const LMResult lm = levenberg_marquardt(residuals, p0, opt);
  if (!lm.converged)
    throw NumericsError("fit_alc_map dispersion fit did not converge");

  FitResult out;
  out.params["g_eff"] = std::abs(lm.params(0));
  out.params["b_crossing_mT"] = lm.params(1);
  out.params["fs_slope"] = lm.params(2);
  out.params["f0"] = lm.params(3);
  out.residual = lm.rms;
  out.iterations = lm.iterations;
  out.converged = lm.converged;

  // linewidth from the column closest to the fitted crossing
  std::size_t ib = 0;
  for (std::size_t k = 1; k < map.b_mT.size(); ++k)
    if (std::abs(map.b_mT[k] - lm.params(1)) <
        std::abs(map.b_mT[ib] - lm.params(1)))
      ib = k;
  try {
    CavityMode mode = init.mode;
    mode.f0_GHz = lm.params(3);
    SpinBath bath;
    bath.f_s_GHz = lm.params(3) + lm.params(2) * (map.b_mT[ib] - lm.params(1));
    bath.gamma_s_GHz = init.gamma_s_GHz;
    bath.g_eff_GHz = out.params["g_eff"];
    std::vector<double> col(map.f_GHz.size());
    Eigen::Map<Eigen::VectorXd>(col.data(), col.size()) = map.values.row(ib);
    const FitResult slice = fit_spectrum(map.f_GHz, col, mode, bath,
                                         {"gamma_s", "g_eff"}, opt);
    out.params["gamma_s"] = slice.params.at("gamma_s");
  } catch (const NumericsError&) {
    out.params["gamma_s"] = init.gamma_s_GHz;  // dispersion result stands
  }
  return out;
}

/// Shared implementation with dynamics: exposed here for ingested traces.
inline DecayAnalysis fit_double_exponential(const DecayTrace& trace) {
  return analyze_decay(trace);
}

// ---------------------------------------------------------------------------
// crystal-field calibration

struct Anchor {
  enum class Kind { transition_frequency, alc_field, alc_coupling };
  Kind kind = Kind::transition_frequency;
  int twom_a = 0, twom_b = 0;
  double b_mT = 0.0;          // transition_frequency: working field
  double window_lo_mT = 0.0;  // alc kinds: search interval
  double window_hi_mT = 0.0;
  double target = 0.0;  // GHz (frequencies, coupling) or mT (alc_field)
  double weight = 1.0;
};

struct CalibrationOptions {
  // Weight of the scaled ||cf - prior|| pull; 0 disables it. Four anchors
  // cannot identify five coefficients, so the default is strong enough to
  // hold the anchor-null directions (notably the second doublet splitting)
  // at the prior while gross anchor mismatches still dominate.
  double regularization = 10.0;
  double grid_step_mT = 0.25;
  double field_margin_mT = 15.0;
  bool coupling_is_half_gap = true;  // alc_coupling target = gap/2 (else gap)
  LMOptions lm;
};

namespace detail {

inline double eval_anchor(const LevelDiagram& dia, const Anchor& anchor,
                          bool half_gap) {
  switch (anchor.kind) {
    case Anchor::Kind::transition_frequency: {
      const int ba = dia.branch_of_twom(anchor.twom_a);
      const int bb = dia.branch_of_twom(anchor.twom_b);
      return std::abs(dia.energy_at(bb, anchor.b_mT) -
                      dia.energy_at(ba, anchor.b_mT));
    }
    case Anchor::Kind::alc_field:
    case Anchor::Kind::alc_coupling: {
      const AvoidedCrossing alc = find_alc(dia, anchor.twom_a, anchor.twom_b,
                                           anchor.window_lo_mT,
                                           anchor.window_hi_mT);
      if (anchor.kind == Anchor::Kind::alc_field) return alc.b_c_mT;
      return half_gap ? alc.g_lz_GHz : alc.gap_GHz;
    }
  }
  throw DataError("unknown anchor kind");
}

}  // namespace detail

/// Calibrate the five crystal-field coefficients against measured anchors
/// by damped least squares with a Tikhonov pull towards the prior. Without
/// regularization the problem needs at least as many anchors as
/// coefficients, otherwise it is flagged as underdetermined.
inline FitResult calibrate_crystal_field(const SpinSystem& base,
                                         const std::vector<Anchor>& anchors,
                                         const StevensCoefficients& prior,
                                         const CalibrationOptions& opt = {}) {
  if (anchors.size() < 3)
    throw DataError("calibrate_crystal_field: need at least 3 anchors");
  if (!(opt.regularization > 0) && anchors.size() < 5)
    throw NumericsError(
        "calibrate_crystal_field: underdetermined (fewer anchors than "
        "coefficients and no prior regularization)");

  double b_max = 0.0;
  for (const auto& a : anchors)
    b_max = std::max({b_max, a.b_mT, a.window_hi_mT});
  b_max += opt.field_margin_mT;
  const std::size_t npts =
      static_cast<std::size_t>(std::ceil(b_max / opt.grid_step_mT)) + 1;
  const std::vector<double> grid = linspace(0.0, b_max, npts);

  const Eigen::VectorXd prior_vec =
      (Eigen::VectorXd(5) << prior.b20, prior.b40, prior.b60, prior.b44,
       prior.b64).finished();
  // scale by the operator norms so that equal scaled drift means equal
  // spectral effect, whichever coefficient carries it
  const StevensOperators ops = stevens_operators(base.spin);
  Eigen::VectorXd scale(5);
  const Eigen::MatrixXcd* op_of[5] = {&ops.o20, &ops.o40, &ops.o60, &ops.o44,
                                      &ops.o64};
  for (int k = 0; k < 5; ++k) {
    const double opnorm = std::max(op_of[k]->cwiseAbs().maxCoeff(), 1.0);
    scale(k) = std::max(std::abs(prior_vec(k)), 1.0 / opnorm);
  }

  auto residuals = [&](const Eigen::VectorXd& p) {
    SpinSystem sys = base;
    sys.cf = {p(0), p(1), p(2), p(3), p(4)};
    Eigen::VectorXd r(anchors.size() + (opt.regularization > 0 ? 5 : 0));
    LevelDiagram dia = sweep_levels(sys, grid);
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      double model;
      try {
        model = detail::eval_anchor(dia, anchors[k], opt.coupling_is_half_gap);
      } catch (const NoCrossingError&) {
        model = anchors[k].target * 10.0 + 1.0;  // penalty: crossing left window
      }
      r(k) = anchors[k].weight * (model - anchors[k].target);
    }
    if (opt.regularization > 0) {
      const double w = std::sqrt(opt.regularization);
      for (int k = 0; k < 5; ++k)
        r(anchors.size() + k) = w * (p(k) - prior_vec(k)) / scale(k);
    }
    return r;
  };

  const LMResult lm = levenberg_marquardt(residuals, prior_vec, opt.lm);
  if (!lm.converged)
    throw NumericsError("calibrate_crystal_field did not converge");

  FitResult out;
  out.params["b20"] = lm.params(0);
  out.params["b40"] = lm.params(1);
  out.params["b60"] = lm.params(2);
  out.params["b44"] = lm.params(3);
  out.params["b64"] = lm.params(4);
  out.residual = lm.rms;
  out.iterations = lm.iterations;
  out.converged = lm.converged;
  return out;
}

}  // namespace spincav
