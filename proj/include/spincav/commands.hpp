#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spincav/cavity.hpp"
#include "spincav/config.hpp"
#include "spincav/csv.hpp"
#include "spincav/dynamics.hpp"
#include "spincav/ensemble.hpp"
#include "spincav/fitkit.hpp"
#include "spincav/manifest.hpp"
#include "spincav/spectra.hpp"

namespace spincav {

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory: " + dir.string());
}

inline void write_json(const std::filesystem::path& path,
                       const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path.string());
  out << doc.dump(2) << "\n";
}

inline void write_csv_raw(const std::filesystem::path& path,
                          const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (std::size_t k = 0; k < header.size(); ++k)
    out << (k ? "," : "") << header[k];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k)
      out << (k ? "," : "") << row[k];
    out << "\n";
  }
}

inline const ProbeDef& probe_by_name(const Config& cfg,
                                     const std::string& name) {
  for (const auto& p : cfg.probes)
    if (p.name == name) return p;
  throw ConfigError("no [probe." + name + "] section in config");
}

inline const ProbeDef& probe_for_mode(const Config& cfg,
                                      const std::string& mode_label) {
  for (const auto& p : cfg.probes)
    if (p.mode_label == mode_label) return p;
  throw ConfigError("no probe uses mode " + mode_label);
}

}  // namespace detail

// --------------------------------------------------------------------- levels

struct LevelsOptions {
  double b_min_mT = 0.0;
  double b_max_mT = 100.0;
  int steps = 1001;
};

inline std::vector<std::filesystem::path> cmd_levels(
    const Config& cfg, const LevelsOptions& opt,
    const std::filesystem::path& out_dir) {
  if (opt.steps < 2) throw ConfigError("levels: steps must be >= 2");
  detail::ensure_dir(out_dir);
  const LevelDiagram dia =
      sweep_levels(cfg.spin, linspace(opt.b_min_mT, opt.b_max_mT,
                                      static_cast<std::size_t>(opt.steps)));
  std::vector<std::string> header = {"B_mT"};
  for (int k = 0; k < dia.branches(); ++k)
    header.push_back("E" + std::to_string(k + 1) + "[" + dia.branch_label(k) +
                     "]_GHz");
  std::vector<std::vector<double>> rows;
  for (std::size_t p = 0; p < dia.b_grid.size(); ++p) {
    std::vector<double> row = {dia.b_grid[p]};
    for (int k = 0; k < dia.branches(); ++k) row.push_back(dia.energies(p, k));
    rows.push_back(std::move(row));
  }
  const auto csv = out_dir / "levels.csv";
  write_csv(csv, header, rows);
  const auto manifest = write_manifest(out_dir, "levels", cfg.hash, {csv});
  return {csv, manifest};
}

// ---------------------------------------------------------------- transitions

struct TransitionsOptions {
  double b_min_mT = 0.0;
  double b_max_mT = 100.0;
  int steps = 1001;
  std::vector<std::pair<int, int>> pairs;  // empty: probe pairs from config
};

inline std::vector<std::filesystem::path> cmd_transitions(
    const Config& cfg, const TransitionsOptions& opt,
    const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  std::vector<std::pair<int, int>> pairs = opt.pairs;
  if (pairs.empty()) {
    for (const auto& probe : cfg.probes)
      pairs.emplace_back(probe.lower_twom, probe.upper_twom);
    if (pairs.empty())
      throw ConfigError("transitions: no pairs given and no probes in config");
  }
  const auto curves =
      transition_map(cfg.spin, linspace(opt.b_min_mT, opt.b_max_mT,
                                        static_cast<std::size_t>(opt.steps)),
                     pairs);
  std::vector<std::vector<std::string>> rows;
  for (const auto& curve : curves)
    for (std::size_t p = 0; p < curve.b_mT.size(); ++p)
      rows.push_back({format_double(curve.b_mT[p]),
                      format_double(curve.f_GHz[p]), curve.pair_label});
  const auto csv = out_dir / "transitions.csv";
  detail::write_csv_raw(csv, {"B_mT", "f_GHz", "pair_label"}, rows);
  const auto manifest = write_manifest(out_dir, "transitions", cfg.hash, {csv});
  return {csv, manifest};
}

// ------------------------------------------------------------------------- lz

inline std::vector<std::filesystem::path> cmd_lz(
    const Config& cfg, const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  const PopulationVector initial =
      frozen_state(cfg.spin, cfg.protocol.temperature_K, cfg.n_total);
  const SweepResult result =
      run_sweep(cfg.spin, cfg.protocol, initial, cfg.numerics.grid_step_mT,
                cfg.numerics.alc_window_lo_mT, cfg.numerics.alc_window_hi_mT);

  const int n = static_cast<int>(initial.counts.size());
  const int two_s = static_cast<int>(std::lround(2.0 * cfg.spin.spin));
  std::vector<std::string> header = {"B_mT"};
  for (int k = 0; k < n; ++k)
    header.push_back("n[" + label_name(two_s - 2 * k) + "]");
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < result.b_mT.size(); ++r) {
    std::vector<double> row = {result.b_mT[r]};
    for (int k = 0; k < n; ++k) row.push_back(result.fractions(r, k));
    rows.push_back(std::move(row));
  }
  const auto csv = out_dir / "lz_trajectory.csv";
  write_csv(csv, header, rows);

  nlohmann::json summary;
  summary["N_total"] = cfg.n_total;
  for (const auto& probe : cfg.probes) {
    const double g0 = single_spin_coupling_GHz(
        cfg.spin.g_factor, cfg.mode(probe.mode_label), cfg.crystal);
    const int idx = (two_s - probe.lower_twom) / 2;
    const double n_up = initial.counts(idx);
    const double n_down = result.final_state.counts(idx);
    nlohmann::json entry;
    entry["mode"] = probe.mode_label;
    entry["level"] = label_name(probe.lower_twom);
    entry["g0_GHz"] = g0;
    entry["g_up_GHz"] = effective_coupling(g0, n_up);
    entry["g_down_GHz"] = effective_coupling(g0, n_down);
    entry["N_up"] = n_up;
    entry["N_down"] = n_down;
    entry["ratio_down_over_up"] =
        n_up > 0 ? std::sqrt(n_down / n_up)
                 : std::numeric_limits<double>::quiet_NaN();
    summary["probes"][probe.name] = entry;
  }
  summary["events"] = nlohmann::json::array();
  for (const auto& ev : result.events) {
    nlohmann::json e;
    e["pair"] = {label_name(ev.twom_a), label_name(ev.twom_b)};
    e["b_c_mT"] = ev.b_c_mT;
    e["gap_GHz"] = ev.gap_GHz;
    e["g_lz_GHz"] = ev.g_lz_GHz;
    e["dEdB_GHz_per_mT"] = ev.slope_GHz_per_mT;
    e["p_diabatic"] = ev.p_diabatic;
    summary["events"].push_back(e);
  }
  const auto json_path = out_dir / "lz_summary.json";
  detail::write_json(json_path, summary);
  const auto manifest =
      write_manifest(out_dir, "lz", cfg.hash, {csv, json_path});
  return {csv, json_path, manifest};
}

// ---------------------------------------------------------------------- gtemp

struct GtempOptions {
  double t_min_K = 0.020;
  double t_max_K = 0.200;
  int steps = 37;
};

inline std::vector<std::filesystem::path> cmd_gtemp(
    const Config& cfg, const GtempOptions& opt,
    const std::filesystem::path& out_dir) {
  if (opt.steps < 2) throw ConfigError("gtemp: steps must be >= 2");
  if (cfg.probes.empty()) throw ConfigError("gtemp: no probes in config");
  detail::ensure_dir(out_dir);

  double b_max = 1.0;
  for (const auto& probe : cfg.probes) b_max = std::max(b_max, probe.b_mT);
  const LevelDiagram dia = sweep_levels(
      cfg.spin, linspace(0.0, b_max + 5.0,
                         static_cast<std::size_t>((b_max + 5.0) /
                                                  cfg.numerics.grid_step_mT) +
                             1));

  std::vector<double> temps(static_cast<std::size_t>(opt.steps));
  for (int k = 0; k < opt.steps; ++k)
    temps[k] = opt.t_min_K +
               (opt.t_max_K - opt.t_min_K) * double(k) / double(opt.steps - 1);

  std::vector<std::string> header = {"T_K"};
  std::vector<std::vector<double>> columns;  // per probe: up, down, eq
  for (const auto& probe : cfg.probes) {
    const double g0 = single_spin_coupling_GHz(
        cfg.spin.g_factor, cfg.mode(probe.mode_label), cfg.crystal);
    header.push_back("g_up[" + probe.name + "]_GHz");
    header.push_back("g_down[" + probe.name + "]_GHz");
    header.push_back("g_eq[" + probe.name + "]_GHz");
    columns.push_back(
        frozen_coupling_curve(cfg.spin, probe.lower_twom, g0, cfg.n_total, temps));
    // the post-crossing ensemble is thermal at the probe field, so g_down
    // is the equilibrium prediction by model identity
    const auto eq = equilibrium_coupling_curve(
        dia, Probe{probe.lower_twom, probe.b_mT}, g0, cfg.n_total, temps);
    columns.push_back(eq);
    columns.push_back(eq);
  }

  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < temps.size(); ++r) {
    std::vector<double> row = {temps[r]};
    for (const auto& col : columns) row.push_back(col[r]);
    rows.push_back(std::move(row));
  }
  const auto csv = out_dir / "gtemp.csv";
  write_csv(csv, header, rows);
  const auto manifest = write_manifest(out_dir, "gtemp", cfg.hash, {csv});
  return {csv, manifest};
}

// --------------------------------------------------------------- transmission

struct TransmissionOptions {
  std::string mode_label;
  double b_min_mT = 24.0;
  double b_max_mT = 28.0;
  int b_steps = 81;
  double f_half_span_GHz = 0.02;
  int f_steps = 1201;
  // population model for the probed level: frozen half, thermal, or all spins
  enum class Population { frozen, equilibrium, all } population = Population::frozen;
};

inline std::vector<std::filesystem::path> cmd_transmission(
    const Config& cfg, const TransmissionOptions& opt,
    const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  const CavityMode& mode = cfg.mode(opt.mode_label);
  const ProbeDef& probe = detail::probe_for_mode(cfg, opt.mode_label);
  const double g0 =
      single_spin_coupling_GHz(cfg.spin.g_factor, mode, cfg.crystal);

  const LevelDiagram dia = sweep_levels(
      cfg.spin,
      linspace(0.0, opt.b_max_mT + 5.0,
               static_cast<std::size_t>((opt.b_max_mT + 5.0) /
                                        cfg.numerics.grid_step_mT) +
                   1));
  const int lower = dia.branch_of_twom(probe.lower_twom);
  const int upper = dia.branch_of_twom(probe.upper_twom);
  const int two_s = static_cast<int>(std::lround(2.0 * cfg.spin.spin));
  const int lower_idx = (two_s - probe.lower_twom) / 2;

  std::vector<std::vector<double>> rows;
  for (int ib = 0; ib < opt.b_steps; ++ib) {
    const double b = opt.b_min_mT + (opt.b_max_mT - opt.b_min_mT) *
                                        (opt.b_steps == 1
                                             ? 0.0
                                             : double(ib) / (opt.b_steps - 1));
    double n_lower = 0.0;
    switch (opt.population) {
      case TransmissionOptions::Population::frozen:
        n_lower = frozen_state(cfg.spin, cfg.protocol.temperature_K, cfg.n_total)
                      .counts(lower_idx);
        break;
      case TransmissionOptions::Population::equilibrium: {
        Eigen::VectorXd energies(dia.branches());
        for (int k = 0; k < dia.branches(); ++k)
          energies(k) = dia.energy_at(k, b);
        n_lower = boltzmann(energies, cfg.protocol.temperature_K, cfg.n_total)
                      .counts(lower);
        break;
      }
      case TransmissionOptions::Population::all:
        n_lower = cfg.n_total;
        break;
    }
    SpinBath bath;
    bath.f_s_GHz =
        std::abs(dia.energy_at(upper, b) - dia.energy_at(lower, b));
    bath.gamma_s_GHz = cfg.gamma_s_GHz;
    bath.g_eff_GHz = effective_coupling(g0, n_lower);
    for (int jf = 0; jf < opt.f_steps; ++jf) {
      const double f = mode.f0_GHz +
                       opt.f_half_span_GHz *
                           (2.0 * jf / std::max(opt.f_steps - 1, 1) - 1.0);
      const double mag = std::abs(s21(f, mode, bath));
      rows.push_back({b, f, mag, db_from_linear(mag)});
    }
  }
  const auto csv = out_dir / ("transmission_" + opt.mode_label + ".csv");
  write_csv(csv, {"B_mT", "f_GHz", "s21_abs", "s21_db"}, rows);
  const auto manifest =
      write_manifest(out_dir, "transmission", cfg.hash, {csv});
  return {csv, manifest};
}

// ---------------------------------------------------------------------- decay

struct DecayOptions {
  std::string probe_name = "2";  // pumped probe (hybridised transition)
  int trace_points = 2000;
};

inline std::vector<std::filesystem::path> cmd_decay(
    const Config& cfg, const DecayOptions& opt,
    const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  if (cfg.dynamics.p_inc_W.empty())
    throw ConfigError("decay: [dynamics] P_inc_W is empty");
  const ProbeDef& probe = detail::probe_by_name(cfg, opt.probe_name);
  const CavityMode& mode = cfg.mode(probe.mode_label);
  const double g0 =
      single_spin_coupling_GHz(cfg.spin.g_factor, mode, cfg.crystal);

  std::vector<std::filesystem::path> outputs;
  nlohmann::json analyses = nlohmann::json::array();
  for (std::size_t k = 0; k < cfg.dynamics.p_inc_W.size(); ++k) {
    const double p_inc = cfg.dynamics.p_inc_W[k];
    const double n_cav = photon_number(p_inc, mode);
    const LambdaSystem sys{pump_rate(g0, n_cav, cfg.gamma_s_GHz),
                           cfg.dynamics.gamma21_per_s,
                           cfg.dynamics.gamma23_per_s};
    const auto ev = eigen_rates(sys);
    if (!(ev[2] < 0))
      throw NumericsError("decay: all rates vanish, nothing evolves");
    const double t_lo = 0.01 / std::abs(ev[2]);
    const double t_hi =
        8.0 / (std::abs(ev[1]) > 0 ? std::abs(ev[1]) : std::abs(ev[2]));
    std::vector<double> grid(static_cast<std::size_t>(opt.trace_points));
    for (int i = 0; i < opt.trace_points; ++i)
      grid[i] = t_lo * std::pow(t_hi / t_lo, double(i) / (opt.trace_points - 1));

    const Eigen::Vector3d n0(0.5 * cfg.n_total, 0.0, 0.5 * cfg.n_total);
    const RateTrajectory traj = propagate(rate_matrix(sys), n0, grid);
    DecayTrace trace = to_decay_trace(traj);
    trace_to_transmission(trace, mode, g0, cfg.gamma_s_GHz);

    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < trace.t_s.size(); ++r)
      rows.push_back({trace.t_s[r], trace.n1[r] / cfg.n_total, trace.s21[r]});
    const auto csv =
        out_dir / ("decay_P" + std::to_string(k + 1) + ".csv");
    write_csv(csv, {"t_s", "n1_fraction", "s21_abs"}, rows);
    outputs.push_back(csv);

    nlohmann::json entry;
    entry["P_inc_W"] = p_inc;
    entry["N_cav"] = n_cav;
    entry["W_per_s"] = sys.pump_per_s;
    entry["lambda_slow_per_s"] = ev[1];
    entry["lambda_fast_per_s"] = ev[2];
    entry["trace"] = csv.filename().string();
    try {
      const DecayAnalysis fit = analyze_decay(trace);
      entry["tau_i_s"] = fit.tau_i_s;
      entry["tau_f_s"] = fit.tau_f_s;
      entry["t_star_s"] = fit.t_star_s;
      entry["residual"] = fit.residual;
    } catch (const DataError& e) {
      entry["analysis_error"] = e.what();  // e.g. flat trace at zero power
    }
    analyses.push_back(entry);
  }
  const auto json_path = out_dir / "decay_analysis.json";
  detail::write_json(json_path, analyses);
  outputs.push_back(json_path);
  const auto manifest = write_manifest(out_dir, "decay", cfg.hash, outputs);
  outputs.push_back(manifest);
  return outputs;
}

// ------------------------------------------------------------------------ fit

struct FitOptions {
  std::string kind;  // map | spectrum | decay
  std::filesystem::path data_path;
  std::string mode_label;  // empty: pick by frequency range
};

namespace detail {

inline const CavityMode& pick_mode(const Config& cfg, const std::string& label,
                                   double f_center_GHz) {
  if (!label.empty()) return cfg.mode(label);
  const CavityMode* best = nullptr;
  for (const auto& m : cfg.modes)
    if (!best || std::abs(m.f0_GHz - f_center_GHz) <
                     std::abs(best->f0_GHz - f_center_GHz))
      best = &m;
  if (!best) throw ConfigError("config defines no modes");
  return *best;
}

inline TransmissionMap map_from_table(const CsvTable& table) {
  const std::size_t cb = table.column("B_mT");
  const std::size_t cf = table.column("f_GHz");
  const bool has_abs = table.has_column("s21_abs");
  const std::size_t cv =
      has_abs ? table.column("s21_abs") : table.column("s21_db");
  std::vector<double> bs, fs;
  for (const auto& row : table.rows) {
    if (bs.empty() || row[cb] != bs.back()) bs.push_back(row[cb]);
    if (bs.size() == 1) fs.push_back(row[cf]);
  }
  TransmissionMap map;
  map.b_mT = bs;
  map.f_GHz = fs;
  if (table.rows.size() != bs.size() * fs.size())
    throw DataError("transmission map is not a complete (B, f) grid");
  map.values.resize(bs.size(), fs.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::size_t ib = r / fs.size();
    const std::size_t jf = r % fs.size();
    const double v = table.rows[r][cv];
    map.values(ib, jf) = has_abs ? v : linear_from_db(v);
  }
  map.validate();
  return map;
}

}  // namespace detail

inline std::vector<std::filesystem::path> cmd_fit(
    const Config& cfg, const FitOptions& opt,
    const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  nlohmann::json doc;
  doc["kind"] = opt.kind;
  doc["data"] = opt.data_path.string();

  if (opt.kind == "map") {
    const TransmissionMap map = detail::map_from_table(read_csv(opt.data_path));
    const double f_center =
        0.5 * (map.f_GHz.front() + map.f_GHz.back());
    const CavityMode& mode = detail::pick_mode(cfg, opt.mode_label, f_center);
    const ProbeDef& probe = detail::probe_for_mode(cfg, mode.label);
    const double g0 =
        single_spin_coupling_GHz(cfg.spin.g_factor, mode, cfg.crystal);

    MapFitInit init;
    init.mode = mode;
    init.g_eff_GHz = effective_coupling(g0, 0.5 * cfg.n_total);
    init.gamma_s_GHz = cfg.gamma_s_GHz;
    init.peak_prominence = cfg.numerics.peak_prominence;
    // seed the spin-line slope and crossing field from the level diagram
    const double b_hi = map.b_mT.back() + 10.0;
    const LevelDiagram dia = sweep_levels(
        cfg.spin,
        linspace(0.0, b_hi,
                 static_cast<std::size_t>(b_hi / cfg.numerics.grid_step_mT) + 1));
    const int lo = dia.branch_of_twom(probe.lower_twom);
    const int up = dia.branch_of_twom(probe.upper_twom);
    auto fs_at = [&](double b) {
      return std::abs(dia.energy_at(up, b) - dia.energy_at(lo, b));
    };
    const double b_mid = 0.5 * (map.b_mT.front() + map.b_mT.back());
    init.fs_slope_GHz_per_mT = (fs_at(b_mid + 0.5) - fs_at(b_mid - 0.5));
    init.b_crossing_mT =
        b_mid + (mode.f0_GHz - fs_at(b_mid)) / init.fs_slope_GHz_per_mT;

    const FitResult fit = fit_alc_map(map, init);
    doc["params"] = fit.params;
    doc["residual"] = fit.residual;
    doc["iterations"] = fit.iterations;
    doc["converged"] = fit.converged;
  } else if (opt.kind == "spectrum") {
    const CsvTable table = read_csv(opt.data_path);
    const std::size_t cf = table.column("f_GHz");
    const bool has_abs = table.has_column("s21_abs");
    const std::size_t cv =
        has_abs ? table.column("s21_abs") : table.column("s21_db");
    std::vector<double> f, v;
    for (const auto& row : table.rows) {
      f.push_back(row[cf]);
      v.push_back(has_abs ? row[cv] : linear_from_db(row[cv]));
    }
    if (f.empty()) throw DataError("spectrum CSV has no rows");
    const double f_center = 0.5 * (f.front() + f.back());
    CavityMode mode = detail::pick_mode(cfg, opt.mode_label, f_center);

    // self-seed: strongest maximum is the cavity line, second the spin line
    std::size_t imax = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k] > v[imax]) imax = k;
    mode.f0_GHz = f[imax];
    SpinBath bath;
    bath.gamma_s_GHz = cfg.gamma_s_GHz;
    double second = f[imax];
    double best2 = -1.0;
    for (std::size_t k = 1; k + 1 < v.size(); ++k) {
      if (v[k] >= v[k - 1] && v[k] > v[k + 1] &&
          std::abs(f[k] - f[imax]) > 4.0 * mode.kappa_c_GHz) {
        if (v[k] > best2) { best2 = v[k]; second = f[k]; }
      }
    }
    bath.f_s_GHz = second;
    bath.g_eff_GHz = std::max(std::abs(second - f[imax]) * 0.5, 1e-6);
    const FitResult fit = fit_spectrum(
        f, v, mode, bath, {"f0", "kappa_c", "gamma_d", "f_s", "gamma_s", "g_eff"});
    doc["params"] = fit.params;
    doc["residual"] = fit.residual;
    doc["iterations"] = fit.iterations;
    doc["converged"] = fit.converged;
  } else if (opt.kind == "decay") {
    const CsvTable table = read_csv(opt.data_path);
    const std::size_t ct = table.column("t_s");
    DecayTrace trace;
    if (table.has_column("n1_fraction")) {
      const std::size_t cn = table.column("n1_fraction");
      for (const auto& row : table.rows) {
        trace.t_s.push_back(row[ct]);
        trace.n1.push_back(row[cn] * cfg.n_total);
      }
    } else {
      const bool has_abs = table.has_column("s21_abs");
      const std::size_t cv =
          has_abs ? table.column("s21_abs") : table.column("s21_db");
      const ProbeDef& probe = detail::probe_by_name(cfg, "2");
      const CavityMode& mode = cfg.mode(probe.mode_label);
      const double g0 =
          single_spin_coupling_GHz(cfg.spin.g_factor, mode, cfg.crystal);
      for (const auto& row : table.rows) {
        trace.t_s.push_back(row[ct]);
        const double s = has_abs ? row[cv] : linear_from_db(row[cv]);
        trace.n1.push_back(
            resonance_population(s, mode, g0, cfg.gamma_s_GHz));
      }
    }
    const DecayAnalysis fit = fit_double_exponential(trace);
    doc["params"] = {{"tau_i_s", fit.tau_i_s},
                     {"tau_f_s", fit.tau_f_s},
                     {"t_star_s", fit.t_star_s}};
    doc["residual"] = fit.residual;
    doc["converged"] = true;
  } else {
    throw ConfigError("fit: kind must be map, spectrum or decay");
  }

  const auto json_path = out_dir / ("fit_" + opt.kind + ".json");
  detail::write_json(json_path, doc);
  const auto manifest = write_manifest(out_dir, "fit", cfg.hash, {json_path});
  return {json_path, manifest};
}

// ------------------------------------------------------------------ calibrate

inline std::vector<Anchor> read_anchors(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path.string());
  std::ifstream in(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!doc.contains("anchors") || !doc["anchors"].is_array() ||
      doc["anchors"].empty())
    throw DataError(path.string() + ": no anchors defined");
  std::vector<Anchor> anchors;
  for (const auto& item : doc["anchors"]) {
    Anchor a;
    const std::string kind = item.at("kind").get<std::string>();
    if (kind == "transition_frequency") a.kind = Anchor::Kind::transition_frequency;
    else if (kind == "alc_field") a.kind = Anchor::Kind::alc_field;
    else if (kind == "alc_coupling") a.kind = Anchor::Kind::alc_coupling;
    else throw DataError("unknown anchor kind: " + kind);
    a.twom_a = parse_label(item.at("pair").at(0).get<std::string>());
    a.twom_b = parse_label(item.at("pair").at(1).get<std::string>());
    if (a.kind == Anchor::Kind::transition_frequency) {
      a.b_mT = item.at("B_mT").get<double>();
      a.target = item.at("target_GHz").get<double>();
    } else if (a.kind == Anchor::Kind::alc_field) {
      a.window_lo_mT = item.at("window_mT").at(0).get<double>();
      a.window_hi_mT = item.at("window_mT").at(1).get<double>();
      a.target = item.at("target_mT").get<double>();
    } else {
      a.window_lo_mT = item.at("window_mT").at(0).get<double>();
      a.window_hi_mT = item.at("window_mT").at(1).get<double>();
      a.target = item.at("target_GHz").get<double>();
    }
    if (item.contains("weight")) a.weight = item.at("weight").get<double>();
    anchors.push_back(a);
  }
  return anchors;
}

inline std::vector<std::filesystem::path> cmd_calibrate(
    const Config& cfg, const std::filesystem::path& anchors_path,
    const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  const std::vector<Anchor> anchors = read_anchors(anchors_path);

  CalibrationOptions opt;
  opt.coupling_is_half_gap = cfg.numerics.halfgap_convention_half;
  const FitResult fit =
      calibrate_crystal_field(cfg.spin, anchors, cfg.spin.cf, opt);

  // evaluate the calibrated model against every anchor
  SpinSystem calibrated = cfg.spin;
  calibrated.cf = {fit.params.at("b20"), fit.params.at("b40"),
                   fit.params.at("b60"), fit.params.at("b44"),
                   fit.params.at("b64")};
  double b_max = 0.0;
  for (const auto& a : anchors)
    b_max = std::max({b_max, a.b_mT, a.window_hi_mT});
  const LevelDiagram dia = sweep_levels(
      calibrated,
      linspace(0.0, b_max + opt.field_margin_mT,
               static_cast<std::size_t>((b_max + opt.field_margin_mT) /
                                        opt.grid_step_mT) +
                   1));

  nlohmann::json doc;
  doc["params"] = fit.params;
  doc["residual"] = fit.residual;
  doc["iterations"] = fit.iterations;
  doc["converged"] = fit.converged;
  doc["anchors"] = nlohmann::json::array();
  for (const auto& a : anchors) {
    nlohmann::json entry;
    entry["pair"] = {label_name(a.twom_a), label_name(a.twom_b)};
    entry["target"] = a.target;
    entry["model"] =
        detail::eval_anchor(dia, a, opt.coupling_is_half_gap);
    doc["anchors"].push_back(entry);
  }
  const auto json_path = out_dir / "calibration.json";
  detail::write_json(json_path, doc);

  // config fragment, ready to paste into the [spin] section
  const auto frag_path = out_dir / "calibrated_spin.ini";
  {
    std::ofstream out(frag_path);
    out << "[spin]\n";
    out << "S = " << format_double(cfg.spin.spin) << "\n";
    out << "g_factor = " << format_double(cfg.spin.g_factor) << "\n";
    out << "b20_GHz = " << format_double(fit.params.at("b20")) << "\n";
    out << "b40_GHz = " << format_double(fit.params.at("b40")) << "\n";
    out << "b60_GHz = " << format_double(fit.params.at("b60")) << "\n";
    out << "b44_GHz = " << format_double(fit.params.at("b44")) << "\n";
    out << "b64_GHz = " << format_double(fit.params.at("b64")) << "\n";
    out << "tilt_rad = " << format_double(cfg.spin.tilt_rad) << "\n";
  }
  const auto manifest =
      write_manifest(out_dir, "calibrate", cfg.hash, {json_path, frag_path});
  return {json_path, frag_path, manifest};
}

}  // namespace spincav
