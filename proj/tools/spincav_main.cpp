// Command-line front end: scenario runs and dataset fitting for the
// spin-cavity simulator. Every command reads one config file and writes
// plot-ready CSV plus a JSON manifest into the output directory.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "spincav/spincav.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"spin-cavity simulator and fitting toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  app.add_option("-c,--config", config_path, "configuration file")->required();
  app.add_option("-o,--out", out_dir, "output directory");

  auto* levels = app.add_subcommand("levels", "energy levels vs field");
  spincav::LevelsOptions lv;
  levels->add_option("--b-min", lv.b_min_mT, "start field, mT");
  levels->add_option("--b-max", lv.b_max_mT, "end field, mT");
  levels->add_option("--steps", lv.steps, "grid points");

  auto* transitions =
      app.add_subcommand("transitions", "transition frequency curves");
  spincav::TransitionsOptions tr;
  std::vector<std::string> pair_args;
  transitions->add_option("--b-min", tr.b_min_mT, "start field, mT");
  transitions->add_option("--b-max", tr.b_max_mT, "end field, mT");
  transitions->add_option("--steps", tr.steps, "grid points");
  transitions->add_option("--pair", pair_args,
                          "level pair like '+7/2>+5/2' (repeatable)");

  auto* lz =
      app.add_subcommand("lz", "field sweep protocol with crossing transfer");

  auto* gtemp =
      app.add_subcommand("gtemp", "coupling strengths vs temperature");
  spincav::GtempOptions gt;
  gtemp->add_option("--t-min", gt.t_min_K, "lowest temperature, K");
  gtemp->add_option("--t-max", gt.t_max_K, "highest temperature, K");
  gtemp->add_option("--steps", gt.steps, "temperature points");

  auto* transmission =
      app.add_subcommand("transmission", "cavity transmission map");
  spincav::TransmissionOptions tm;
  std::string population = "frozen";
  transmission->add_option("--mode", tm.mode_label, "cavity mode label")
      ->required();
  transmission->add_option("--b-min", tm.b_min_mT, "start field, mT");
  transmission->add_option("--b-max", tm.b_max_mT, "end field, mT");
  transmission->add_option("--b-steps", tm.b_steps, "field columns");
  transmission->add_option("--f-span", tm.f_half_span_GHz,
                           "half span around f0, GHz");
  transmission->add_option("--f-steps", tm.f_steps, "frequency points");
  transmission->add_option("--population", population,
                           "frozen | equilibrium | all");

  auto* decay = app.add_subcommand("decay", "pumped population decay traces");
  spincav::DecayOptions dc;
  decay->add_option("--probe", dc.probe_name, "probe section name");
  decay->add_option("--points", dc.trace_points, "trace points");

  auto* fit = app.add_subcommand("fit", "fit a dataset");
  spincav::FitOptions ft;
  fit->add_option("kind", ft.kind, "map | spectrum | decay")->required();
  std::string data_path;
  fit->add_option("data", data_path, "input CSV")->required();
  fit->add_option("--mode", ft.mode_label, "cavity mode label");

  auto* calibrate =
      app.add_subcommand("calibrate", "calibrate crystal-field coefficients");
  std::string anchors_path;
  calibrate->add_option("anchors", anchors_path, "anchors JSON")->required();

  CLI11_PARSE(app, argc, argv);

  const spincav::Config cfg = spincav::load_config(config_path);

  if (levels->parsed()) {
    spincav::cmd_levels(cfg, lv, out_dir);
  } else if (transitions->parsed()) {
    for (const auto& arg : pair_args) {
      const auto gt_pos = arg.find('>');
      if (gt_pos == std::string::npos)
        throw spincav::ConfigError("--pair expects 'a>b', got '" + arg + "'");
      tr.pairs.emplace_back(spincav::parse_label(arg.substr(0, gt_pos)),
                            spincav::parse_label(arg.substr(gt_pos + 1)));
    }
    spincav::cmd_transitions(cfg, tr, out_dir);
  } else if (lz->parsed()) {
    spincav::cmd_lz(cfg, out_dir);
  } else if (gtemp->parsed()) {
    spincav::cmd_gtemp(cfg, gt, out_dir);
  } else if (transmission->parsed()) {
    if (population == "frozen")
      tm.population = spincav::TransmissionOptions::Population::frozen;
    else if (population == "equilibrium")
      tm.population = spincav::TransmissionOptions::Population::equilibrium;
    else if (population == "all")
      tm.population = spincav::TransmissionOptions::Population::all;
    else
      throw spincav::ConfigError("--population must be frozen, equilibrium or all");
    spincav::cmd_transmission(cfg, tm, out_dir);
  } else if (decay->parsed()) {
    spincav::cmd_decay(cfg, dc, out_dir);
  } else if (fit->parsed()) {
    ft.data_path = data_path;
    spincav::cmd_fit(cfg, ft, out_dir);
  } else if (calibrate->parsed()) {
    spincav::cmd_calibrate(cfg, anchors_path, out_dir);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const spincav::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const spincav::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const spincav::NumericsError& e) {
    std::cerr << "numerics error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
