#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "spincav/commands.hpp"

using namespace spincav;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = fs::path(SPINCAV_SOURCE_DIR);
const fs::path kConfig = kSource / "config" / "gdvo4.ini";

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("spincav_cmd_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  nlohmann::json doc;
  in >> doc;
  return doc;
}

const Config& config() {
  static const Config cfg = load_config(kConfig);
  return cfg;
}

}  // namespace

TEST_CASE("cmd_levels: branch structure, row count and determinism") {
  const fs::path dir = temp_dir("levels");
  LevelsOptions opt;
  opt.b_min_mT = 0.0;
  opt.b_max_mT = 100.0;
  opt.steps = 1001;
  const auto outputs = cmd_levels(config(), opt, dir);
  const CsvTable table = read_csv(outputs[0]);
  REQUIRE(table.header.size() == 9);
  REQUIRE(table.rows.size() == 1001);

  // four near-degenerate pairs at B = 0
  std::vector<double> e0(table.rows[0].begin() + 1, table.rows[0].end());
  std::sort(e0.begin(), e0.end());
  for (int pair = 0; pair < 4; ++pair)
    CHECK(e0[2 * pair + 1] - e0[2 * pair] < 1e-3);

  // continuous branches: bounded steps between rows
  for (std::size_t r = 1; r < table.rows.size(); ++r)
    for (std::size_t c = 1; c < 9; ++c)
      CHECK(std::abs(table.rows[r][c] - table.rows[r - 1][c]) < 0.1);

  SECTION("steps = 2 gives exactly two rows") {
    const fs::path dir2 = temp_dir("levels2");
    LevelsOptions two = opt;
    two.steps = 2;
    const auto out2 = cmd_levels(config(), two, dir2);
    CHECK(read_csv(out2[0]).rows.size() == 2);
  }

  SECTION("reruns are byte-identical") {
    const fs::path dir3 = temp_dir("levels3");
    const auto out3 = cmd_levels(config(), opt, dir3);
    CHECK(file_bytes(outputs[0]) == file_bytes(out3[0]));
  }

  SECTION("manifest written with the config hash") {
    const auto doc = read_json_file(dir / "levels_manifest.json");
    CHECK(doc["command"] == "levels");
    CHECK(doc["config_hash"] == config().hash);
    CHECK(doc["outputs"].size() == 1);
  }
}

TEST_CASE("cmd_transitions: long-format curves for the probe pairs") {
  const fs::path dir = temp_dir("transitions");
  TransitionsOptions opt;
  opt.b_min_mT = 20.0;
  opt.b_max_mT = 50.0;
  opt.steps = 61;
  const auto outputs = cmd_transitions(config(), opt, dir);
  std::ifstream in(outputs[0]);
  std::string header;
  std::getline(in, header);
  CHECK(header == "B_mT,f_GHz,pair_label");
  std::size_t rows = 0;
  std::string line;
  bool saw_probe1 = false;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find("-7/2>-5/2") != std::string::npos) saw_probe1 = true;
  }
  CHECK(rows == 2 * 61);
  CHECK(saw_probe1);
}

TEST_CASE("cmd_lz: summary reproduces the hysteresis numbers") {
  const fs::path dir = temp_dir("lz");
  const auto outputs = cmd_lz(config(), dir);
  const auto summary = read_json_file(outputs[1]);

  const auto& p1 = summary["probes"]["1"];
  const auto& p2 = summary["probes"]["2"];
  CHECK(p2["g_down_GHz"].get<double>() < 1e-15);  // locked level fully drained
  CHECK(p1["ratio_down_over_up"].get<double>() ==
        Approx(std::sqrt(2.0)).margin(1e-6));
  // measured scenario values: 2.6 / 3.7 / 2.0 MHz
  CHECK(p1["g_up_GHz"].get<double>() == Approx(2.6e-3).epsilon(0.01));
  CHECK(p1["g_down_GHz"].get<double>() == Approx(3.7e-3).epsilon(0.01));
  CHECK(p2["g_up_GHz"].get<double>() == Approx(2.0e-3).epsilon(0.01));

  // trajectory rows conserve the total
  const CsvTable traj = read_csv(outputs[0]);
  for (const auto& row : traj.rows) {
    double sum = 0.0;
    for (std::size_t c = 1; c < row.size(); ++c) sum += row[c];
    CHECK(sum == Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("cmd_lz: turning below the crossing leaves ratios at one") {
  const fs::path dir = temp_dir("lz_low");
  Config cfg = config();
  cfg.protocol.b_turn_mT = 45.0;
  cfg.protocol.b_end_mT = 26.0;
  const auto outputs = cmd_lz(cfg, dir);
  const auto summary = read_json_file(outputs[1]);
  CHECK(summary["probes"]["1"]["ratio_down_over_up"].get<double>() ==
        Approx(1.0).margin(1e-9));
  CHECK(summary["probes"]["2"]["ratio_down_over_up"].get<double>() ==
        Approx(1.0).margin(1e-9));
}

TEST_CASE("cmd_gtemp: frozen curves lock and equilibrium identity holds") {
  const fs::path dir = temp_dir("gtemp");
  GtempOptions opt;
  opt.t_min_K = 0.020;
  opt.t_max_K = 0.200;
  opt.steps = 19;
  const auto outputs = cmd_gtemp(config(), opt, dir);
  const CsvTable table = read_csv(outputs[0]);
  const std::size_t up1 = table.column("g_up[1]_GHz");
  const std::size_t down1 = table.column("g_down[1]_GHz");
  const std::size_t eq1 = table.column("g_eq[1]_GHz");
  const std::size_t up2 = table.column("g_up[2]_GHz");
  for (const auto& row : table.rows) {
    CHECK(row[down1] == row[eq1]);  // model identity
    CHECK(row[up1] > 0.0);
  }
  // below 50 mK the frozen occupations of |+-7/2> are equal, so the two
  // frozen couplings differ only by the mode g0 ratio
  const double g0_ratio = single_spin_coupling_GHz(config().spin.g_factor,
                                                   config().mode("WGH311"),
                                                   config().crystal) /
                          single_spin_coupling_GHz(config().spin.g_factor,
                                                   config().mode("WGH211"),
                                                   config().crystal);
  CHECK(table.rows[0][up1] / table.rows[0][up2] ==
        Approx(g0_ratio).margin(1e-6));
}

TEST_CASE("cmd_transmission: doublet splitting and dB bookkeeping") {
  const fs::path dir = temp_dir("transmission");
  TransmissionOptions opt;
  opt.mode_label = "WGH211";
  opt.b_min_mT = 42.0;
  opt.b_max_mT = 44.5;
  opt.b_steps = 26;
  opt.f_half_span_GHz = 0.012;
  opt.f_steps = 3001;
  opt.population = TransmissionOptions::Population::frozen;
  const auto outputs = cmd_transmission(config(), opt, dir);
  const CsvTable table = read_csv(outputs[0]);

  // dB column is 20 log10 of the linear one
  for (std::size_t r = 0; r < table.rows.size(); r += 97)
    CHECK(table.rows[r][3] ==
          Approx(20.0 * std::log10(table.rows[r][2])).margin(1e-9));

  // the crossing region shows two branches; their minimum separation over
  // the field columns is the full splitting 2 g_eff
  const TransmissionMap map = detail::map_from_table(table);
  const auto peaks = detail::extract_peaks(map, 0.05);
  double min_sep = 1e9;
  for (std::size_t a = 0; a < peaks.size(); ++a)
    for (std::size_t b = a + 1; b < peaks.size(); ++b)
      if (peaks[a].b_mT == peaks[b].b_mT)
        min_sep =
            std::min(min_sep, std::abs(peaks[a].f_GHz - peaks[b].f_GHz));
  const Config& cfg = config();
  const double g0 = single_spin_coupling_GHz(cfg.spin.g_factor,
                                             cfg.mode("WGH211"), cfg.crystal);
  const double g_eff = effective_coupling(g0, 0.5 * cfg.n_total);
  CHECK(min_sep == Approx(2.0 * g_eff).epsilon(0.05));
}

TEST_CASE("cmd_transmission: empty level gives a single Lorentzian ridge") {
  const fs::path dir = temp_dir("transmission_bare");
  TransmissionOptions opt;
  opt.mode_label = "WGH211";
  opt.b_min_mT = 42.5;
  opt.b_max_mT = 43.5;
  opt.b_steps = 3;
  opt.f_half_span_GHz = 0.004;
  opt.f_steps = 801;
  // at 20 mK thermal equilibrium the |+7/2> level is empty
  opt.population = TransmissionOptions::Population::equilibrium;
  const auto outputs = cmd_transmission(config(), opt, dir);
  const CsvTable table = read_csv(outputs[0]);
  const double f0 = config().mode("WGH211").f0_GHz;
  const double bare = 5e-6 / (5e-6 + 1e-5);
  for (const auto& row : table.rows) {
    if (std::abs(row[1] - f0) < 2e-6) CHECK(row[2] == Approx(bare).epsilon(1e-3));
  }
}

TEST_CASE("cmd_decay: traces, analysis json, and the flat zero-power case") {
  const fs::path dir = temp_dir("decay");
  Config cfg = config();
  cfg.dynamics.p_inc_W = {0.0, 5e-12, 2e-11};
  DecayOptions opt;
  opt.trace_points = 900;
  const auto outputs = cmd_decay(cfg, opt, dir);
  const auto analyses = read_json_file(dir / "decay_analysis.json");
  REQUIRE(analyses.size() == 3);

  // zero power: flat trace, no two-exponential analysis possible
  CHECK(analyses[0].contains("analysis_error"));
  const CsvTable flat = read_csv(dir / "decay_P1.csv");
  for (const auto& row : flat.rows)
    CHECK(row[1] == Approx(flat.rows[0][1]).epsilon(1e-12));

  // higher power decays faster
  CHECK(analyses[1]["tau_i_s"].get<double>() >
        analyses[2]["tau_i_s"].get<double>());
  // transmission rises as the level empties
  const CsvTable fast = read_csv(dir / "decay_P3.csv");
  CHECK(fast.rows.front()[2] < fast.rows.back()[2]);
  (void)outputs;
}

TEST_CASE("cmd_fit: map round trip against cmd_transmission output") {
  const fs::path dir = temp_dir("fitmap");
  TransmissionOptions opt;
  opt.mode_label = "WGH211";
  opt.b_min_mT = 41.5;
  opt.b_max_mT = 44.5;
  opt.b_steps = 41;
  opt.f_half_span_GHz = 0.012;
  opt.f_steps = 1601;
  opt.population = TransmissionOptions::Population::frozen;
  const auto outputs = cmd_transmission(config(), opt, dir);

  FitOptions fopt;
  fopt.kind = "map";
  fopt.data_path = outputs[0];
  fopt.mode_label = "WGH211";
  const auto fit_outputs = cmd_fit(config(), fopt, dir);
  const auto doc = read_json_file(fit_outputs[0]);
  REQUIRE(doc["converged"].get<bool>());

  const Config& cfg = config();
  const double g0 = single_spin_coupling_GHz(cfg.spin.g_factor,
                                             cfg.mode("WGH211"), cfg.crystal);
  const double g_true = effective_coupling(g0, 0.5 * cfg.n_total);
  CHECK(doc["params"]["g_eff"].get<double>() == Approx(g_true).epsilon(0.02));
}

TEST_CASE("cmd_fit: decay path equivalence for ingested traces") {
  const fs::path dir = temp_dir("fitdecay");
  Config cfg = config();
  cfg.dynamics.p_inc_W = {2e-11};
  const auto outputs = cmd_decay(cfg, DecayOptions{}, dir);
  const auto analyses = read_json_file(dir / "decay_analysis.json");

  FitOptions fopt;
  fopt.kind = "decay";
  fopt.data_path = dir / "decay_P1.csv";
  const auto fit_outputs = cmd_fit(cfg, fopt, dir);
  const auto doc = read_json_file(fit_outputs[0]);
  CHECK(doc["params"]["tau_i_s"].get<double>() ==
        Approx(analyses[0]["tau_i_s"].get<double>()).epsilon(1e-6));
  CHECK(doc["params"]["tau_f_s"].get<double>() ==
        Approx(analyses[0]["tau_f_s"].get<double>()).epsilon(1e-6));
  (void)outputs;
}

TEST_CASE("cmd_fit: error taxonomy") {
  const fs::path dir = temp_dir("fiterr");
  FitOptions fopt;
  fopt.kind = "map";
  fopt.data_path = "/nonexistent/map.csv";
  CHECK_THROWS_AS(cmd_fit(config(), fopt, dir), FileNotFoundError);

  std::ofstream bad(dir / "bad.csv");
  bad << "B_mT,f_GHz,s21_abs\n1,2,notanumber\n";
  bad.close();
  fopt.data_path = dir / "bad.csv";
  CHECK_THROWS_AS(cmd_fit(config(), fopt, dir), DataError);

  fopt.kind = "bogus";
  CHECK_THROWS_AS(cmd_fit(config(), fopt, dir), ConfigError);
}

TEST_CASE("cmd_calibrate: empty anchors file is an error") {
  const fs::path dir = temp_dir("calerr");
  std::ofstream empty(dir / "empty.json");
  empty << "{\"anchors\": []}\n";
  empty.close();
  CHECK_THROWS_AS(cmd_calibrate(config(), dir / "empty.json", dir), DataError);
}

TEST_CASE("cli process: exit codes") {
  const fs::path dir = temp_dir("cli");
  const std::string cli = SPINCAV_CLI_PATH;
  const std::string cfg = kConfig.string();

  auto run = [&](const std::string& args) {
    const std::string cmd =
        cli + " " + args + " > /dev/null 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };

  CHECK(run("--config " + cfg + " --out " + (dir / "ok").string() +
            " levels --steps 11 --b-max 10") == 0);
  CHECK(run("--config /nonexistent.ini levels") == 3);  // missing file
  // config error: write a broken config
  std::ofstream bad(dir / "bad.ini");
  bad << "[spin]\nunknown_key = 1\n";
  bad.close();
  CHECK(run("--config " + (dir / "bad.ini").string() + " levels") == 2);
  // data error: fit against a missing csv
  CHECK(run("--config " + cfg + " --out " + (dir / "f").string() +
            " fit map /nonexistent.csv") == 3);
}
