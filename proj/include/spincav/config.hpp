#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spincav/cavity.hpp"
#include "spincav/ensemble.hpp"
#include "spincav/errors.hpp"
#include "spincav/level_diagram.hpp"
#include "spincav/spin_system.hpp"

namespace spincav {

struct ProbeDef {
  std::string name;
  std::string mode_label;
  int lower_twom = 0;
  int upper_twom = 0;
  double b_mT = 0.0;
};

struct DynamicsConfig {
  std::vector<double> p_inc_W;
  double gamma21_per_s = 0.0;
  double gamma23_per_s = 0.0;
};

struct NumericsConfig {
  double grid_step_mT = 0.1;
  double alc_window_lo_mT = 2.0;
  double alc_window_hi_mT = 5.0;
  double peak_prominence = 0.02;
  bool halfgap_convention_half = true;  // "half": quoted couplings are gap/2
};

struct Config {
  SpinSystem spin;
  CrystalSpec crystal;
  std::vector<CavityMode> modes;
  double gamma_s_GHz = 1e-3;
  double n_total = 0.0;
  std::vector<ProbeDef> probes;
  SweepProtocol protocol;
  DynamicsConfig dynamics;
  NumericsConfig numerics;
  std::string hash;  // FNV-1a of the file bytes

  const CavityMode& mode(const std::string& label) const {
    for (const auto& m : modes)
      if (m.label == label) return m;
    throw ConfigError("no such mode in config: " + label);
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& section, const std::string& key,
                           const std::string& value, const char* unit) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": expected a number (" +
                      unit + "), got '" + value + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !items.empty()) items.push_back(last);
  return items;
}

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// Parse the plain-text configuration: named [section]s of key = value
/// pairs, '#'/';' comments, units carried in the key names. Unknown keys
/// and sections are rejected by name.
inline Config load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path.string());
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  // section -> ordered key/value pairs
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>
      sections;
  {
    std::istringstream stream(text);
    std::string line;
    std::string current;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
      ++line_no;
      const auto hash_pos = std::min(line.find('#'), line.find(';'));
      if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed section header '" + line + "'");
        current = detail::trim(line.substr(1, line.size() - 2));
        sections.emplace_back(current, std::vector<std::pair<std::string, std::string>>{});
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos || current.empty())
        throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                          ": expected 'key = value' inside a [section]");
      sections.back().second.emplace_back(detail::trim(line.substr(0, eq)),
                                          detail::trim(line.substr(eq + 1)));
    }
  }

  Config cfg;
  {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a(text)));
    cfg.hash = hex;
  }

  auto reject = [](const std::string& section, const std::string& key,
                   const std::set<std::string>& known) {
    if (!known.count(key))
      throw ConfigError("unknown key '" + key + "' in section [" + section +
                        "]");
  };

  bool saw_spin = false, saw_crystal = false, saw_bath = false;
  for (const auto& [name, entries] : sections) {
    if (name == "spin") {
      saw_spin = true;
      for (const auto& [key, value] : entries) {
        reject(name, key, {"S", "g_factor", "b20_GHz", "b40_GHz", "b60_GHz",
                           "b44_GHz", "b64_GHz", "tilt_rad"});
        const double v = detail::parse_number(name, key, value,
                                              key == "S" ? "dimensionless"
                                              : key == "g_factor" ? "dimensionless"
                                              : key == "tilt_rad" ? "rad"
                                                                  : "GHz");
        if (key == "S") cfg.spin.spin = v;
        else if (key == "g_factor") cfg.spin.g_factor = v;
        else if (key == "b20_GHz") cfg.spin.cf.b20 = v;
        else if (key == "b40_GHz") cfg.spin.cf.b40 = v;
        else if (key == "b60_GHz") cfg.spin.cf.b60 = v;
        else if (key == "b44_GHz") cfg.spin.cf.b44 = v;
        else if (key == "b64_GHz") cfg.spin.cf.b64 = v;
        else if (key == "tilt_rad") cfg.spin.tilt_rad = v;
      }
    } else if (name == "crystal") {
      saw_crystal = true;
      for (const auto& [key, value] : entries) {
        reject(name, key, {"diameter_mm", "height_mm", "mu_r"});
        const double v = detail::parse_number(
            name, key, value, key == "mu_r" ? "dimensionless" : "mm");
        if (key == "diameter_mm") cfg.crystal.diameter_mm = v;
        else if (key == "height_mm") cfg.crystal.height_mm = v;
        else cfg.crystal.mu_r = v;
      }
    } else if (name.rfind("mode.", 0) == 0) {
      CavityMode mode;
      mode.label = name.substr(5);
      if (mode.label.empty())
        throw ConfigError("mode section needs a label: [mode.<label>]");
      for (const auto& [key, value] : entries) {
        reject(name, key, {"f0_GHz", "kappa_c_GHz", "gamma_d_GHz", "beta"});
        const double v = detail::parse_number(
            name, key, value, key == "beta" ? "dimensionless" : "GHz");
        if (key == "f0_GHz") mode.f0_GHz = v;
        else if (key == "kappa_c_GHz") mode.kappa_c_GHz = v;
        else if (key == "gamma_d_GHz") mode.gamma_d_GHz = v;
        else mode.beta = v;
      }
      mode.validate();
      cfg.modes.push_back(mode);
    } else if (name == "bath") {
      saw_bath = true;
      for (const auto& [key, value] : entries) {
        reject(name, key, {"gamma_s_GHz", "N_total"});
        const double v = detail::parse_number(
            name, key, value, key == "N_total" ? "spins" : "GHz");
        if (key == "gamma_s_GHz") cfg.gamma_s_GHz = v;
        else cfg.n_total = v;
      }
    } else if (name.rfind("probe.", 0) == 0) {
      ProbeDef probe;
      probe.name = name.substr(6);
      for (const auto& [key, value] : entries) {
        reject(name, key, {"mode", "lower", "upper", "B_mT"});
        if (key == "mode") probe.mode_label = value;
        else if (key == "lower") probe.lower_twom = parse_label(value);
        else if (key == "upper") probe.upper_twom = parse_label(value);
        else probe.b_mT = detail::parse_number(name, key, value, "mT");
      }
      cfg.probes.push_back(probe);
    } else if (name == "protocol") {
      for (const auto& [key, value] : entries) {
        reject(name, key, {"b_start_mT", "b_turn_mT", "b_end_mT",
                           "rate_mT_per_min", "T_K", "relax_fast"});
        if (key == "relax_fast") {
          for (const auto& item : detail::split_list(value)) {
            if (item.empty()) continue;
            const auto gt = item.find('>');
            if (gt == std::string::npos)
              throw ConfigError("[protocol] relax_fast entries look like "
                                "'-5/2>-7/2', got '" + item + "'");
            cfg.protocol.relax_fast.emplace_back(
                parse_label(item.substr(0, gt)),
                parse_label(item.substr(gt + 1)));
          }
          continue;
        }
        const double v = detail::parse_number(
            name, key, value,
            key == "T_K" ? "K" : key == "rate_mT_per_min" ? "mT/min" : "mT");
        if (key == "b_start_mT") cfg.protocol.b_start_mT = v;
        else if (key == "b_turn_mT") cfg.protocol.b_turn_mT = v;
        else if (key == "b_end_mT") cfg.protocol.b_end_mT = v;
        else if (key == "rate_mT_per_min") cfg.protocol.rate_mT_per_min = v;
        else cfg.protocol.temperature_K = v;
      }
    } else if (name == "dynamics") {
      for (const auto& [key, value] : entries) {
        reject(name, key, {"P_inc_W", "gamma21_per_s", "gamma23_per_s"});
        if (key == "P_inc_W") {
          for (const auto& item : detail::split_list(value))
            cfg.dynamics.p_inc_W.push_back(
                detail::parse_number(name, key, item, "W"));
        } else if (key == "gamma21_per_s") {
          cfg.dynamics.gamma21_per_s =
              detail::parse_number(name, key, value, "1/s");
        } else {
          cfg.dynamics.gamma23_per_s =
              detail::parse_number(name, key, value, "1/s");
        }
      }
    } else if (name == "numerics") {
      for (const auto& [key, value] : entries) {
        reject(name, key, {"grid_step_mT", "alc_window_lo_mT",
                           "alc_window_hi_mT", "peak_prominence",
                           "halfgap_convention"});
        if (key == "halfgap_convention") {
          if (value == "half") cfg.numerics.halfgap_convention_half = true;
          else if (value == "full") cfg.numerics.halfgap_convention_half = false;
          else
            throw ConfigError("[numerics] halfgap_convention must be 'half' "
                              "or 'full', got '" + value + "'");
          continue;
        }
        const double v = detail::parse_number(
            name, key, value, key == "peak_prominence" ? "relative" : "mT");
        if (key == "grid_step_mT") cfg.numerics.grid_step_mT = v;
        else if (key == "alc_window_lo_mT") cfg.numerics.alc_window_lo_mT = v;
        else if (key == "alc_window_hi_mT") cfg.numerics.alc_window_hi_mT = v;
        else cfg.numerics.peak_prominence = v;
      }
    } else {
      throw ConfigError("unknown section [" + name + "] in " + path.string());
    }
  }

  if (!saw_spin) throw ConfigError("config is missing the [spin] section");
  if (!saw_crystal) throw ConfigError("config is missing the [crystal] section");
  if (!saw_bath) throw ConfigError("config is missing the [bath] section");
  cfg.spin.validate();
  cfg.crystal.validate();
  if (!(cfg.n_total > 0)) throw ConfigError("[bath] N_total must be > 0");
  if (!(cfg.gamma_s_GHz > 0)) throw ConfigError("[bath] gamma_s_GHz must be > 0");
  if (!(cfg.numerics.grid_step_mT > 0))
    throw ConfigError("[numerics] grid_step_mT must be > 0");
  cfg.protocol.validate();
  for (const auto& probe : cfg.probes) cfg.mode(probe.mode_label);
  return cfg;
}

}  // namespace spincav
