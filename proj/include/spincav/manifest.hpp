#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spincav/errors.hpp"

namespace spincav {

/// Every command drops a manifest next to its outputs: what ran, against
/// which config (stable hash), when, and what it wrote. The data files are
/// byte-identical across reruns; the timestamp lives only here.
inline std::filesystem::path write_manifest(
    const std::filesystem::path& out_dir, const std::string& command,
    const std::string& config_hash,
    const std::vector<std::filesystem::path>& outputs) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["config_hash"] = config_hash;
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::tm tm_utc{};
  gmtime_r(&tt, &tm_utc);
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  doc["timestamp"] = stamp;
  doc["outputs"] = nlohmann::json::array();
  for (const auto& p : outputs) doc["outputs"].push_back(p.string());

  const std::filesystem::path path = out_dir / (command + "_manifest.json");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << doc.dump(2) << "\n";
  return path;
}

}  // namespace spincav
