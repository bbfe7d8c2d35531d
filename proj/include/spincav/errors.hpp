#pragma once

#include <stdexcept>
#include <string>

namespace spincav {

// Error taxonomy mirrors the CLI exit codes: config -> 2, data -> 3,
// numerics (non-convergence, missing crossing, tracking failure) -> 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class FileNotFoundError : public DataError {
 public:
  explicit FileNotFoundError(const std::string& path)
      : DataError("file not found: " + path) {}
};

class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& msg) : std::runtime_error(msg) {}
};

class NoCrossingError : public NumericsError {
 public:
  explicit NoCrossingError(const std::string& msg) : NumericsError(msg) {}
};

class TrackingError : public NumericsError {
 public:
  TrackingError(const std::string& msg, std::size_t grid_index)
      : NumericsError(msg + " (grid index " + std::to_string(grid_index) +
                      "; refine the field grid near this point)"),
        grid_index(grid_index) {}
  std::size_t grid_index;
};

}  // namespace spincav
