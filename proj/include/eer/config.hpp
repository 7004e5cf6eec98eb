#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "eer/hamiltonian.hpp"
#include "eer/train.hpp"

namespace eer {

inline constexpr int kConfigVersion = 1;

/// Parse failure; what() starts with "line N:" when a line is at fault.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& message);
  explicit ConfigError(const std::string& message) : std::runtime_error(message) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Inputs for the dynamics simulator beyond DynamicsParams.
struct SimulationSetup {
  std::size_t tokens = 8;  // n, length of the sampled context
  double z0_scale = 1.0;   // z0 ~ U(-s, s)^d
  double v0_scale = 0.0;   // v0 ~ U(-s, s)^d
  std::string checkpoint;  // empty: freshly initialized weights

  friend bool operator==(const SimulationSetup&, const SimulationSetup&) = default;
};

struct RunConfig {
  EERConfig train;
  DynamicsParams dynamics;
  SimulationSetup simulation;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Flat `key = value` text. '#' starts a comment. Unknown or repeated keys
/// are errors; missing keys keep their defaults.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
/// Writes every key; parse_config of the output reproduces `config`.
void write_config(std::ostream& os, const RunConfig& config);

}  // namespace eer
