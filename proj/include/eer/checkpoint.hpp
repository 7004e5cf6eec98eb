#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "eer/weights.hpp"

namespace eer {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelWeights weights;
  std::size_t epoch = 0;
  /// Config text stored alongside the weights; opaque to this module.
  std::string config_echo;
};

/// Text container: header, dims, epoch, config echo, then every named array
/// with values in hexadecimal floating point so the round trip is exact.
void write_checkpoint(std::ostream& os, const Checkpoint& checkpoint);
/// Throws CheckpointError on any format problem, or when `expected` is given
/// and the stored dims differ.
Checkpoint read_checkpoint(std::istream& in, const std::optional<ModelDims>& expected = std::nullopt);

/// Writes via a temporary file and rename so an interrupted write never
/// clobbers the previous checkpoint.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path,
                           const std::optional<ModelDims>& expected = std::nullopt);

}  // namespace eer
