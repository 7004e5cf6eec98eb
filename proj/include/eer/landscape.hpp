#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "eer/rng.hpp"
#include "eer/train.hpp"
#include "eer/weights.hpp"

namespace eer {

struct LandscapeSpec {
  std::size_t resolution = 21;  // cells per axis
  double extent = 1.0;          // coordinates span [-extent, extent]
  std::size_t batch = 8;
  std::size_t length = 32;
  std::uint64_t seed = 0;
};

struct LandscapeGrid {
  std::string direction_a;
  std::string direction_b;
  std::vector<double> coords;  // shared by both axes
  /// Row-major, row index along direction_b.
  std::vector<double> total;
  std::vector<double> task;

  std::size_t center() const { return (coords.size() / 2) * coords.size() + coords.size() / 2; }
};

/// Gaussian direction with every array rescaled to the Frobenius norm of the
/// matching array in `weights`; all-zero arrays get a zero direction.
ModelWeights filter_normalized_direction(const ModelWeights& weights, Rng& rng);

/// Loss of weights + a·dir_a + b·dir_b on one fixed full-sequence batch.
LandscapeGrid compute_landscape(const ModelWeights& weights, const EERConfig& config,
                                const LandscapeSpec& spec);

/// Header `a,b,total_loss,task_loss`, preceded by '#' lines naming the
/// directions.
void write_landscape_csv(std::ostream& os, const LandscapeGrid& grid);

}  // namespace eer
