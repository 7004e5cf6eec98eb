#include "eer/landscape.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>

namespace eer {

ModelWeights filter_normalized_direction(const ModelWeights& weights, Rng& rng) {
  ModelWeights dir = ModelWeights::zeros(weights.dims());
  const ModelWeights& ref = weights;
  dir.for_each([&](std::string_view name, Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    const double target = frobenius_norm(ref.at(name));
    const double norm = frobenius_norm(t);
    t *= norm > 0.0 ? target / norm : 0.0;
  });
  return dir;
}

namespace {

ModelWeights offset(const ModelWeights& w, const ModelWeights& da, double a, const ModelWeights& db,
                    double b) {
  ModelWeights out = w;
  out.for_each([&](std::string_view name, Tensor& t) {
    t.add_scaled(da.at(name), a);
    t.add_scaled(db.at(name), b);
  });
  return out;
}

}  // namespace

LandscapeGrid compute_landscape(const ModelWeights& weights, const EERConfig& config,
                                const LandscapeSpec& spec) {
  weights.validate();
  if (spec.resolution == 0) throw std::invalid_argument("landscape: resolution must be >= 1");
  if (!(spec.extent >= 0.0)) throw std::invalid_argument("landscape: extent must be >= 0");

  Rng rng(spec.seed);
  const ModelWeights da = filter_normalized_direction(weights, rng);
  const ModelWeights db = filter_normalized_direction(weights, rng);
  const SequenceBatch batch =
      generate_induction_batch(rng, weights.dims().vocab, spec.batch, spec.length, TaskMode::FullSequence);
  LoopOptions opts = config.loop_options(config.t_steps, spec.length);

  LandscapeGrid grid;
  const std::string stem = "filter-normalized-gaussian/seed=" + std::to_string(spec.seed);
  grid.direction_a = stem + "/0";
  grid.direction_b = stem + "/1";
  const std::size_t n = spec.resolution;
  for (std::size_t i = 0; i < n; ++i) {
    grid.coords.push_back(n == 1 ? 0.0
                                 : -spec.extent + 2.0 * spec.extent * static_cast<double>(i) /
                                                      static_cast<double>(n - 1));
  }
  // Odd grids hit zero exactly at the center.
  if (n % 2 == 1) grid.coords[n / 2] = 0.0;

  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const ModelWeights w = offset(weights, da, grid.coords[c], db, grid.coords[r]);
      const LoopGraph g = unroll_loop(batch, WeightVars::constants(w), opts);
      const LossBreakdown loss = loss_graph(g, batch, config).values();
      grid.total.push_back(loss.total);
      grid.task.push_back(loss.task);
    }
  }
  return grid;
}

void write_landscape_csv(std::ostream& os, const LandscapeGrid& grid) {
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << "# direction_a = " << grid.direction_a << '\n'
     << "# direction_b = " << grid.direction_b << '\n'
     << "a,b,total_loss,task_loss\n"
     << std::setprecision(12);
  const std::size_t n = grid.coords.size();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      os << grid.coords[c] << ',' << grid.coords[r] << ',' << grid.total[r * n + c] << ','
         << grid.task[r * n + c] << '\n';
    }
  }
  os.flags(flags);
  os.precision(precision);
}

}  // namespace eer
