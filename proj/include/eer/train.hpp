#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "eer/autodiff.hpp"
#include "eer/model.hpp"
#include "eer/rng.hpp"
#include "eer/weights.hpp"

namespace eer {

enum class TaskMode { LastToken, FullSequence };
enum class LossPositions { LastIteration, AllIterations };

/// Training configuration; defaults are the desk-scale EER setting.
struct EERConfig {
  double lambda_p = 0.1;
  double lambda_k = 0.001;
  double lambda_s = 0.02;
  double q = 1.5;
  double eta = 0.0;
  double tau = 1.0;
  std::size_t d = 8;
  std::size_t d_ff = 32;
  std::size_t vocab = 4;
  std::size_t t_steps = 25;
  std::size_t t_eval = 25;
  double lr = 1e-3;
  double weight_decay = 0.1;
  std::size_t batch_size = 32;
  std::size_t train_len_min = 16;
  std::size_t train_len_max = 64;
  std::size_t epochs = 20000;
  std::size_t eval_interval = 500;
  std::size_t eval_samples = 32;
  std::vector<std::size_t> eval_lengths{10, 100, 1000};
  std::uint64_t seed = 0;
  double pe_scale = kDefaultPeScale;
  LossPositions loss_positions = LossPositions::LastIteration;
  bool ablation_ce_only = false;
  AccuracyMode eval_mode = AccuracyMode::AllPositions;
  bool gate = false;
  double gate_alpha_min = 0.2;
  /// ≤ 0 selects the uniform-row Tsallis entropy at the current length.
  double gate_saturation = 0.0;

  void validate() const;
  ModelDims dims() const { return {d, d_ff, vocab}; }
  LoopOptions loop_options(std::size_t t, std::size_t length) const;

  friend bool operator==(const EERConfig&, const EERConfig&) = default;
};

/// last-token: one target at the final position, which repeats an earlier
/// token. full-sequence: every position whose token occurred before targets
/// the token after its most recent earlier occurrence.
SequenceBatch generate_induction_batch(Rng& rng, std::size_t vocab, std::size_t batch,
                                       std::size_t len, TaskMode mode);
/// Full-sequence targets for one token row.
std::vector<int> induction_targets(std::span<const int> tokens);

struct LossBreakdown {
  double task = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  /// Raw mean Tsallis entropy of the maps the entropy term was taken over.
  double mean_entropy = 0.0;
  /// Σ over all rows of ‖Z_T − Z_0‖₂.
  double kinetic_sum = 0.0;

  double recomputed_total(const EERConfig& config) const;
};

/// Graph form of the objective, for backward.
struct LossVars {
  Var task, kinetic, potential, entropy, mean_entropy, total;
  double kinetic_sum = 0.0;

  LossBreakdown values() const;
};

LossVars loss_graph(const LoopGraph& graph, const SequenceBatch& batch, const EERConfig& config);

double task_loss(const LoopTrace& trace, const SequenceBatch& batch);
/// (1/2N)·Σ_rows ‖Z_T − Z_0‖₂ over the N = B·L rows.
double kinetic_loss(const LoopTrace& trace);
/// Mean over rows and maps of −log max_j p_j.
double potential_loss(std::span<const Tensor> maps);
/// |mean over rows and maps of S_q(p) − η|.
double entropy_loss(std::span<const Tensor> maps, double q, double eta);
LossBreakdown total_loss(const LoopTrace& trace, const SequenceBatch& batch,
                         const EERConfig& config);

/// Adaptive-moment optimizer with decoupled, multiplicative weight decay.
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamW(Options options) : options_(options) {}

  /// Returns false (weights untouched) if any gradient is non-finite.
  bool step(ModelWeights& weights, const ModelWeights& grads);
  /// Single-tensor form used for the scalar toy problems in tests.
  bool step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

  std::size_t steps_taken() const noexcept { return t_; }
  std::size_t rejected_steps() const noexcept { return rejected_; }

 private:
  Options options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
  std::size_t rejected_ = 0;
};

/// One row of the training log. The first seven columns mirror the
/// published table.
struct MetricsRow {
  std::size_t epoch = 0;
  double entropy = 0.0;
  double potential = 0.0;
  double acc_l10 = 0.0;
  double acc_l100 = 0.0;
  double acc_l1000 = 0.0;
  double kinetic = 0.0;
  double kinetic_sum = 0.0;
  double task_loss = 0.0;
  double total_loss = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,entropy,potential,acc_l10,acc_l100,acc_l1000,kinetic,kinetic_sum,task_loss,total_loss";

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

struct TrainSinks {
  std::function<void(const MetricsRow&)> on_metrics;
  std::function<void(std::size_t epoch, const ModelWeights&)> on_checkpoint;
  std::function<void(const std::string&)> on_event;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<MetricsRow> history;
  std::vector<LossBreakdown> losses;  // one per optimizer step
};

/// Thrown when the objective turns non-finite; carries the last finite weights.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, ModelWeights last_good, std::size_t epoch)
      : std::runtime_error(what), last_good(std::move(last_good)), epoch(epoch) {}
  ModelWeights last_good;
  std::size_t epoch;
};

TrainResult train(const EERConfig& config, const TrainSinks& sinks = {});
/// Continues from given weights (used by tests and the CLI).
TrainResult train_from(const EERConfig& config, ModelWeights weights, const TrainSinks& sinks = {});

/// Mean accuracy over `samples` fresh full-sequence batches of each length.
std::vector<double> evaluate(const ModelWeights& weights, std::span<const std::size_t> lengths,
                             std::size_t samples, std::size_t t_eval, std::uint64_t seed,
                             const EERConfig& config);

}  // namespace eer
