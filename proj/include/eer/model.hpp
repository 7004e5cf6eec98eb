#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "eer/autodiff.hpp"
#include "eer/entropy.hpp"
#include "eer/ops.hpp"
#include "eer/tensor.hpp"
#include "eer/weights.hpp"

namespace eer {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kDefaultPeScale = 0.15;

/// B sequences of equal length L, stored row-major (sequence b occupies
/// entries [b·L, (b + 1)·L)). Targets use kNoTarget where nothing is asked.
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> tokens;
  std::vector<int> targets;

  /// Throws unless sizes agree and every token / non-sentinel target is in [0, vocab).
  void validate(std::size_t vocab) const;
  std::span<const int> sequence(std::size_t b) const {
    return std::span<const int>(tokens).subspan(b * length, length);
  }
  /// Batch holding only sequence b.
  SequenceBatch single(std::size_t b) const;
};

/// What the iteration feeds back into the latent state.
enum class Transition {
  Block,      // LayerNorm(MLP(A + n(h)) + A + n(h)), A = attention on n(h)
  Attention,  // the bare attention operator S·(h·W_V)
};

enum class MapRecording { All, Last, None };

struct LoopOptions {
  std::size_t t_steps = 25;
  double temperature = 1.0;
  double pe_scale = kDefaultPeScale;
  Transition transition = Transition::Block;
  /// When set, Z ← Z + α(S_q)·(F(X + Z) − Z) with S_q the mean row Tsallis
  /// entropy of the current map; otherwise Z ← Z + F(X + Z).
  std::optional<GateParams> gate;
  double gate_q = 1.5;
  MapRecording record_maps = MapRecording::All;
  /// Optional initial latent (defaults to zeros).
  std::optional<Tensor> z0;

  void validate() const;
};

/// Standard interleaved sin/cos table: row i, column 2k is sin(i·ω_k) and
/// column 2k + 1 is cos(i·ω_k) with ω_k = 10000^(−2k/d).
Tensor sinusoidal_positions(std::size_t length, std::size_t d);

/// x_i = embed[token_i] + pe_scale·PE(i).
Tensor embed_sequence(std::span<const int> tokens, const ModelWeights& weights, double pe_scale);

struct AttentionResult {
  Tensor out;
  Tensor map;
};

/// logits = hW_Q(hW_K)ᵀ/(τ√d), map = row_softmax(logits), out = map·(hW_V).
AttentionResult attention_operator(const Tensor& h, const ModelWeights& weights,
                                   double temperature);

struct BlockResult {
  Tensor delta;
  Tensor map;
};

/// delta = LayerNorm(MLP(A + n) + A + n) with n = h normalized per row (no
/// gain or bias) and A = attention_operator(n).out.
BlockResult loop_block(const Tensor& h, const ModelWeights& weights, double temperature);

/// Weights as graph inputs: tracked leaves for training, constants otherwise.
struct WeightVars {
  Var embed, w_q, w_k, w_v, mlp_in, mlp_in_bias, mlp_out, mlp_out_bias, norm_gain, norm_bias,
      readout;

  static WeightVars constants(const ModelWeights& w);
  static WeightVars leaves(Tape& tape, const ModelWeights& w);
  /// Collects leaf gradients back into a ModelWeights-shaped container.
  ModelWeights gradients(const Gradients& grads) const;
  std::size_t d() const { return w_q.rows(); }
};

struct AttentionVars {
  Var out;
  Var map;
};

/// Graph versions; rows are stacked sequences of `block` rows each.
Var embed_tokens(const WeightVars& w, std::span<const int> tokens, std::size_t block,
                 double pe_scale);
AttentionVars attention_step(const Var& h, const WeightVars& w, double temperature,
                             std::size_t block);
AttentionVars block_step(const Var& h, const WeightVars& w, double temperature,
                         std::size_t block);

/// Unrolled loop as graph nodes: z[0..T], maps[0..T-1], logits = Z_T·readout.
struct LoopGraph {
  std::vector<Var> z;
  std::vector<Var> maps;
  /// Per iteration, the gate factor applied to each sequence (empty when ungated).
  std::vector<std::vector<double>> gate_values;
  Var logits;
};

LoopGraph unroll_loop(const SequenceBatch& batch, const WeightVars& w, const LoopOptions& opts);

/// Plain-value record of one looped forward over a batch. States are
/// (B·L)×d stacks; maps are (B·L)×L stacks of per-sequence L×L maps.
struct LoopTrace {
  std::size_t seq_len = 0;
  std::vector<Tensor> z_per_iter;
  std::vector<Tensor> attn_per_iter;
  std::vector<std::vector<double>> gate_per_iter;
  Tensor final_logits;

  /// L×L map of sequence b at iteration t (0-based).
  Tensor sequence_map(std::size_t t, std::size_t b) const;
};

LoopTrace looped_forward(const SequenceBatch& batch, const ModelWeights& weights,
                         const LoopOptions& opts);

enum class AccuracyMode { AllPositions, LastPosition };

/// Fraction of scored positions where argmax(final_logits) hits the target.
/// Throws if the trace does not belong to the batch or nothing is scored.
double predict_accuracy(const LoopTrace& trace, const SequenceBatch& batch,
                        AccuracyMode mode = AccuracyMode::AllPositions);

/// Correct / scored counts for one trace (no throw on zero scored).
struct AccuracyCount {
  std::size_t correct = 0;
  std::size_t scored = 0;
};
AccuracyCount count_correct(const Tensor& logits, const SequenceBatch& batch, AccuracyMode mode);

}  // namespace eer
