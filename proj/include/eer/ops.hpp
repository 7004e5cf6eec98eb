#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "eer/autodiff.hpp"

namespace eer {

/// Target value meaning "no prediction expected at this position".
inline constexpr int kNoTarget = -1;

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a * s for a 1×1 var s.
Var mul(const Var& a, const Var& s);
Var matmul(const Var& a, const Var& b);
/// a · bᵀ
Var matmul_nt(const Var& a, const Var& b);
/// Adds a 1×cols bias to every row.
Var add_row_bias(const Var& a, const Var& bias);
/// Row i of the result is table row indices[i].
Var gather_rows(const Var& table, std::span<const int> indices);

/// Row blocks of `block` rows are independent sequences. For block g,
/// result rows are a_g · b_gᵀ, giving an (N × block) stack of square maps.
Var block_matmul_nt(const Var& a, const Var& b, std::size_t block);
/// For block g, result rows are s_g · v_g where s is (N × block).
Var block_matmul(const Var& s, const Var& v, std::size_t block);

Var row_softmax(const Var& logits, double temperature);
/// Tanh-approximated GELU: 0.5x(1 + tanh(√(2/π)(x + 0.044715x³))).
Var gelu(const Var& a);
/// Per-row normalization with biased variance, then gain ⊙ x̂ + bias.
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps);

Var sum(const Var& a);
Var mean(const Var& a);
/// Σ_rows ‖row‖₂ (subgradient 0 at zero rows).
Var row_norm_sum(const Var& a);
/// Mean over rows with a target of −log softmax(logits)[target].
Var cross_entropy(const Var& logits, std::span<const int> targets);
/// Mean over rows of −log(max_j p_j).
Var mean_neg_log_row_max(const Var& probs);
/// Mean over rows of the Tsallis entropy (1 − Σ p^q)/(q − 1).
Var tsallis_row_mean(const Var& probs, double q);
/// Per-row Tsallis entropy of a probability map, as an N×1 column.
Var row_tsallis(const Var& probs, double q);
/// Mean of an N×1 column over consecutive blocks of `block` rows → (N/block)×1.
Var block_row_mean(const Var& column, std::size_t block);
/// Scales block g of `a` by factors[g] for a (N/block)×1 factor column.
Var scale_row_blocks(const Var& a, const Var& factors, std::size_t block);
/// |x − target| for a 1×1 var x (subgradient 0 at the kink).
Var abs_deviation(const Var& x, double target);
/// Elementwise f with derivative df, for 1×1 control quantities.
Var scalar_map(const Var& x, const std::function<double(double)>& f,
               const std::function<double(double)>& df);

}  // namespace eer
