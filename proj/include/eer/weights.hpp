#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "eer/rng.hpp"
#include "eer/tensor.hpp"

namespace eer {

/// Small readout keeps the initial logits near zero; Z_T grows with T.
inline constexpr double kReadoutInitScale = 0.01;

struct ModelDims {
  std::size_t d = 8;
  std::size_t d_ff = 32;
  std::size_t vocab = 4;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Parameters of the single-head looped block. Row-vector convention: a
/// latent row h maps to queries h·w_q, keys h·w_k and values h·w_v.
struct ModelWeights {
  Tensor embed;         // vocab × d
  Tensor w_q;           // d × d
  Tensor w_k;           // d × d
  Tensor w_v;           // d × d
  Tensor mlp_in;        // d × d_ff
  Tensor mlp_in_bias;   // 1 × d_ff
  Tensor mlp_out;       // d_ff × d
  Tensor mlp_out_bias;  // 1 × d
  Tensor norm_gain;     // 1 × d
  Tensor norm_bias;     // 1 × d
  Tensor readout;       // d × vocab

  static constexpr std::array<std::string_view, 11> kNames = {
      "embed",   "w_q",          "w_k",       "w_v",       "mlp_in",  "mlp_in_bias",
      "mlp_out", "mlp_out_bias", "norm_gain", "norm_bias", "readout"};

  /// All arrays zero, shaped for `dims`.
  static ModelWeights zeros(const ModelDims& dims);
  /// Centered uniform init: matrices ±1/√fan_in, embeddings ±0.1, readout
  /// ±kReadoutInitScale, zero biases, unit norm gain.
  static ModelWeights initialize(const ModelDims& dims, Rng& rng);

  ModelDims dims() const { return {w_q.rows(), mlp_in.cols(), embed.rows()}; }

  /// Throws ShapeError on inconsistent shapes, NumericalError on NaN/Inf.
  void validate() const;

  std::size_t parameter_count() const;

  template <typename F>
  void for_each(F&& f) {
    f(kNames[0], embed), f(kNames[1], w_q), f(kNames[2], w_k), f(kNames[3], w_v);
    f(kNames[4], mlp_in), f(kNames[5], mlp_in_bias), f(kNames[6], mlp_out);
    f(kNames[7], mlp_out_bias), f(kNames[8], norm_gain), f(kNames[9], norm_bias);
    f(kNames[10], readout);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelWeights*>(this)->for_each(
        [&](std::string_view name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

}  // namespace eer
