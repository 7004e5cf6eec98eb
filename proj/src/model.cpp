#include "eer/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "eer/error.hpp"

namespace eer {

void SequenceBatch::validate(std::size_t vocab) const {
  if (tokens.size() != batch * length || targets.size() != batch * length) {
    throw ShapeError("SequenceBatch: expected " + std::to_string(batch * length) +
                     " tokens and targets");
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw std::out_of_range("SequenceBatch: token " + std::to_string(t) + " outside vocabulary");
    }
  }
  for (int t : targets) {
    if (t != kNoTarget && (t < 0 || static_cast<std::size_t>(t) >= vocab)) {
      throw std::out_of_range("SequenceBatch: target " + std::to_string(t) + " outside vocabulary");
    }
  }
}

SequenceBatch SequenceBatch::single(std::size_t b) const {
  if (b >= batch) throw std::out_of_range("SequenceBatch::single: index out of range");
  const auto first = static_cast<std::ptrdiff_t>(b * length);
  const auto last = first + static_cast<std::ptrdiff_t>(length);
  return SequenceBatch{1, length, std::vector<int>(tokens.begin() + first, tokens.begin() + last),
                       std::vector<int>(targets.begin() + first, targets.begin() + last)};
}

void LoopOptions::validate() const {
  if (t_steps < 1) throw std::invalid_argument("LoopOptions: t_steps must be >= 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("LoopOptions: temperature must be positive");
  if (gate) {
    gate->validate();
    if (gate_q == 1.0) throw std::invalid_argument("LoopOptions: gate_q must differ from 1");
  }
}

Tensor sinusoidal_positions(std::size_t length, std::size_t d) {
  Tensor pe(length, d);
  for (std::size_t k = 0; 2 * k < d; ++k) {
    const double omega =
        std::pow(10000.0, -static_cast<double>(2 * k) / static_cast<double>(d));
    for (std::size_t i = 0; i < length; ++i) {
      pe(i, 2 * k) = std::sin(static_cast<double>(i) * omega);
      if (2 * k + 1 < d) pe(i, 2 * k + 1) = std::cos(static_cast<double>(i) * omega);
    }
  }
  return pe;
}

WeightVars WeightVars::constants(const ModelWeights& w) {
  return {Var(w.embed),   Var(w.w_q),          Var(w.w_k),       Var(w.w_v),
          Var(w.mlp_in),  Var(w.mlp_in_bias),  Var(w.mlp_out),   Var(w.mlp_out_bias),
          Var(w.norm_gain), Var(w.norm_bias), Var(w.readout)};
}

WeightVars WeightVars::leaves(Tape& tape, const ModelWeights& w) {
  return {tape.leaf(w.embed),     tape.leaf(w.w_q),          tape.leaf(w.w_k),
          tape.leaf(w.w_v),       tape.leaf(w.mlp_in),       tape.leaf(w.mlp_in_bias),
          tape.leaf(w.mlp_out),   tape.leaf(w.mlp_out_bias), tape.leaf(w.norm_gain),
          tape.leaf(w.norm_bias), tape.leaf(w.readout)};
}

ModelWeights WeightVars::gradients(const Gradients& g) const {
  return ModelWeights{g[embed],        g[w_q],       g[w_k],      g[w_v],
                      g[mlp_in],       g[mlp_in_bias], g[mlp_out], g[mlp_out_bias],
                      g[norm_gain],    g[norm_bias], g[readout]};
}

Var embed_tokens(const WeightVars& w, std::span<const int> tokens, std::size_t block,
                 double pe_scale) {
  if (block == 0 || tokens.size() % block != 0) {
    throw ShapeError("embed_tokens: token count is not a multiple of the sequence length");
  }
  const std::size_t d = w.embed.cols();
  const Tensor pe = sinusoidal_positions(block, d);
  Tensor tiled(tokens.size(), d);
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    auto src = pe.row(r % block);
    auto dst = tiled.row(r);
    for (std::size_t c = 0; c < d; ++c) dst[c] = pe_scale * src[c];
  }
  return add(gather_rows(w.embed, tokens), Var(std::move(tiled)));
}

Tensor embed_sequence(std::span<const int> tokens, const ModelWeights& weights, double pe_scale) {
  if (tokens.empty()) throw std::invalid_argument("embed_sequence: empty sequence");
  return embed_tokens(WeightVars::constants(weights), tokens, tokens.size(), pe_scale).value();
}

AttentionVars attention_step(const Var& h, const WeightVars& w, double temperature,
                             std::size_t block) {
  if (!(temperature > 0.0)) throw std::invalid_argument("attention: temperature must be positive");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(w.d()));
  const Var q = matmul(h, w.w_q);
  const Var k = matmul(h, w.w_k);
  const Var v = matmul(h, w.w_v);
  const Var logits = scale(block_matmul_nt(q, k, block), inv_sqrt_d);
  Var map = row_softmax(logits, temperature);
  Var out = block_matmul(map, v, block);
  return {std::move(out), std::move(map)};
}

AttentionVars block_step(const Var& h, const WeightVars& w, double temperature,
                         std::size_t block) {
  const std::size_t d = w.d();
  const Var hn = layer_norm(h, Var(Tensor::ones(1, d)), Var(Tensor(1, d)), kLayerNormEps);
  AttentionVars a = attention_step(hn, w, temperature, block);
  const Var stream = add(a.out, hn);
  const Var hidden = gelu(add_row_bias(matmul(stream, w.mlp_in), w.mlp_in_bias));
  const Var mixed = add(add_row_bias(matmul(hidden, w.mlp_out), w.mlp_out_bias), stream);
  return {layer_norm(mixed, w.norm_gain, w.norm_bias, kLayerNormEps), std::move(a.map)};
}

AttentionResult attention_operator(const Tensor& h, const ModelWeights& weights,
                                   double temperature) {
  AttentionVars a =
      attention_step(Var(h), WeightVars::constants(weights), temperature, h.rows());
  return {a.out.value(), a.map.value()};
}

BlockResult loop_block(const Tensor& h, const ModelWeights& weights, double temperature) {
  AttentionVars a = block_step(Var(h), WeightVars::constants(weights), temperature, h.rows());
  return {a.out.value(), a.map.value()};
}

LoopGraph unroll_loop(const SequenceBatch& batch, const WeightVars& w, const LoopOptions& opts) {
  opts.validate();
  if (batch.length == 0 || batch.batch == 0) throw std::invalid_argument("unroll_loop: empty batch");
  batch.validate(w.embed.rows());
  const std::size_t block = batch.length;
  const std::size_t rows = batch.batch * batch.length;

  LoopGraph g;
  const Var x = embed_tokens(w, batch.tokens, block, opts.pe_scale);
  if (opts.z0) {
    if (opts.z0->rows() != rows || opts.z0->cols() != w.d()) {
      throw ShapeError("unroll_loop: initial latent " + shape_string(*opts.z0) +
                       " does not match the batch");
    }
    g.z.push_back(Var(*opts.z0));
  } else {
    g.z.push_back(Var(Tensor(rows, w.d())));
  }

  for (std::size_t t = 0; t < opts.t_steps; ++t) {
    const Var& z = g.z.back();
    const Var h = add(z, x);
    AttentionVars step = opts.transition == Transition::Block
                             ? block_step(h, w, opts.temperature, block)
                             : attention_step(h, w, opts.temperature, block);
    if (opts.gate) {
      const GateParams gate = *opts.gate;
      const Var entropy = block_row_mean(row_tsallis(step.map, opts.gate_q), block);
      const Var alpha = scalar_map(
          entropy, [gate](double s) { return entropy_gate(s, gate); },
          [gate](double s) { return entropy_gate_slope(s, gate); });
      const auto values = alpha.value().data();
      g.gate_values.emplace_back(values.begin(), values.end());
      g.z.push_back(add(z, scale_row_blocks(sub(step.out, z), alpha, block)));
    } else {
      g.z.push_back(add(z, step.out));
    }
    switch (opts.record_maps) {
      case MapRecording::All:
        g.maps.push_back(std::move(step.map));
        break;
      case MapRecording::Last:
        if (t + 1 == opts.t_steps) g.maps.push_back(std::move(step.map));
        break;
      case MapRecording::None:
        break;
    }
  }
  g.logits = matmul(g.z.back(), w.readout);
  return g;
}

Tensor LoopTrace::sequence_map(std::size_t t, std::size_t b) const {
  return attn_per_iter.at(t).slice_rows(b * seq_len, seq_len);
}

LoopTrace looped_forward(const SequenceBatch& batch, const ModelWeights& weights,
                         const LoopOptions& opts) {
  const LoopGraph g = unroll_loop(batch, WeightVars::constants(weights), opts);
  LoopTrace trace;
  trace.seq_len = batch.length;
  trace.z_per_iter.reserve(g.z.size());
  for (const Var& z : g.z) trace.z_per_iter.push_back(z.value());
  for (const Var& m : g.maps) trace.attn_per_iter.push_back(m.value());
  trace.gate_per_iter = g.gate_values;
  trace.final_logits = g.logits.value();
  return trace;
}

AccuracyCount count_correct(const Tensor& logits, const SequenceBatch& batch, AccuracyMode mode) {
  if (logits.rows() != batch.batch * batch.length) {
    throw ShapeError("accuracy: logits " + shape_string(logits) + " do not match the batch");
  }
  AccuracyCount count;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (mode == AccuracyMode::LastPosition && (r + 1) % batch.length != 0) continue;
    const int target = batch.targets[r];
    if (target == kNoTarget) continue;
    auto row = logits.row(r);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    ++count.scored;
    if (best == target) ++count.correct;
  }
  return count;
}

double predict_accuracy(const LoopTrace& trace, const SequenceBatch& batch, AccuracyMode mode) {
  if (trace.seq_len != batch.length) {
    throw std::invalid_argument("predict_accuracy: trace was produced from a different batch");
  }
  const AccuracyCount c = count_correct(trace.final_logits, batch, mode);
  if (c.scored == 0) throw std::invalid_argument("predict_accuracy: no targets");
  return static_cast<double>(c.correct) / static_cast<double>(c.scored);
}

}  // namespace eer
