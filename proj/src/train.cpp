#include "eer/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <stdexcept>

#include "eer/entropy.hpp"
#include "eer/error.hpp"
#include "eer/ops.hpp"

namespace eer {

void EERConfig::validate() const {
  if (!(q > 1.0 && q <= 2.0)) throw std::invalid_argument("config: q must lie in (1, 2]");
  if (lambda_p < 0.0 || lambda_k < 0.0 || lambda_s < 0.0) {
    throw std::invalid_argument("config: loss weights must be non-negative");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("config: tau must be positive");
  if (d == 0 || d_ff == 0) throw std::invalid_argument("config: d and d_ff must be positive");
  if (vocab < 2) throw std::invalid_argument("config: vocab must be >= 2");
  if (t_steps < 1 || t_eval < 1) throw std::invalid_argument("config: t_steps and t_eval must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (train_len_min < 3 || train_len_min > train_len_max) {
    throw std::invalid_argument("config: need 3 <= train_len_min <= train_len_max");
  }
  if (eval_interval < 1) throw std::invalid_argument("config: eval_interval must be >= 1");
  if (eval_samples < 1) throw std::invalid_argument("config: eval_samples must be >= 1");
  if (eval_lengths.size() != 3) {
    throw std::invalid_argument("config: eval_lengths must name three lengths (the acc columns)");
  }
  for (std::size_t len : eval_lengths)
    if (len < 3) throw std::invalid_argument("config: eval lengths must be >= 3");
  if (!(lr > 0.0) || weight_decay < 0.0) throw std::invalid_argument("config: bad optimizer settings");
  if (gate) GateParams{gate_alpha_min, 1.0}.validate();
}

LoopOptions EERConfig::loop_options(std::size_t t, std::size_t length) const {
  LoopOptions o;
  o.t_steps = t;
  o.temperature = tau;
  o.pe_scale = pe_scale;
  if (gate) {
    const double sat = gate_saturation > 0.0 ? gate_saturation : uniform_tsallis_entropy(length, q);
    o.gate = GateParams{gate_alpha_min, sat};
    o.gate_q = q;
  }
  o.record_maps =
      loss_positions == LossPositions::AllIterations ? MapRecording::All : MapRecording::Last;
  return o;
}

std::vector<int> induction_targets(std::span<const int> tokens) {
  std::vector<int> targets(tokens.size(), kNoTarget);
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    for (std::size_t j = t; j-- > 0;) {
      if (tokens[j] == tokens[t]) {
        targets[t] = tokens[j + 1];
        break;
      }
    }
  }
  return targets;
}

SequenceBatch generate_induction_batch(Rng& rng, std::size_t vocab, std::size_t batch,
                                       std::size_t len, TaskMode mode) {
  if (len < 3 || vocab < 2 || batch < 1) {
    throw std::invalid_argument("generate_induction_batch: need len >= 3, vocab >= 2, batch >= 1");
  }
  SequenceBatch out{batch, len, std::vector<int>(batch * len), std::vector<int>(batch * len, kNoTarget)};
  for (std::size_t b = 0; b < batch; ++b) {
    int* tok = out.tokens.data() + b * len;
    for (std::size_t i = 0; i < len; ++i) tok[i] = static_cast<int>(rng.uniform_int(vocab));
    if (mode == TaskMode::LastToken) {
      const std::size_t i = rng.uniform_int(len - 1);
      tok[len - 1] = tok[i];
      out.targets[b * len + len - 1] = tok[i + 1];
    } else {
      const auto targets = induction_targets(std::span<const int>(tok, len));
      std::copy(targets.begin(), targets.end(), out.targets.begin() + static_cast<std::ptrdiff_t>(b * len));
    }
  }
  return out;
}

double LossBreakdown::recomputed_total(const EERConfig& c) const {
  if (c.ablation_ce_only) return task;
  return task + c.lambda_p * potential + c.lambda_k * kinetic + c.lambda_s * entropy;
}

LossBreakdown LossVars::values() const {
  return {task.scalar(), kinetic.scalar(), potential.scalar(), entropy.scalar(),
          total.scalar(), mean_entropy.scalar(), kinetic_sum};
}

namespace {

Var mean_over(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return terms.size() == 1 ? acc : scale(acc, 1.0 / static_cast<double>(terms.size()));
}

std::vector<Var> scoped_maps(const std::vector<Var>& maps, LossPositions scope) {
  if (maps.empty()) throw std::invalid_argument("loss: no attention maps recorded");
  if (scope == LossPositions::LastIteration) return {maps.back()};
  return maps;
}

}  // namespace

LossVars loss_graph(const LoopGraph& graph, const SequenceBatch& batch, const EERConfig& config) {
  LossVars out;
  out.task = cross_entropy(graph.logits, batch.targets);

  const Var displacement = sub(graph.z.back(), graph.z.front());
  const Var norm_sum = row_norm_sum(displacement);
  out.kinetic_sum = norm_sum.scalar();
  out.kinetic = scale(norm_sum, 0.5 / static_cast<double>(displacement.rows()));

  const std::vector<Var> maps = scoped_maps(graph.maps, config.loss_positions);
  std::vector<Var> potentials;
  std::vector<Var> entropies;
  for (const Var& m : maps) {
    potentials.push_back(mean_neg_log_row_max(m));
    entropies.push_back(tsallis_row_mean(m, config.q));
  }
  out.potential = mean_over(potentials);
  out.mean_entropy = mean_over(entropies);
  out.entropy = abs_deviation(out.mean_entropy, config.eta);

  if (config.ablation_ce_only) {
    out.total = out.task;
  } else {
    out.total = add(add(add(out.task, scale(out.potential, config.lambda_p)),
                        scale(out.kinetic, config.lambda_k)),
                    scale(out.entropy, config.lambda_s));
  }
  return out;
}

double task_loss(const LoopTrace& trace, const SequenceBatch& batch) {
  if (trace.final_logits.rows() != batch.targets.size()) {
    throw ShapeError("task_loss: trace and batch disagree");
  }
  return cross_entropy(Var(trace.final_logits), batch.targets).scalar();
}

double kinetic_loss(const LoopTrace& trace) {
  if (trace.z_per_iter.size() < 2) throw std::invalid_argument("kinetic_loss: incomplete trace");
  const Tensor disp = trace.z_per_iter.back() - trace.z_per_iter.front();
  return 0.5 * row_norm_sum(Var(disp)).scalar() / static_cast<double>(disp.rows());
}

double potential_loss(std::span<const Tensor> maps) {
  if (maps.empty()) throw std::invalid_argument("potential_loss: no maps");
  double total = 0.0;
  for (const Tensor& m : maps) total += mean_neg_log_row_max(Var(m)).scalar();
  return total / static_cast<double>(maps.size());
}

double entropy_loss(std::span<const Tensor> maps, double q, double eta) {
  if (!(q > 1.0 && q <= 2.0)) throw std::invalid_argument("entropy_loss: q must lie in (1, 2]");
  if (maps.empty()) throw std::invalid_argument("entropy_loss: no maps");
  double total = 0.0;
  for (const Tensor& m : maps) total += tsallis_row_mean(Var(m), q).scalar();
  return std::abs(total / static_cast<double>(maps.size()) - eta);
}

LossBreakdown total_loss(const LoopTrace& trace, const SequenceBatch& batch,
                         const EERConfig& config) {
  LoopGraph g;
  for (const Tensor& z : trace.z_per_iter) g.z.emplace_back(z);
  for (const Tensor& m : trace.attn_per_iter) g.maps.emplace_back(m);
  g.logits = Var(trace.final_logits);
  return loss_graph(g, batch, config).values();
}

bool AdamW::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("AdamW: params/grads mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "AdamW::step");
    if (!grads[i]->all_finite()) {
      ++rejected_;
      return false;
    }
  }
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  } else if (m_.size() != params.size()) {
    throw std::invalid_argument("AdamW: parameter set changed between steps");
  }
  ++t_;
  const auto& o = options_;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
  const double decay = 1.0 - o.lr * o.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] = p[j] * decay - o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
  return true;
}

bool AdamW::step(ModelWeights& weights, const ModelWeights& grads) {
  std::vector<Tensor*> params;
  std::vector<const Tensor*> gs;
  weights.for_each([&](std::string_view, Tensor& t) { params.push_back(&t); });
  grads.for_each([&](std::string_view, const Tensor& t) { gs.push_back(&t); });
  return step(params, gs);
}

void write_metrics_header(std::ostream& os) { os << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(10);
  os << r.epoch << ',' << r.entropy << ',' << r.potential << ',' << r.acc_l10 << ','
     << r.acc_l100 << ',' << r.acc_l1000 << ',' << r.kinetic << ',' << r.kinetic_sum << ','
     << r.task_loss << ',' << r.total_loss << '\n';
  os.flags(flags);
  os.precision(precision);
}

std::vector<double> evaluate(const ModelWeights& weights, std::span<const std::size_t> lengths,
                             std::size_t samples, std::size_t t_eval, std::uint64_t seed,
                             const EERConfig& config) {
  weights.validate();
  std::vector<double> acc;
  Rng rng(seed);
  for (std::size_t len : lengths) {
    const SequenceBatch batch =
        generate_induction_batch(rng, weights.dims().vocab, samples, len, TaskMode::FullSequence);
    LoopOptions opts = config.loop_options(t_eval, len);
    opts.record_maps = MapRecording::None;
    AccuracyCount total;
    for (std::size_t b = 0; b < batch.batch; ++b) {
      const SequenceBatch one = batch.single(b);
      const LoopGraph g = unroll_loop(one, WeightVars::constants(weights), opts);
      const AccuracyCount c = count_correct(g.logits.value(), one, config.eval_mode);
      total.correct += c.correct;
      total.scored += c.scored;
    }
    if (total.scored == 0) throw std::invalid_argument("evaluate: no targets at length " + std::to_string(len));
    acc.push_back(static_cast<double>(total.correct) / static_cast<double>(total.scored));
  }
  return acc;
}

namespace {

constexpr std::uint64_t kInitStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kEvalStream = 0xd1b54a32d192ed03ULL;

std::uint64_t eval_seed(std::uint64_t seed, std::size_t epoch) {
  return (seed ^ kEvalStream) + 0x100000001b3ULL * static_cast<std::uint64_t>(epoch + 1);
}

}  // namespace

TrainResult train(const EERConfig& config, const TrainSinks& sinks) {
  config.validate();
  Rng init_rng(config.seed ^ kInitStream);
  return train_from(config, ModelWeights::initialize(config.dims(), init_rng), sinks);
}

TrainResult train_from(const EERConfig& config, ModelWeights weights, const TrainSinks& sinks) {
  config.validate();
  weights.validate();
  if (weights.dims() != config.dims()) throw ShapeError("train: weights do not match config dims");

  TrainResult result;
  if (config.epochs == 0) {
    result.weights = std::move(weights);
    return result;
  }
  Rng data_rng(config.seed);
  AdamW optimizer({config.lr, config.weight_decay, 0.9, 0.999, 1e-8});

  for (std::size_t epoch = 0; epoch <= config.epochs; ++epoch) {
    const bool last = epoch == config.epochs;
    const bool log_now = epoch % config.eval_interval == 0 || last;
    const auto len = static_cast<std::size_t>(
        data_rng.uniform_int(static_cast<std::int64_t>(config.train_len_min),
                             static_cast<std::int64_t>(config.train_len_max)));
    const SequenceBatch batch = generate_induction_batch(data_rng, config.vocab, config.batch_size,
                                                         len, TaskMode::FullSequence);
    const LoopOptions opts = config.loop_options(config.t_steps, len);

    Tape tape;
    const WeightVars vars =
        last ? WeightVars::constants(weights) : WeightVars::leaves(tape, weights);
    const LoopGraph graph = unroll_loop(batch, vars, opts);
    const LossVars loss = loss_graph(graph, batch, config);
    const LossBreakdown values = loss.values();
    if (!std::isfinite(values.total)) {
      throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch), weights, epoch);
    }

    if (log_now) {
      MetricsRow row;
      row.epoch = epoch;
      row.entropy = values.mean_entropy;
      row.potential = values.potential;
      row.kinetic = values.kinetic;
      row.kinetic_sum = values.kinetic_sum;
      row.task_loss = values.task;
      row.total_loss = values.total;
      const auto acc = evaluate(weights, config.eval_lengths, config.eval_samples, config.t_eval,
                                eval_seed(config.seed, epoch), config);
      row.acc_l10 = acc[0];
      row.acc_l100 = acc[1];
      row.acc_l1000 = acc[2];
      result.history.push_back(row);
      if (sinks.on_metrics) sinks.on_metrics(row);
      if (sinks.on_checkpoint) sinks.on_checkpoint(epoch, weights);
    }
    if (last) break;

    result.losses.push_back(values);
    const Gradients grads = tape.backward(loss.total);
    if (!optimizer.step(weights, vars.gradients(grads)) && sinks.on_event) {
      sinks.on_event("epoch " + std::to_string(epoch) + ": non-finite gradient, step rejected");
    }
  }
  result.weights = std::move(weights);
  return result;
}

}  // namespace eer
