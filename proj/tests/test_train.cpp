#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "eer/error.hpp"
#include "eer/gradcheck.hpp"
#include "eer/train.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eer;
using fixtures::random_tensor;

namespace {

SequenceBatch random_batch(Rng& rng, std::size_t batch, std::size_t len, std::size_t vocab = 4) {
  return generate_induction_batch(rng, vocab, batch, len, TaskMode::FullSequence);
}

ModelWeights busy_weights(const ModelDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  ModelWeights w = ModelWeights::initialize(dims, rng);
  w.mlp_in_bias = random_tensor(rng, 1, dims.d_ff, 0.3);
  w.mlp_out_bias = random_tensor(rng, 1, dims.d, 0.3);
  w.norm_gain = random_tensor(rng, 1, dims.d, 0.5) + Tensor::ones(1, dims.d);
  w.norm_bias = random_tensor(rng, 1, dims.d, 0.3);
  w.readout = random_tensor(rng, dims.d, dims.vocab, 0.5);
  return w;
}

EERConfig tiny_config() {
  EERConfig c;
  c.epochs = 3;
  c.eval_interval = 2;
  c.batch_size = 2;
  c.train_len_min = 8;
  c.train_len_max = 12;
  c.t_steps = 3;
  c.t_eval = 3;
  c.eval_lengths = {6, 10, 14};
  c.eval_samples = 2;
  return c;
}

std::vector<int> decode(std::size_t code, std::size_t len, std::size_t vocab) {
  std::vector<int> seq(len);
  for (auto& t : seq) {
    t = static_cast<int>(code % vocab);
    code /= vocab;
  }
  return seq;
}

}  // namespace

TEST_CASE("last-token batches copy an earlier token to the end") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const auto b = generate_induction_batch(rng, 4, 3, 9, TaskMode::LastToken);
    REQUIRE(b.tokens.size() == 27);
    for (std::size_t s = 0; s < b.batch; ++s) {
      const auto seq = b.sequence(s);
      for (std::size_t t = 0; t + 1 < b.length; ++t) CHECK(b.targets[s * b.length + t] == kNoTarget);
      const int target = b.targets[s * b.length + b.length - 1];
      bool found = false;
      for (std::size_t i = 0; i + 1 < b.length; ++i)
        found = found || (seq[i] == seq.back() && seq[i + 1] == target);
      CHECK(found);
    }
  }
}

TEST_CASE("full-sequence targets follow the most recent occurrence") {
  // a b a b
  const std::vector<int> abab{0, 1, 0, 1};
  const auto t = induction_targets(abab);
  CHECK(t[0] == kNoTarget);
  CHECK(t[1] == kNoTarget);
  CHECK(t[2] == 1);
  CHECK(t[3] == 0);

  SUBCASE("exhaustive against brute force, vocab 3, length up to 6") {
    std::size_t checked = 0;
    for (std::size_t len = 1; len <= 6; ++len) {
      std::size_t count = 1;
      for (std::size_t i = 0; i < len; ++i) count *= 3;
      for (std::size_t code = 0; code < count; ++code) {
        const auto seq = decode(code, len, 3);
        REQUIRE(induction_targets(seq) == oracle::induction_targets(seq, kNoTarget));
        ++checked;
      }
    }
    CHECK(checked == 3 + 9 + 27 + 81 + 243 + 729);
  }

  SUBCASE("generated batches agree with the oracle") {
    Rng rng(11);
    const auto b = random_batch(rng, 4, 40);
    for (std::size_t s = 0; s < b.batch; ++s) {
      const auto seq = b.sequence(s);
      const std::vector<int> tokens(seq.begin(), seq.end());
      const std::vector<int> expect = oracle::induction_targets(tokens, kNoTarget);
      for (std::size_t t = 0; t < b.length; ++t) CHECK(b.targets[s * b.length + t] == expect[t]);
    }
  }
}

TEST_CASE("sentinels are rare at length 1000") {
  Rng rng(5);
  const auto b = random_batch(rng, 8, 1000);
  std::size_t sentinels = 0;
  for (int t : b.targets) sentinels += t == kNoTarget;
  CHECK(static_cast<double>(sentinels) / static_cast<double>(b.targets.size()) < 0.01);
}

TEST_CASE("batch generation rejects invalid dims") {
  Rng rng(1);
  CHECK_THROWS(generate_induction_batch(rng, 4, 2, 2, TaskMode::FullSequence));
  CHECK_THROWS(generate_induction_batch(rng, 1, 2, 8, TaskMode::LastToken));
  CHECK_THROWS(generate_induction_batch(rng, 4, 0, 8, TaskMode::LastToken));
}

TEST_CASE("loss components") {
  SUBCASE("task loss: perfect, uniform and random logits") {
    Rng rng(2);
    const auto batch = random_batch(rng, 2, 12);
    LoopTrace trace;
    trace.seq_len = 12;
    trace.final_logits = Tensor(24, 4);
    CHECK(task_loss(trace, batch) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    for (std::size_t r = 0; r < 24; ++r)
      if (batch.targets[r] != kNoTarget) trace.final_logits(r, batch.targets[r]) = 80.0;
    CHECK(task_loss(trace, batch) < 1e-30);

    for (int rep = 0; rep < 20; ++rep) {
      trace.final_logits = random_tensor(rng, 24, 4, 5.0);
      CHECK(task_loss(trace, batch) ==
            doctest::Approx(oracle::cross_entropy(trace.final_logits, batch.targets, kNoTarget))
                .epsilon(1e-10));
    }
  }

  SUBCASE("task loss needs a scored position") {
    SequenceBatch b;
    b.batch = 1;
    b.length = 3;
    b.tokens = {0, 1, 2};
    b.targets = {kNoTarget, kNoTarget, kNoTarget};
    LoopTrace trace;
    trace.final_logits = Tensor(3, 4);
    CHECK_THROWS(task_loss(trace, b));
  }

  SUBCASE("kinetic") {
    LoopTrace trace;
    trace.z_per_iter = {Tensor(4, 3), Tensor(4, 3)};
    CHECK(kinetic_loss(trace) == 0.0);
    trace.z_per_iter.back() = Tensor(4, 3, {1, 0, 0, 0, 1, 0, 0.6, 0.8, 0, 0, 0, -1});
    CHECK(kinetic_loss(trace) == doctest::Approx(0.5).epsilon(1e-15));

    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
      const Tensor zt = random_tensor(rng, 30, 8, 3.0);
      trace.z_per_iter = {Tensor(30, 8), zt};
      CHECK(std::abs(kinetic_loss(trace) - oracle::half_mean_row_norm(zt)) < 1e-12);
    }
  }

  SUBCASE("potential") {
    const std::vector<Tensor> one_hot{Tensor::identity(4)};
    CHECK(potential_loss(one_hot) == 0.0);
    const std::vector<Tensor> uniform{Tensor(4, 4, 0.25)};
    CHECK(potential_loss(uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
      const std::vector<Tensor> m{fixtures::random_stochastic(rng, 40, 16, 2.0)};
      CHECK(std::abs(potential_loss(m) - oracle::mean_neg_log_max(m[0])) < 1e-12);
    }
  }

  SUBCASE("entropy") {
    const std::vector<Tensor> uniform{Tensor(4, 4, 0.25)};
    CHECK(entropy_loss(uniform, 1.5, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    const std::vector<Tensor> one_hot{Tensor::identity(4)};
    CHECK(entropy_loss(one_hot, 1.5, 0.0) == 0.0);

    Rng rng(8);
    for (int rep = 0; rep < 20; ++rep) {
      const std::vector<Tensor> m{fixtures::random_stochastic(rng, 24, 12)};
      const double mean = oracle::mean_row_tsallis(m[0], 1.5);
      CHECK(std::abs(entropy_loss(m, 1.5, 0.0) - mean) < 1e-12);
      CHECK(std::abs(entropy_loss(m, 1.5, mean)) < 1e-12);
      CHECK(std::abs(entropy_loss(m, 1.5, mean + 0.3) - 0.3) < 1e-12);
    }
    CHECK_THROWS(entropy_loss(uniform, 1.0, 0.0));
    CHECK_THROWS(entropy_loss(uniform, 2.5, 0.0));
  }
}

TEST_CASE("weighted total") {
  const EERConfig config;
  LossBreakdown b;
  b.task = 0.0;
  b.kinetic = 2.0;
  b.potential = 3.0;
  b.entropy = 5.0;
  CHECK(b.recomputed_total(config) == doctest::Approx(0.402).epsilon(1e-14));

  EERConfig ce = config;
  ce.ablation_ce_only = true;
  b.task = 0.7;
  CHECK(b.recomputed_total(ce) == 0.7);
}

TEST_CASE("breakdown recomputation on random batches") {
  const EERConfig config;
  Rng rng(21);
  for (int rep = 0; rep < 4; ++rep) {
    const auto batch = random_batch(rng, 2, 10);
    const ModelWeights w = busy_weights(config.dims(), 100 + rep);
    LoopOptions opts = config.loop_options(4, 10);
    const LoopTrace trace = looped_forward(batch, w, opts);
    const LossBreakdown b = total_loss(trace, batch, config);
    CHECK(std::abs(b.total - b.recomputed_total(config)) < 1e-10);

    const double task = oracle::cross_entropy(trace.final_logits, batch.targets, kNoTarget);
    CHECK(std::abs(b.task - task) < 1e-10);
    CHECK(std::abs(b.kinetic - oracle::half_mean_row_norm(trace.z_per_iter.back())) < 1e-12);
    const Tensor& last = trace.attn_per_iter.back();
    CHECK(std::abs(b.potential - oracle::mean_neg_log_max(last)) < 1e-12);
    CHECK(std::abs(b.mean_entropy - oracle::mean_row_tsallis(last, config.q)) < 1e-12);
  }
}

TEST_CASE("entropy term pulls the mean toward eta") {
  // d|S̄ − η| / dS̄ = sign(S̄ − η): check through the graph with S̄ as a leaf.
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor map = fixtures::random_stochastic(rng, 6, 6);
    const double mean = oracle::mean_row_tsallis(map, 1.5);
    for (const double eta : {0.0, mean - 0.2, mean + 0.2}) {
      Tape tape;
      const Var s = tape.leaf(Tensor(1, 1, mean));
      const double slope = tape.backward(abs_deviation(s, eta))[s][0];
      CHECK(slope == (mean > eta ? 1.0 : -1.0));
    }
  }
}

TEST_CASE("AdamW") {
  SUBCASE("zero gradient without decay leaves weights unchanged") {
    Rng rng(1);
    ModelWeights w = ModelWeights::initialize({8, 32, 4}, rng);
    const ModelWeights before = w;
    AdamW opt({1e-3, 0.0});
    for (int i = 0; i < 5; ++i) CHECK(opt.step(w, ModelWeights::zeros({8, 32, 4})));
    CHECK(w == before);
  }

  SUBCASE("zero gradient with decay scales by exactly 1 - lr*w") {
    Rng rng(2);
    ModelWeights w = ModelWeights::initialize({8, 32, 4}, rng);
    const ModelWeights before = w;
    AdamW opt({1e-3, 0.1});
    CHECK(opt.step(w, ModelWeights::zeros({8, 32, 4})));
    const double factor = 1.0 - 1e-3 * 0.1;
    before.for_each([&](std::string_view name, const Tensor& t) {
      const Tensor& now = w.at(name);
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(now[i] == t[i] * factor);
    });
  }

  SUBCASE("quadratic descends monotonically") {
    Tensor x(1, 1, 1.0);
    AdamW opt({1e-2, 0.0});
    double prev = 1.0;
    for (int i = 0; i < 100; ++i) {
      const Tensor g(1, 1, 2.0 * x[0]);
      Tensor* p[] = {&x};
      const Tensor* gp[] = {&g};
      REQUIRE(opt.step(p, gp));
      CHECK(std::abs(x[0]) < prev);
      prev = std::abs(x[0]);
    }
    CHECK(opt.steps_taken() == 100);
  }

  SUBCASE("non-finite gradients are rejected") {
    Tensor x(1, 2, 1.0);
    AdamW opt({1e-2, 0.1});
    const Tensor g(1, 2, {0.5, std::numeric_limits<double>::quiet_NaN()});
    Tensor* p[] = {&x};
    const Tensor* gp[] = {&g};
    CHECK_FALSE(opt.step(p, gp));
    CHECK(x[0] == 1.0);
    CHECK(opt.rejected_steps() == 1);
    CHECK(opt.steps_taken() == 0);
  }
}

TEST_CASE("full model gradient matches finite differences") {
  EERConfig config;  // default lambdas
  const ModelDims dims = config.dims();
  const ModelWeights w = busy_weights(dims, 42);
  Rng rng(7);
  const auto batch = random_batch(rng, 2, 16);
  const LoopOptions opts = config.loop_options(4, 16);

  Tape tape;
  const WeightVars vars = WeightVars::leaves(tape, w);
  const LoopGraph graph = unroll_loop(batch, vars, opts);
  const LossVars loss = loss_graph(graph, batch, config);
  const ModelWeights analytic = vars.gradients(tape.backward(loss.total));

  for (std::string_view name : ModelWeights::kNames) {
    const Tensor numeric = finite_diff_gradient(
        [&](const Tensor& t) {
          ModelWeights p = w;
          p.at(name) = t;
          return total_loss(looped_forward(batch, p, opts), batch, config).total;
        },
        w.at(name));
    INFO(name);
    CHECK(max_relative_error(analytic.at(name), numeric, 1e-6) < 1e-4);
  }
}

TEST_CASE("training") {
  SUBCASE("zero epochs returns the initial weights") {
    EERConfig c = tiny_config();
    c.epochs = 0;
    const TrainResult r = train(c);
    CHECK(r.history.empty());
    CHECK(r.losses.empty());
    Rng rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
    CHECK(r.weights == ModelWeights::initialize(c.dims(), rng));
  }

  SUBCASE("runs are deterministic") {
    const EERConfig c = tiny_config();
    const TrainResult a = train(c);
    const TrainResult b = train(c);
    REQUIRE(a.losses.size() == 3);
    for (std::size_t i = 0; i < a.losses.size(); ++i) CHECK(a.losses[i].total == b.losses[i].total);
    CHECK(a.weights == b.weights);
    REQUIRE(a.history.size() == 3);  // epochs 0, 2 and the final 3
    CHECK(a.history[1].epoch == 2);
    CHECK(a.history[2].epoch == 3);
  }

  SUBCASE("every logged step satisfies the breakdown identity") {
    const EERConfig c = tiny_config();
    for (const LossBreakdown& b : train(c).losses)
      CHECK(std::abs(b.total - b.recomputed_total(c)) < 1e-10);
  }

  SUBCASE("sinks see every row and checkpoint") {
    const EERConfig c = tiny_config();
    std::size_t rows = 0, checkpoints = 0;
    TrainSinks sinks;
    sinks.on_metrics = [&](const MetricsRow&) { ++rows; };
    sinks.on_checkpoint = [&](std::size_t, const ModelWeights&) { ++checkpoints; };
    train(c, sinks);
    CHECK(rows == 3);
    CHECK(checkpoints == 3);
  }

  SUBCASE("non-finite loss aborts") {
    const EERConfig c = tiny_config();
    Rng rng(1);
    ModelWeights w = ModelWeights::initialize(c.dims(), rng);
    w.readout[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS(train_from(c, w));  // rejected up front by validation
  }

  SUBCASE("invalid configs are rejected") {
    EERConfig c = tiny_config();
    c.eval_lengths = {10, 100};
    CHECK_THROWS(train(c));
    c = tiny_config();
    c.train_len_min = 2;
    CHECK_THROWS(train(c));
  }
}

TEST_CASE("evaluation") {
  const EERConfig config;
  Rng rng(31);
  const ModelWeights w = ModelWeights::initialize(config.dims(), rng);
  const std::vector<std::size_t> lengths{10, 40, 100};

  SUBCASE("untrained weights sit near chance") {
    // Length 10 scores only ~6 positions per sequence; 256 samples keep the
    // Monte Carlo spread well inside the tolerance.
    const auto acc = evaluate(w, lengths, 256, 25, 5, config);
    REQUIRE(acc.size() == 3);
    for (double a : acc) CHECK(std::abs(a - 0.25) <= 0.05);
  }

  SUBCASE("identical seeds give identical accuracies") {
    CHECK(evaluate(w, lengths, 4, 5, 9, config) == evaluate(w, lengths, 4, 5, 9, config));
  }

  SUBCASE("logits that copy targets score 1") {
    Rng r(3);
    for (std::size_t len = 3; len <= 8; ++len) {
      const auto batch = random_batch(r, 3, len);
      LoopTrace trace;
      trace.seq_len = len;
      trace.final_logits = Tensor(batch.tokens.size(), 4);
      for (std::size_t i = 0; i < batch.targets.size(); ++i)
        if (batch.targets[i] != kNoTarget) trace.final_logits(i, batch.targets[i]) = 1.0;
      bool scored = false;
      for (int t : batch.targets) scored = scored || t != kNoTarget;
      if (scored) CHECK(predict_accuracy(trace, batch) == 1.0);
    }
  }
}

TEST_CASE("metrics csv") {
  std::ostringstream os;
  write_metrics_header(os);
  CHECK(os.str() ==
        "epoch,entropy,potential,acc_l10,acc_l100,acc_l1000,kinetic,kinetic_sum,task_loss,"
        "total_loss\n");
  MetricsRow row;
  row.epoch = 500;
  row.acc_l10 = 0.5;
  row.kinetic = 1.25;
  write_metrics_row(os, row);
  CHECK(os.str().substr(os.str().find('\n') + 1) == "500,0,0,0.5,0,0,1.25,0,0,0\n");
}
