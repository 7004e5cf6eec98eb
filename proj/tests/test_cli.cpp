#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "eer/checkpoint.hpp"
#include "eer/csv.hpp"
#include "eer/entropy.hpp"
#include "eer/train.hpp"
#include "xml_check.hpp"

using namespace eer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "eer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/// Fresh scratch directory per test case, removed afterwards.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("eer_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string path(const std::string& leaf) const { return (dir / leaf).string(); }
  std::string write(const std::string& leaf, const std::string& text) const {
    std::ofstream(dir / leaf) << text;
    return path(leaf);
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double report_value(const std::string& report, const std::string& key) {
  const auto pos = report.find("\n" + key + "=");
  REQUIRE(pos != std::string::npos);
  return std::stod(report.substr(pos + key.size() + 2));
}

std::vector<double> csv_column(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  const CsvTable t = read_csv(in);
  const auto c = t.column(name);
  REQUIRE(c);
  return t.values(*c);
}

const char* kTinyTrain =
    "epochs = 4\n"
    "eval_interval = 2\n"
    "batch_size = 2\n"
    "train_len_min = 8\n"
    "train_len_max = 12\n"
    "t_steps = 3\n"
    "t_eval = 3\n"
    "eval_lengths = 6,10,14\n"
    "eval_samples = 2\n";

}  // namespace

TEST_CASE("cli usage errors") {
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({"train"}).code == cli::kExitUsage);  // --out is required
  CHECK(run_cli({"--help"}).code == cli::kExitOk);

  Scratch s("usage");
  const std::string bad = s.write("bad.cfg", "epochs = 1\nbogus = 2\n");
  const Outcome o = run_cli({"train", "--config", bad, "--out", s.path("run")});
  CHECK(o.code == cli::kExitUsage);
  CHECK(o.err.find("line 2") != std::string::npos);
}

TEST_CASE("cli train") {
  Scratch s("train");

  SUBCASE("zero epochs writes a header-only csv") {
    const std::string cfg = s.write("zero.cfg", "epochs = 0\n");
    REQUIRE(run_cli({"train", "--config", cfg, "--out", s.path("run")}).code == cli::kExitOk);
    CHECK(slurp(s.path("run/metrics.csv")) == std::string(kMetricsHeader) + "\n");
    CHECK(fs::exists(s.path("run/checkpoint.ckpt")));
    CHECK(xml_check::well_formed_svg(slurp(s.path("run/metrics.svg"))));
  }

  SUBCASE("same seed, same bytes") {
    const std::string cfg = s.write("tiny.cfg", kTinyTrain);
    REQUIRE(run_cli({"train", "--config", cfg, "--out", s.path("a"), "--seed", "5"}).code == 0);
    REQUIRE(run_cli({"train", "--config", cfg, "--out", s.path("b"), "--seed", "5"}).code == 0);
    const std::string a = slurp(s.path("a/metrics.csv"));
    CHECK(a == slurp(s.path("b/metrics.csv")));
    CHECK(a.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
    CHECK(std::count(a.begin(), a.end(), '\n') == 4);  // header + epochs 0, 2, 4
    CHECK(xml_check::well_formed_svg(slurp(s.path("a/metrics.svg"))));

    // The echoed config reloads to the same run.
    const std::string echo = s.path("a/config.cfg");
    REQUIRE(run_cli({"train", "--config", echo, "--out", s.path("c")}).code == 0);
    CHECK(a == slurp(s.path("c/metrics.csv")));

    const Checkpoint ck = load_checkpoint(s.path("a/checkpoint.ckpt"));
    CHECK(ck.epoch == 4);
  }

  SUBCASE("divergence exits with the numerical code") {
    const std::string cfg = s.write("hot.cfg", std::string(kTinyTrain) + "lr = 1e200\n");
    const Outcome o = run_cli({"train", "--config", cfg, "--out", s.path("hot")});
    CHECK(o.code == cli::kExitNumerical);
    CHECK(fs::exists(s.path("hot/checkpoint.ckpt")));
  }
}

TEST_CASE("cli eval") {
  Scratch s("eval");
  const std::string cfg = s.write("zero.cfg", "epochs = 0\n");
  REQUIRE(run_cli({"train", "--config", cfg, "--out", s.path("run")}).code == 0);
  const std::vector<std::string> args{"eval",      "--checkpoint", s.path("run/checkpoint.ckpt"),
                                      "--lengths", "8,16",         "--samples",
                                      "4",         "--out",        s.path("acc.csv")};
  const Outcome a = run_cli(args);
  REQUIRE(a.code == 0);
  CHECK(a.out.rfind("length,accuracy\n8,", 0) == 0);
  CHECK(a.out == run_cli(args).out);
  CHECK(slurp(s.path("acc.csv")) == a.out);

  const std::string wide = s.write("wide.cfg", "d = 16\n");
  CHECK(run_cli({"eval", "--checkpoint", s.path("run/checkpoint.ckpt"), "--config", wide}).code ==
        cli::kExitUsage);
}

TEST_CASE("cli check-contraction") {
  Scratch s("contraction");
  const ModelDims dims{8, 32, 4};

  SUBCASE("zero weights") {
    save_checkpoint(s.path("zero.ckpt"), Checkpoint{ModelWeights::zeros(dims), 0, ""});
    const Outcome o = run_cli({"check-contraction", "--checkpoint", s.path("zero.ckpt")});
    REQUIRE(o.code == 0);
    CHECK(report_value(o.out, "per_step_bound") == 0.0);
    CHECK(o.out.find("\ncontractive=true") != std::string::npos);
  }

  SUBCASE("hand-built uniform-attention checkpoint") {
    ModelWeights w = ModelWeights::zeros(dims);
    w.w_v(0, 0) = 0.4;
    save_checkpoint(s.path("hand.ckpt"), Checkpoint{w, 0, ""});
    const Outcome o = run_cli({"check-contraction", "--checkpoint", s.path("hand.ckpt"), "--length",
                               "4", "--q", "1.5", "--k", "1"});
    REQUIRE(o.code == 0);
    const double expected_attn = std::sqrt(4.0 * std::pow(0.5, 4.0 / 3.0));
    CHECK(std::abs(report_value(o.out, "attn_term") - expected_attn) < 1e-6);
    CHECK(std::abs(report_value(o.out, "per_step_bound") - 0.4 * expected_attn) < 1e-6);
    CHECK(std::abs(report_value(o.out, "per_step_bound") - 0.504) < 1e-3);
    CHECK(o.out.find("\ncontractive=true") != std::string::npos);
  }

  SUBCASE("sharpened query and key weights raise the attention term") {
    Rng rng(17);
    ModelWeights w = ModelWeights::initialize(dims, rng);
    save_checkpoint(s.path("base.ckpt"), Checkpoint{w, 0, ""});
    w.w_q *= 10.0;
    w.w_k *= 10.0;
    save_checkpoint(s.path("sharp.ckpt"), Checkpoint{w, 0, ""});
    const Outcome base = run_cli({"check-contraction", "--checkpoint", s.path("base.ckpt")});
    const Outcome sharp = run_cli({"check-contraction", "--checkpoint", s.path("sharp.ckpt")});
    REQUIRE(base.code == 0);
    REQUIRE(sharp.code == 0);
    CHECK(report_value(sharp.out, "attn_term") > report_value(base.out, "attn_term"));
  }

  SUBCASE("mismatched checkpoint is rejected") {
    save_checkpoint(s.path("big.ckpt"), Checkpoint{ModelWeights::zeros({16, 32, 4}), 0, ""});
    CHECK(run_cli({"check-contraction", "--checkpoint", s.path("big.ckpt")}).code ==
          cli::kExitUsage);
  }
}

TEST_CASE("cli simulate") {
  Scratch s("simulate");
  auto simulate = [&](const std::string& name, const std::string& body) {
    const std::string cfg = s.write(name + ".cfg", body + "dyn_steps = 40\n");
    REQUIRE(run_cli({"simulate", "--config", cfg, "--out", s.path(name)}).code == 0);
    CHECK(xml_check::well_formed_svg(slurp(s.path(name + "/trajectory.svg"))));
    return s.path(name + "/trajectory.csv");
  };

  SUBCASE("frozen system stays put") {
    const auto csv = simulate("frozen", "dyn_alpha = 0\ndyn_beta = 0\ndyn_v0_scale = 0\n");
    const auto kinetic = csv_column(csv, "kinetic");
    const auto potential = csv_column(csv, "potential");
    REQUIRE(kinetic.size() == 41);
    for (double k : kinetic) CHECK(k == 0.0);
    for (double p : potential) CHECK(p == potential.front());
  }

  SUBCASE("ballistic motion keeps its kinetic energy") {
    const auto csv =
        simulate("ballistic", "dyn_mu = 1\ndyn_alpha = 0\ndyn_beta = 0\ndyn_v0_scale = 0.5\n");
    const auto kinetic = csv_column(csv, "kinetic");
    CHECK(kinetic.front() > 0.0);
    for (double k : kinetic) CHECK(k == doctest::Approx(kinetic.front()).epsilon(1e-12));
  }

  SUBCASE("damping cools the latent") {
    const auto csv =
        simulate("damped", "dyn_mu = 0.8\ndyn_alpha = 0\ndyn_beta = 0\ndyn_v0_scale = 0.5\n");
    const auto kinetic = csv_column(csv, "kinetic");
    CHECK(kinetic.back() < kinetic.front());
  }

  SUBCASE("deterministic under a fixed seed") {
    const std::string cfg = s.write("det.cfg", "dyn_steps = 20\n");
    REQUIRE(run_cli({"simulate", "--config", cfg, "--out", s.path("x"), "--seed", "3"}).code == 0);
    REQUIRE(run_cli({"simulate", "--config", cfg, "--out", s.path("y"), "--seed", "3"}).code == 0);
    CHECK(slurp(s.path("x/trajectory.csv")) == slurp(s.path("y/trajectory.csv")));
  }
}

TEST_CASE("cli landscape") {
  Scratch s("landscape");
  const std::string cfg = s.write("small.cfg", "t_steps = 3\n");
  Rng rng(2);
  save_checkpoint(s.path("w.ckpt"),
                  Checkpoint{ModelWeights::initialize({8, 32, 4}, rng), 0, ""});
  const std::vector<std::string> base{"landscape", "--checkpoint", s.path("w.ckpt"), "--config",
                                      cfg,         "--resolution", "3",              "--batch",
                                      "2",         "--length",     "10"};
  auto with_out = [&](const std::string& out) {
    auto args = base;
    args.insert(args.end(), {"--out", s.path(out)});
    return run_cli(args);
  };
  REQUIRE(with_out("a.csv").code == 0);
  REQUIRE(with_out("b.csv").code == 0);
  CHECK(slurp(s.path("a.csv")) == slurp(s.path("b.csv")));
  CHECK(xml_check::well_formed_svg(slurp(s.path("a.svg"))));
  CHECK(xml_check::well_formed_svg(slurp(s.path("a.task.svg"))));
  CHECK(csv_column(s.path("a.csv"), "total_loss").size() == 9);
}

TEST_CASE("cli plot") {
  Scratch s("plot");

  SUBCASE("two rows make a two-point polyline") {
    const std::string in = s.write(
        "m.csv", std::string(kMetricsHeader) + "\n0,1,1,0.3,0.3,0.3,5,5,1,1\n500,1,1,0.8,0.8,0.8,4,4,1,1\n");
    REQUIRE(run_cli({"plot", "--input", in, "--out", s.path("m.svg")}).code == 0);
    const std::string svg = slurp(s.path("m.svg"));
    CHECK(xml_check::well_formed_svg(svg));
    CHECK(svg.find("<polyline") != std::string::npos);
  }

  SUBCASE("header-only input gives an axes-only chart") {
    const std::string in = s.write("e.csv", std::string(kMetricsHeader) + "\n");
    REQUIRE(run_cli({"plot", "--input", in, "--out", s.path("e.svg")}).code == 0);
    const std::string svg = slurp(s.path("e.svg"));
    CHECK(xml_check::well_formed_svg(svg));
    CHECK(svg.find("<polyline") == std::string::npos);
  }

  SUBCASE("malformed input fails") {
    const std::string in = s.write("bad.csv", "a,b\n1\n");
    CHECK(run_cli({"plot", "--input", in, "--out", s.path("bad.svg")}).code != 0);
    CHECK(run_cli({"plot", "--input", in, "--out", s.path("x.svg"), "--columns", "zz"}).code != 0);
    CHECK(run_cli({"plot", "--input", s.path("missing.csv"), "--out", s.path("y.svg")}).code != 0);
  }
}
