#include "commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "eer/checkpoint.hpp"
#include "eer/config.hpp"
#include "eer/csv.hpp"
#include "eer/entropy.hpp"
#include "eer/error.hpp"
#include "eer/hamiltonian.hpp"
#include "eer/landscape.hpp"
#include "eer/svg.hpp"
#include "eer/train.hpp"

namespace eer::cli {

namespace fs = std::filesystem;

namespace {

RunConfig config_or_defaults(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig c = path.empty() ? RunConfig{} : load_config(path);
  if (seed) c.train.seed = *seed;
  return c;
}

std::string config_text(const RunConfig& c) {
  std::ostringstream os;
  write_config(os, c);
  return os.str();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void write_text(const fs::path& path, const std::string& text) { open_output(path) << text; }

LineChart accuracy_chart(const std::vector<MetricsRow>& history) {
  LineChart chart{"Length generalization", "epoch", "accuracy", {}};
  const char* names[] = {"acc_l10", "acc_l100", "acc_l1000"};
  for (int i = 0; i < 3; ++i) {
    Series s{names[i], {}, {}};
    for (const MetricsRow& r : history) {
      s.x.push_back(static_cast<double>(r.epoch));
      s.y.push_back(i == 0 ? r.acc_l10 : i == 1 ? r.acc_l100 : r.acc_l1000);
    }
    chart.series.push_back(std::move(s));
  }
  return chart;
}

std::vector<int> sample_tokens(Rng& rng, std::size_t vocab, std::size_t n) {
  std::vector<int> tokens(n);
  for (int& t : tokens) t = static_cast<int>(rng.uniform_int(vocab));
  return tokens;
}

Tensor uniform_row(Rng& rng, std::size_t d, double scale) {
  Tensor t(1, d);
  for (std::size_t i = 0; i < d; ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  const RunConfig config = config_or_defaults(args.config, args.seed);
  const fs::path dir(args.out);
  fs::create_directories(dir);
  const std::string echo = config_text(config);
  write_text(dir / "config.cfg", echo);

  std::ofstream metrics = open_output(dir / "metrics.csv");
  write_metrics_header(metrics);
  metrics.flush();

  TrainSinks sinks;
  std::vector<MetricsRow> history;
  sinks.on_metrics = [&](const MetricsRow& row) {
    write_metrics_row(metrics, row);
    metrics.flush();
    history.push_back(row);
    out << "epoch " << row.epoch << " task " << row.task_loss << " total " << row.total_loss
        << " acc " << row.acc_l10 << '/' << row.acc_l100 << '/' << row.acc_l1000 << std::endl;
  };
  sinks.on_checkpoint = [&](std::size_t epoch, const ModelWeights& w) {
    save_checkpoint((dir / "checkpoint.ckpt").string(), Checkpoint{w, epoch, echo});
  };
  sinks.on_event = [&](const std::string& message) { err << message << std::endl; };

  int status = kExitOk;
  try {
    const TrainResult result = train(config.train, sinks);
    if (config.train.epochs == 0) {
      save_checkpoint((dir / "checkpoint.ckpt").string(), Checkpoint{result.weights, 0, echo});
    }
  } catch (const TrainingAborted& e) {
    err << "training aborted: " << e.what() << "; last checkpoint kept in " << dir.string() << '\n';
    status = kExitNumerical;
  }
  write_text(dir / "metrics.svg", render_line_chart(accuracy_chart(history)));
  return status;
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream&) {
  const RunConfig config = config_or_defaults(args.config, args.seed);
  const Checkpoint ck = load_checkpoint(args.checkpoint, config.train.dims());
  const std::vector<std::size_t> lengths =
      args.lengths.empty() ? config.train.eval_lengths : args.lengths;
  const std::size_t samples = args.samples.value_or(config.train.eval_samples);
  const auto acc = evaluate(ck.weights, lengths, samples, config.train.t_eval, config.train.seed,
                            config.train);
  std::ostringstream csv;
  csv << "length,accuracy\n" << std::setprecision(10);
  for (std::size_t i = 0; i < lengths.size(); ++i) csv << lengths[i] << ',' << acc[i] << '\n';
  out << csv.str();
  if (!args.out.empty()) write_text(args.out, csv.str());
  return kExitOk;
}

int cmd_check_contraction(const ContractionArgs& args, std::ostream& out, std::ostream&) {
  const RunConfig config = config_or_defaults(args.config, args.seed);
  const Checkpoint ck = load_checkpoint(args.checkpoint, config.train.dims());
  const double q = args.q.value_or(config.train.q);
  const int k = args.k.value_or(static_cast<int>(config.train.t_steps));

  Rng rng(config.train.seed);
  const SequenceBatch batch = generate_induction_batch(rng, config.train.vocab, 1, args.length,
                                                       TaskMode::FullSequence);
  LoopOptions opts = config.train.loop_options(config.train.t_steps, args.length);
  opts.record_maps = MapRecording::All;
  const LoopTrace trace = looped_forward(batch, ck.weights, opts);
  const TrajectoryCertificate traj = certify_trajectory(ck.weights, trace.attn_per_iter, q);
  const ContractionCertificate last =
      contraction_certificate(ck.weights, trace.attn_per_iter.back(), q, k);

  out << "checkpoint=" << args.checkpoint << '\n'
      << "sequence_length=" << args.length << '\n'
      << "q=" << std::setprecision(17) << q << '\n'
      << format_report(last) << format_report(traj);
  return kExitOk;
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream&) {
  const RunConfig config = config_or_defaults(args.config, args.seed);
  const ModelWeights weights = [&] {
    if (!config.simulation.checkpoint.empty()) {
      return load_checkpoint(config.simulation.checkpoint, config.train.dims()).weights;
    }
    Rng init(config.train.seed);
    return ModelWeights::initialize(config.train.dims(), init);
  }();

  Rng rng(config.train.seed + 1);
  const auto tokens = sample_tokens(rng, config.train.vocab, config.simulation.tokens);
  const Tensor x = embed_sequence(tokens, weights, config.train.pe_scale);
  const Tensor z0 = uniform_row(rng, config.train.d, config.simulation.z0_scale);
  const Tensor v0 = uniform_row(rng, config.train.d, config.simulation.v0_scale);
  const auto trajectory = simulate_trajectory(z0, x, weights, config.dynamics, v0);

  const fs::path dir(args.out);
  fs::create_directories(dir);
  {
    std::ofstream csv = open_output(dir / "trajectory.csv");
    write_trajectory_csv(csv, trajectory);
  }
  LineChart chart{"Latent dynamics", "step", "energy", {{"kinetic", {}, {}}, {"potential", {}, {}}}};
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    for (auto& s : chart.series) s.x.push_back(static_cast<double>(i));
    chart.series[0].y.push_back(trajectory[i].kinetic);
    chart.series[1].y.push_back(trajectory[i].potential);
  }
  write_text(dir / "trajectory.svg", render_line_chart(chart));
  out << "kinetic start=" << trajectory.front().kinetic << " end=" << trajectory.back().kinetic
      << "\npotential start=" << trajectory.front().potential
      << " end=" << trajectory.back().potential << '\n';
  return kExitOk;
}

int cmd_landscape(const LandscapeArgs& args, std::ostream& out, std::ostream&) {
  const RunConfig config = config_or_defaults(args.config, args.seed);
  const Checkpoint ck = load_checkpoint(args.checkpoint, config.train.dims());
  LandscapeSpec spec{args.resolution, args.extent, args.batch, args.length, config.train.seed};
  const LandscapeGrid grid = compute_landscape(ck.weights, config.train, spec);

  const fs::path csv_path(args.out);
  {
    std::ofstream csv = open_output(csv_path);
    write_landscape_csv(csv, grid);
  }
  fs::path svg_path = csv_path;
  svg_path.replace_extension(".svg");
  write_text(svg_path, render_heatmap("Total loss", grid.coords, grid.coords, grid.total));
  fs::path ce_path = csv_path;
  ce_path.replace_extension(".task.svg");
  write_text(ce_path, render_heatmap("Task loss", grid.coords, grid.coords, grid.task));
  out << "center total=" << std::setprecision(12) << grid.total[grid.center()]
      << " task=" << grid.task[grid.center()] << '\n';
  return kExitOk;
}

int cmd_plot(const PlotArgs& args, std::ostream&, std::ostream&) {
  std::ifstream in(args.input);
  if (!in) throw std::runtime_error("cannot open '" + args.input + "'");
  const CsvTable table = read_csv(in);
  if (table.columns.empty()) throw CsvError("csv: empty header");

  std::vector<std::string> columns = args.columns;
  if (columns.empty()) {
    if (table.column("acc_l1000")) {
      columns = {"acc_l10", "acc_l100", "acc_l1000"};
    } else if (table.column("kinetic") && table.column("potential")) {
      columns = {"kinetic", "potential"};
    } else {
      columns.assign(table.columns.begin() + 1, table.columns.end());
    }
  }
  LineChart chart{fs::path(args.input).filename().string(), table.columns.front(), "value", {}};
  const std::vector<double> x = table.values(0);
  for (const std::string& name : columns) {
    const auto c = table.column(name);
    if (!c) throw CsvError("csv: no column named '" + name + "'");
    chart.series.push_back({name, x, table.values(*c)});
  }
  write_text(args.out, render_line_chart(chart));
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy-entropy regularized looped transformer"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and log metrics");
  train_cmd->add_option("--config", train_args.config, "Config file (key = value)")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--seed", train_args.seed, "Override the config seed");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Length-generalization accuracy of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--config", eval_args.config)->check(CLI::ExistingFile);
  eval_cmd->add_option("--seed", eval_args.seed);
  eval_cmd->add_option("--lengths", eval_args.lengths)->delimiter(',');
  eval_cmd->add_option("--samples", eval_args.samples);
  eval_cmd->add_option("--out", eval_args.out, "Also write the CSV here");

  ContractionArgs cc_args;
  auto* cc_cmd = app.add_subcommand("check-contraction", "Contraction certificate along a sampled loop");
  cc_cmd->add_option("--checkpoint", cc_args.checkpoint)->required()->check(CLI::ExistingFile);
  cc_cmd->add_option("--config", cc_args.config)->check(CLI::ExistingFile);
  cc_cmd->add_option("--seed", cc_args.seed);
  cc_cmd->add_option("--length", cc_args.length, "Sampled sequence length")->check(CLI::Range(3, 100000));
  cc_cmd->add_option("--q", cc_args.q, "Tsallis index");
  cc_cmd->add_option("--k", cc_args.k, "Loop count for the k-power bound")->check(CLI::PositiveNumber);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Integrate the latent dynamics");
  sim_cmd->add_option("--config", sim_args.config)->check(CLI::ExistingFile);
  sim_cmd->add_option("--out", sim_args.out, "Output directory")->required();
  sim_cmd->add_option("--seed", sim_args.seed);

  LandscapeArgs land_args;
  auto* land_cmd = app.add_subcommand("landscape", "Loss surface over two random directions");
  land_cmd->add_option("--checkpoint", land_args.checkpoint)->required()->check(CLI::ExistingFile);
  land_cmd->add_option("--config", land_args.config)->check(CLI::ExistingFile);
  land_cmd->add_option("--out", land_args.out, "CSV path")->required();
  land_cmd->add_option("--seed", land_args.seed);
  land_cmd->add_option("--resolution", land_args.resolution)->check(CLI::Range(1, 201));
  land_cmd->add_option("--extent", land_args.extent)->check(CLI::NonNegativeNumber);
  land_cmd->add_option("--batch", land_args.batch)->check(CLI::PositiveNumber);
  land_cmd->add_option("--length", land_args.length)->check(CLI::Range(3, 100000));

  PlotArgs plot_args;
  auto* plot_cmd = app.add_subcommand("plot", "Line chart of a metrics or trajectory CSV");
  plot_cmd->add_option("--input", plot_args.input)->required();
  plot_cmd->add_option("--out", plot_args.out, "SVG path")->required();
  plot_cmd->add_option("--columns", plot_args.columns)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out, err);
    if (*eval_cmd) return cmd_eval(eval_args, out, err);
    if (*cc_cmd) return cmd_check_contraction(cc_args, out, err);
    if (*sim_cmd) return cmd_simulate(sim_args, out, err);
    if (*land_cmd) return cmd_landscape(land_args, out, err);
    if (*plot_cmd) return cmd_plot(plot_args, out, err);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace eer::cli
