#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace eer::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

struct TrainArgs {
  std::string config;  // empty: built-in defaults
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> lengths;  // empty: config eval_lengths
  std::optional<std::size_t> samples;
  std::string out;  // empty: stdout only
};

struct ContractionArgs {
  std::string checkpoint;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t length = 16;
  std::optional<double> q;
  std::optional<int> k;  // default: t_steps
};

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct LandscapeArgs {
  std::string checkpoint;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t resolution = 21;
  double extent = 1.0;
  std::size_t batch = 8;
  std::size_t length = 32;
};

struct PlotArgs {
  std::string input;
  std::string out;
  std::vector<std::string> columns;  // empty: chosen from the header
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_check_contraction(const ContractionArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_landscape(const LandscapeArgs& args, std::ostream& out, std::ostream& err);
int cmd_plot(const PlotArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eer::cli
