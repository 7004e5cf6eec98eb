#include "eer/checkpoint.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

namespace eer {

namespace {

constexpr const char* kMagic = "eer-checkpoint";

std::string hex(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, ptr);
}

double parse_hex(const std::string& token) {
  double v = 0.0;
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, v, std::chars_format::hex);
  if (ec != std::errc() || ptr != end) throw CheckpointError("checkpoint: bad value '" + token + "'");
  return v;
}

void expect_word(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw CheckpointError("checkpoint: expected '" + word + "', found '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw CheckpointError(std::string("checkpoint: cannot read ") + what);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  ck.weights.validate();
  const ModelDims dims = ck.weights.dims();
  std::size_t echo_lines = 0;
  for (char c : ck.config_echo) echo_lines += c == '\n';
  if (!ck.config_echo.empty() && ck.config_echo.back() != '\n') {
    throw CheckpointError("checkpoint: config echo must end with a newline");
  }

  os << kMagic << ' ' << kCheckpointVersion << '\n';
  os << "dims " << dims.d << ' ' << dims.d_ff << ' ' << dims.vocab << '\n';
  os << "epoch " << ck.epoch << '\n';
  os << "config " << echo_lines << '\n' << ck.config_echo;
  ck.weights.for_each([&](std::string_view name, const Tensor& t) {
    os << "array " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.cols(); ++c) os << (c ? " " : "") << hex(t(r, c));
      os << '\n';
    }
  });
  os << "end\n";
}

Checkpoint read_checkpoint(std::istream& in, const std::optional<ModelDims>& expected) {
  expect_word(in, kMagic);
  const int version = read_value<int>(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  expect_word(in, "dims");
  ModelDims dims;
  dims.d = read_value<std::size_t>(in, "d");
  dims.d_ff = read_value<std::size_t>(in, "d_ff");
  dims.vocab = read_value<std::size_t>(in, "vocab");
  if (expected && *expected != dims) {
    throw CheckpointError("checkpoint: dims (" + std::to_string(dims.d) + ", " +
                          std::to_string(dims.d_ff) + ", " + std::to_string(dims.vocab) +
                          ") do not match the configuration (" + std::to_string(expected->d) +
                          ", " + std::to_string(expected->d_ff) + ", " +
                          std::to_string(expected->vocab) + ")");
  }

  Checkpoint ck;
  expect_word(in, "epoch");
  ck.epoch = read_value<std::size_t>(in, "epoch");
  expect_word(in, "config");
  const auto echo_lines = read_value<std::size_t>(in, "config line count");
  std::string line;
  std::getline(in, line);
  for (std::size_t i = 0; i < echo_lines; ++i) {
    if (!std::getline(in, line)) throw CheckpointError("checkpoint: truncated config echo");
    ck.config_echo += line + '\n';
  }

  ck.weights = ModelWeights::zeros(dims);
  ck.weights.for_each([&](std::string_view name, Tensor& t) {
    expect_word(in, "array");
    expect_word(in, std::string(name));
    const auto rows = read_value<std::size_t>(in, "rows");
    const auto cols = read_value<std::size_t>(in, "cols");
    if (rows != t.rows() || cols != t.cols()) {
      throw CheckpointError("checkpoint: array " + std::string(name) + " has the wrong shape");
    }
    std::string token;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!(in >> token)) throw CheckpointError("checkpoint: truncated array " + std::string(name));
      t[i] = parse_hex(token);
    }
  });
  expect_word(in, "end");
  try {
    ck.weights.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw CheckpointError("checkpoint: cannot write '" + tmp + "'");
    write_checkpoint(out, checkpoint);
    if (!out.flush()) throw CheckpointError("checkpoint: write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("checkpoint: cannot move into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<ModelDims>& expected) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("checkpoint: cannot open '" + path + "'");
  return read_checkpoint(in, expected);
}

}  // namespace eer
