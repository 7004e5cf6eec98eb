#include "eer/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace eer {

ConfigError::ConfigError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_real(const std::string& text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected a real number, got '" + text + "'");
  return value;
}

std::size_t parse_count(const std::string& text) {
  std::size_t value = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("expected a non-negative integer, got '" + text + "'");
  return value;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& text, F item) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(item(trim(part)));
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
  return out;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T, typename F>
std::string format_list(const std::vector<T>& items, F item) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + item(items[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field real_field(Member member) {
  return {[member](RunConfig& c, const std::string& v) { member(c) = parse_real(v); },
          [member](const RunConfig& c) { return format_real(member(c)); }};
}

template <typename Member>
Field count_field(Member member) {
  return {[member](RunConfig& c, const std::string& v) { member(c) = parse_count(v); },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Field bool_field(Member member) {
  return {[member](RunConfig& c, const std::string& v) { member(c) = parse_bool(v); },
          [member](const RunConfig& c) {
            return std::string(member(c) ? "true" : "false");
          }};
}

template <typename Enum, typename Member>
Field enum_field(Member member, std::vector<std::pair<Enum, std::string>> names) {
  return {[member, names](RunConfig& c, const std::string& v) {
            for (const auto& [e, n] : names) {
              if (n == v) {
                member(c) = e;
                return;
              }
            }
            std::string allowed;
            for (const auto& [e, n] : names) allowed += (allowed.empty() ? "" : " | ") + n;
            throw std::invalid_argument("expected one of " + allowed + ", got '" + v + "'");
          },
          [member, names](const RunConfig& c) {
            const Enum e = member(c);
            for (const auto& [value, n] : names)
              if (value == e) return n;
            return std::string("?");
          }};
}

#define EER_MEMBER(path) [](auto& c) -> auto& { return c.path; }

// Ordered as written by write_config.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"lambda_p", real_field(EER_MEMBER(train.lambda_p))},
      {"lambda_k", real_field(EER_MEMBER(train.lambda_k))},
      {"lambda_s", real_field(EER_MEMBER(train.lambda_s))},
      {"q", real_field(EER_MEMBER(train.q))},
      {"eta", real_field(EER_MEMBER(train.eta))},
      {"tau", real_field(EER_MEMBER(train.tau))},
      {"d", count_field(EER_MEMBER(train.d))},
      {"d_ff", count_field(EER_MEMBER(train.d_ff))},
      {"vocab", count_field(EER_MEMBER(train.vocab))},
      {"t_steps", count_field(EER_MEMBER(train.t_steps))},
      {"t_eval", count_field(EER_MEMBER(train.t_eval))},
      {"lr", real_field(EER_MEMBER(train.lr))},
      {"weight_decay", real_field(EER_MEMBER(train.weight_decay))},
      {"batch_size", count_field(EER_MEMBER(train.batch_size))},
      {"train_len_min", count_field(EER_MEMBER(train.train_len_min))},
      {"train_len_max", count_field(EER_MEMBER(train.train_len_max))},
      {"epochs", count_field(EER_MEMBER(train.epochs))},
      {"eval_interval", count_field(EER_MEMBER(train.eval_interval))},
      {"eval_samples", count_field(EER_MEMBER(train.eval_samples))},
      {"eval_lengths",
       {[](RunConfig& c, const std::string& v) {
          c.train.eval_lengths = parse_list<std::size_t>(v, parse_count);
        },
        [](const RunConfig& c) {
          return format_list(c.train.eval_lengths, [](std::size_t n) { return std::to_string(n); });
        }}},
      {"seed", count_field(EER_MEMBER(train.seed))},
      {"pe_scale", real_field(EER_MEMBER(train.pe_scale))},
      {"loss_positions",
       enum_field<LossPositions>(EER_MEMBER(train.loss_positions),
                                 {{LossPositions::LastIteration, "last-iteration"},
                                  {LossPositions::AllIterations, "all-iterations"}})},
      {"ablation_ce_only", bool_field(EER_MEMBER(train.ablation_ce_only))},
      {"eval_mode", enum_field<AccuracyMode>(EER_MEMBER(train.eval_mode),
                                             {{AccuracyMode::AllPositions, "all-positions"},
                                              {AccuracyMode::LastPosition, "last-position"}})},
      {"gate", bool_field(EER_MEMBER(train.gate))},
      {"gate_alpha_min", real_field(EER_MEMBER(train.gate_alpha_min))},
      {"gate_saturation", real_field(EER_MEMBER(train.gate_saturation))},
      {"dyn_mu", real_field(EER_MEMBER(dynamics.mu))},
      {"dyn_alpha", real_field(EER_MEMBER(dynamics.alpha))},
      {"dyn_beta",
       {[](RunConfig& c, const std::string& v) {
          c.dynamics.beta_schedule = parse_list<double>(v, parse_real);
        },
        [](const RunConfig& c) { return format_list(c.dynamics.beta_schedule, format_real); }}},
      {"dyn_tau", real_field(EER_MEMBER(dynamics.tau))},
      {"dyn_steps", count_field(EER_MEMBER(dynamics.steps))},
      {"dyn_tokens", count_field(EER_MEMBER(simulation.tokens))},
      {"dyn_z0_scale", real_field(EER_MEMBER(simulation.z0_scale))},
      {"dyn_v0_scale", real_field(EER_MEMBER(simulation.v0_scale))},
      {"dyn_checkpoint",
       {[](RunConfig& c, const std::string& v) { c.simulation.checkpoint = v; },
        [](const RunConfig& c) { return c.simulation.checkpoint; }}},
  };
  return table;
}

#undef EER_MEMBER

}  // namespace

void RunConfig::validate() const {
  train.validate();
  dynamics.validate();
  if (simulation.tokens == 0) throw std::invalid_argument("config: dyn_tokens must be >= 1");
  if (simulation.z0_scale < 0.0 || simulation.v0_scale < 0.0) {
    throw std::invalid_argument("config: dyn_z0_scale and dyn_v0_scale must be >= 0");
  }
}

RunConfig parse_config(std::istream& in) {
  std::map<std::string, const Field*> by_key;
  for (const auto& [key, field] : fields()) by_key.emplace(key, &field);

  RunConfig config;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "missing key");
    if (!seen.insert(key).second) throw ConfigError(line_no, "duplicate key '" + key + "'");
    try {
      if (key == "version") {
        if (parse_count(value) != static_cast<std::size_t>(kConfigVersion)) {
          throw std::invalid_argument("unsupported version " + value);
        }
        continue;
      }
      const auto it = by_key.find(key);
      if (it == by_key.end()) throw std::invalid_argument("unknown key '" + key + "'");
      if (value.empty() && key != "dyn_checkpoint") throw std::invalid_argument("empty value");
      it->second->set(config, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line_no, key + ": " + e.what());
    }
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void write_config(std::ostream& os, const RunConfig& config) {
  os << "version = " << kConfigVersion << '\n';
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(config) << '\n';
}

}  // namespace eer
