#include "bglm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace bglm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse '" + v + "' as a number");
  }
  return out;
}

std::size_t as_count(const std::string& k, const std::string& v) { return parse_number<std::size_t>(k, v); }
double as_real(const std::string& k, const std::string& v) { return parse_number<double>(k, v); }
std::uint64_t as_u64(const std::string& k, const std::string& v) { return parse_number<std::uint64_t>(k, v); }

bool as_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + k + "': expected true/false, got '" + v + "'");
}

GateSource as_mode(const std::string& k, const std::string& v) {
  if (v == "hidden") return GateSource::Hidden;
  if (v == "posterior") return GateSource::Posterior;
  throw ConfigError("key '" + k + "': expected hidden or posterior, got '" + v + "'");
}

bool apply_synth_key(SynthConfig& c, const std::string& k, const std::string& v) {
  if (k == "shared_vocab") c.shared_vocab = as_count(k, v);
  else if (k == "group_size") c.group_size = as_count(k, v);
  else if (k == "beta") c.beta = as_real(k, v);
  else if (k == "p_active") c.p_active = as_real(k, v);
  else if (k == "seq_len") c.seq_len = as_count(k, v);
  else if (k == "n_sequences") c.n_sequences = as_count(k, v);
  else if (k == "train_frac") c.train_frac = as_real(k, v);
  else if (k == "valid_frac") c.valid_frac = as_real(k, v);
  else if (k == "synth_seed") c.seed = as_u64(k, v);
  else if (k == "synth_mode") {
    if (v == "unigram") c.mode = SynthMode::Unigram;
    else if (v == "bigram") c.mode = SynthMode::Bigram;
    else throw ConfigError("key 'synth_mode': expected unigram or bigram, got '" + v + "'");
  } else {
    return false;
  }
  return true;
}

bool apply_behavior_key(PipelineConfig& c, const std::string& k, const std::string& v) {
  auto& b = c.behavior;
  if (k == "beh_embed_dim") c.beh_embed_dim = as_count(k, v);
  else if (k == "beh_hidden_dim") {
    c.beh_hidden_dim = as_count(k, v);
    c.train.behavior_hidden = c.beh_hidden_dim;
  }
  else if (k == "beh_epochs") b.epochs = as_count(k, v);
  else if (k == "beh_batch_size") b.batch_size = as_count(k, v);
  else if (k == "beh_lr") b.lr = as_real(k, v);
  else if (k == "beh_lr_decay") b.lr_decay = as_real(k, v);
  else if (k == "beh_decay_start_epoch") b.decay_start_epoch = as_count(k, v);
  else if (k == "beh_clip_norm") b.clip_norm = as_real(k, v);
  else if (k == "beh_init_range") b.init_range = as_real(k, v);
  else if (k == "beh_seed") b.seed = as_u64(k, v);
  else return false;
  return true;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(trim(std::string_view(v).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string at_line(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source) {
  std::vector<KeyValue> out;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(at_line(source, lineno) + "expected key = value");
    KeyValue kv{trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), lineno};
    if (kv.key.empty()) throw ConfigError(at_line(source, lineno) + "empty key");
    if (!seen.insert(kv.key).second) throw ConfigError(at_line(source, lineno) + "duplicate key '" + kv.key + "'");
    out.push_back(std::move(kv));
  }
  return out;
}

bool apply_train_key(TrainConfig& c, const std::string& k, const std::string& v) {
  if (k == "epochs") c.epochs = as_count(k, v);
  else if (k == "batch_size") c.batch_size = as_count(k, v);
  else if (k == "bptt_len") c.bptt_len = as_count(k, v);
  else if (k == "lr_initial") c.lr_initial = as_real(k, v);
  else if (k == "lr_decay") c.lr_decay = as_real(k, v);
  else if (k == "decay_start_epoch") c.decay_start_epoch = as_count(k, v);
  else if (k == "clip_norm") c.clip_norm = as_real(k, v);
  else if (k == "dropout_p") c.dropout_p = as_real(k, v);
  else if (k == "init_range") c.init_range = as_real(k, v);
  else if (k == "seed") c.seed = as_u64(k, v);
  else if (k == "mode") c.mode = as_mode(k, v);
  else if (k == "gating_enabled") c.gating_enabled = as_bool(k, v);
  else if (k == "embed_dim") c.dims.embed = as_count(k, v);
  else if (k == "hidden_dim") c.dims.hidden = as_count(k, v);
  else if (k == "layers") c.dims.layers = as_count(k, v);
  else if (k == "gate_dim") c.dims.gate_hidden = as_count(k, v);
  else return false;
  return true;
}

std::vector<std::pair<std::string, std::string>> train_config_items(const TrainConfig& c) {
  return {
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"bptt_len", std::to_string(c.bptt_len)},
      {"lr_initial", format_double(c.lr_initial)},
      {"lr_decay", format_double(c.lr_decay)},
      {"decay_start_epoch", std::to_string(c.decay_start_epoch)},
      {"clip_norm", format_double(c.clip_norm)},
      {"dropout_p", format_double(c.dropout_p)},
      {"init_range", format_double(c.init_range)},
      {"seed", std::to_string(c.seed)},
      {"mode", c.mode == GateSource::Hidden ? "hidden" : "posterior"},
      {"gating_enabled", c.gating_enabled ? "true" : "false"},
      {"embed_dim", std::to_string(c.dims.embed)},
      {"hidden_dim", std::to_string(c.dims.hidden)},
      {"layers", std::to_string(c.dims.layers)},
      {"gate_dim", std::to_string(c.dims.gate_hidden)},
  };
}

PipelineConfig parse_config(std::string_view text, const std::string& source) {
  PipelineConfig cfg;
  for (const auto& kv : parse_key_values(text, source)) {
    try {
      if (apply_synth_key(cfg.synth, kv.key, kv.value)) continue;
      if (apply_behavior_key(cfg, kv.key, kv.value)) continue;
      if (apply_train_key(cfg.train, kv.key, kv.value)) continue;
    } catch (const ConfigError& e) {
      throw ConfigError(at_line(source, kv.line) + e.what());
    }
    throw ConfigError(at_line(source, kv.line) + "unknown key '" + kv.key + "'");
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

GridSpec parse_grid(std::string_view text, const std::string& source) {
  GridSpec spec;
  for (const auto& kv : parse_key_values(text, source)) {
    try {
      if (kv.key == "max_runs") {
        spec.budget = as_count(kv.key, kv.value);
        continue;
      }
      auto values = split_list(kv.value);
      // Validate every candidate now so a bad value fails before any training.
      TrainConfig probe;
      for (const auto& v : values) {
        if (!apply_train_key(probe, kv.key, v)) {
          throw ConfigError("unknown key '" + kv.key + "'");
        }
      }
      if (values.size() == 1) {
        apply_train_key(spec.base, kv.key, values.front());
      } else {
        spec.axes.emplace_back(kv.key, std::move(values));
      }
    } catch (const ConfigError& e) {
      throw ConfigError(at_line(source, kv.line) + e.what());
    }
  }
  return spec;
}

GridSpec load_grid(const std::filesystem::path& path) {
  return parse_grid(read_file(path), path.string());
}

}  // namespace bglm
