#pragma once

// Flat key=value run configuration: model architecture, training recipe,
// and data handling in one schema. Unknown keys are a hard error, '#'
// starts a comment, and the fully-resolved set can be rendered back out
// (sorted) for logging and hashing.

#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "data.hpp"
#include "model.hpp"

namespace ssf {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables gradient clipping
  int64_t batch_size = 32;
  int64_t max_epochs = 50;
  int64_t patience = 5;  // early stop on stalled validation MSE
  uint64_t seed = 42;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  double train_frac = 0.7;
  double val_frac = 0.1;
  double test_frac = 0.2;
  int64_t stride = 1;       // window stride for train/eval batching
  bool standardize = true;  // per-variate z-score from train-segment stats
};

namespace detail {

inline bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0") {
    out = false;
    return true;
  }
  return false;
}

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  size_t e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::string attention_mode_name(AttentionMode m) {
  switch (m) {
    case AttentionMode::kSpatialTemporal: return "st";
    case AttentionMode::kSelfAttention: return "self";
    case AttentionMode::kNone: return "none";
  }
  return "st";
}

inline AttentionMode parse_attention_mode(const std::string& s) {
  if (s == "st") return AttentionMode::kSpatialTemporal;
  if (s == "self") return AttentionMode::kSelfAttention;
  if (s == "none") return AttentionMode::kNone;
  throw ConfigError("config: attention must be one of st|self|none, got '" +
                    s + "'");
}

// Applies one key=value pair; throws ConfigError on unknown keys or
// unparseable values.
inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  auto as_i64 = [&]() {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
      throw ConfigError("config: key '" + key + "' needs an integer, got '" +
                        value + "'");
    return v;
  };
  auto as_f64 = [&]() {
    double v = 0;
    if (!detail::parse_double(value, v))
      throw ConfigError("config: key '" + key + "' needs a number, got '" +
                        value + "'");
    return v;
  };
  auto as_bool = [&]() {
    bool v = false;
    if (!detail::parse_bool(value, v))
      throw ConfigError("config: key '" + key +
                        "' needs true|false|1|0, got '" + value + "'");
    return v;
  };

  auto& m = cfg.model;
  auto& t = cfg.train;
  if (key == "lookback") m.lookback = as_i64();
  else if (key == "horizon") m.horizon = as_i64();
  else if (key == "variates") m.variates = as_i64();
  else if (key == "d_model") m.d_model = as_i64();
  else if (key == "layers") m.layers = as_i64();
  else if (key == "tcn_layers") m.tcn_layers = as_i64();
  else if (key == "tcn_kernel") m.tcn_kernel = as_i64();
  else if (key == "ssm_state") m.ssm_state = as_i64();
  else if (key == "ssm_expand") m.ssm_expand = as_i64();
  else if (key == "ssm_conv_kernel") m.ssm_conv_kernel = as_i64();
  else if (key == "e_dim") m.e_dim = as_i64();
  else if (key == "harmonics") m.harmonics = as_i64();
  else if (key == "low_rank") m.low_rank = as_i64();
  else if (key == "topk_bins") m.topk_bins = as_i64();
  else if (key == "d_ff") m.d_ff = as_i64();
  else if (key == "tcn_residual") m.tcn_residual = as_bool();
  else if (key == "tcn_cross_channel") m.tcn_cross_channel = as_bool();
  else if (key == "zoh_b") m.zoh_b = as_bool();
  else if (key == "time_features") m.time_features = as_bool();
  else if (key == "enable_forward") m.enable_forward = as_bool();
  else if (key == "enable_fft_laplace") m.enable_fft_laplace = as_bool();
  else if (key == "enable_tcn") m.enable_tcn = as_bool();
  else if (key == "enable_backward") m.enable_backward = as_bool();
  else if (key == "attention") m.attention = parse_attention_mode(value);
  else if (key == "seed") {
    const int64_t s = as_i64();
    m.seed = static_cast<uint64_t>(s);
    t.seed = static_cast<uint64_t>(s);
  }
  else if (key == "lr") t.lr = as_f64();
  else if (key == "beta1") t.beta1 = as_f64();
  else if (key == "beta2") t.beta2 = as_f64();
  else if (key == "adam_eps") t.adam_eps = as_f64();
  else if (key == "clip_norm") t.clip_norm = as_f64();
  else if (key == "batch_size") t.batch_size = as_i64();
  else if (key == "max_epochs") t.max_epochs = as_i64();
  else if (key == "patience") t.patience = as_i64();
  else if (key == "train_frac") cfg.train_frac = as_f64();
  else if (key == "val_frac") cfg.val_frac = as_f64();
  else if (key == "test_frac") cfg.test_frac = as_f64();
  else if (key == "stride") cfg.stride = as_i64();
  else if (key == "standardize") cfg.standardize = as_bool();
  else
    throw ConfigError("config: unknown key '" + key + "'");
}

// key=value per line; '#' comments; blank lines skipped; a duplicate key in
// the same file flags a likely mistake and is rejected.
inline RunConfig parse_config_text(const std::string& text,
                                   RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  std::map<std::string, bool> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not key=value: '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!seen.emplace(key, true).second)
      throw ConfigError("config: duplicate key '" + key + "' (line " +
                        std::to_string(lineno) + ")");
    apply_config_entry(base, key, value);
  }
  return base;
}

inline RunConfig load_config_file(const std::string& path,
                                  RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), base);
}

// Renders every key (sorted) with full float precision; the text doubles as
// the config fingerprint input.
inline std::string render_config(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  auto put_i = [&](const char* k, int64_t v) { kv[k] = std::to_string(v); };
  auto put_b = [&](const char* k, bool v) { kv[k] = v ? "true" : "false"; };
  auto put_f = [&](const char* k, double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    kv[k] = os.str();
  };
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  put_i("lookback", m.lookback);
  put_i("horizon", m.horizon);
  put_i("variates", m.variates);
  put_i("d_model", m.d_model);
  put_i("layers", m.layers);
  put_i("tcn_layers", m.tcn_layers);
  put_i("tcn_kernel", m.tcn_kernel);
  put_i("ssm_state", m.ssm_state);
  put_i("ssm_expand", m.ssm_expand);
  put_i("ssm_conv_kernel", m.ssm_conv_kernel);
  put_i("e_dim", m.e_dim);
  put_i("harmonics", m.harmonics);
  put_i("low_rank", m.low_rank);
  put_i("topk_bins", m.topk_bins);
  put_i("d_ff", m.d_ff);
  put_i("seed", static_cast<int64_t>(m.seed));
  put_b("tcn_residual", m.tcn_residual);
  put_b("tcn_cross_channel", m.tcn_cross_channel);
  put_b("zoh_b", m.zoh_b);
  put_b("time_features", m.time_features);
  put_b("enable_forward", m.enable_forward);
  put_b("enable_fft_laplace", m.enable_fft_laplace);
  put_b("enable_tcn", m.enable_tcn);
  put_b("enable_backward", m.enable_backward);
  kv["attention"] = attention_mode_name(m.attention);
  put_f("lr", t.lr);
  put_f("beta1", t.beta1);
  put_f("beta2", t.beta2);
  put_f("adam_eps", t.adam_eps);
  put_f("clip_norm", t.clip_norm);
  put_i("batch_size", t.batch_size);
  put_i("max_epochs", t.max_epochs);
  put_i("patience", t.patience);
  put_f("train_frac", cfg.train_frac);
  put_f("val_frac", cfg.val_frac);
  put_f("test_frac", cfg.test_frac);
  put_i("stride", cfg.stride);
  put_b("standardize", cfg.standardize);

  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  return out.str();
}

inline std::string config_hash_hex(const RunConfig& cfg) {
  const uint64_t h = fnv1a64(render_config(cfg));
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

}  // namespace ssf
