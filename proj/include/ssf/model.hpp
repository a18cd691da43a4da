#pragma once

// End-to-end forecaster: per-window instance normalization, transpose to
// variate-token layout, shared lookback->width embedding, a stack of
// encoder layers (spectral-reconstruction + dilated-conv forward branch,
// reversed selective-scan backward branch, residual fusion, reweighing
// attention, feed-forward refinement), per-token projection to the
// horizon, and exact de-normalization.

#include <optional>

#include "attention.hpp"
#include "laplace.hpp"
#include "ssm.hpp"
#include "tcn.hpp"

namespace ssf {

enum class AttentionMode {
  kSpatialTemporal,  // default reweighing attention
  kSelfAttention,    // single-head dot-product over variate tokens
  kNone,             // attention stage skipped
};

struct ModelConfig {
  int64_t lookback = 96;   // L
  int64_t horizon = 96;    // P
  int64_t variates = 7;    // V
  int64_t d_model = 64;    // D, token feature width
  int64_t layers = 1;      // encoder layer count
  int64_t tcn_layers = 2;  // dilated conv layers per forward branch
  int64_t tcn_kernel = 3;
  int64_t ssm_state = 16;  // N per scan channel
  int64_t ssm_expand = 2;
  int64_t ssm_conv_kernel = 4;
  int64_t e_dim = 64;      // attention embedding width
  int64_t harmonics = 32;  // damped-cosine count in the spectral branch
  int64_t low_rank = 0;    // 0 = full-rank amplitudes
  int64_t topk_bins = 0;   // 0 = keep the whole spectrum
  int64_t d_ff = 0;        // 0 = 2 * d_model
  uint64_t seed = 42;
  bool tcn_residual = true;
  bool tcn_cross_channel = false;
  bool zoh_b = false;
  bool time_features = false;  // append calendar tokens before embedding

  // Structural toggles used by the ablation study. The forward branch is
  // h -> [spectral block] -> [conv stack] -> linear; with both inner stages
  // off it degenerates to the bare linear map.
  bool enable_forward = true;
  bool enable_fft_laplace = true;
  bool enable_tcn = true;
  bool enable_backward = true;
  AttentionMode attention = AttentionMode::kSpatialTemporal;

  int64_t ffn_width() const { return d_ff > 0 ? d_ff : 2 * d_model; }
  // Calendar features ride along as extra tokens and are dropped by the
  // final slice back to V variates.
  int64_t token_count() const { return variates + (time_features ? 2 : 0); }
};

template <class T>
struct NormStats {
  Tensor<T> mean;  // [B, 1, V]
  Tensor<T> std;   // [B, 1, V], clamped to >= eps
  T eps;
};

constexpr double kNormEps = 1e-8;

// Per-window, per-variate z-score over the lookback axis.
template <class T>
std::pair<Tensor<T>, NormStats<T>> normalize(const Tensor<T>& x) {
  if (x.ndim() != 3)
    throw ConfigError("normalize: input " + shape_str(x.shape()) +
                      " must be [B, L, V]");
  auto mean = mean_axis(x, 1, true);
  auto centered = sub(x, mean);
  auto var = mean_axis(mul(centered, centered), 1, true);
  auto stdev = clamp_min_scalar(sqrt(var), T(kNormEps));
  return {div(centered, stdev), NormStats<T>{mean, stdev, T(kNormEps)}};
}

template <class T>
Tensor<T> denormalize(const Tensor<T>& y, const NormStats<T>& stats) {
  return add(mul(y, stats.std), stats.mean);
}

template <class T>
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(const ModelConfig& cfg, uint64_t seed, const std::string& name)
      : cfg_(cfg) {
    const int64_t nt = cfg.token_count(), dm = cfg.d_model;
    if (cfg.enable_forward) {
      if (cfg.enable_fft_laplace)
        laplace_.emplace(
            LaplaceConfig{dm, dm, cfg.harmonics, cfg.low_rank, cfg.topk_bins},
            seed, name + ".laplace");
      if (cfg.enable_tcn)
        tcn_.emplace(TcnConfig{nt, cfg.tcn_layers, cfg.tcn_kernel,
                               cfg.tcn_residual, cfg.tcn_cross_channel},
                     seed, name + ".tcn");
      fuse_ = Linear<T>(dm, dm, seed, name + ".fuse");
    }
    if (cfg.enable_backward)
      backward_.emplace(
          SsmConfig{dm, cfg.ssm_state, cfg.ssm_expand, cfg.ssm_conv_kernel,
                    cfg.zoh_b},
          seed, name + ".bw");
    if (cfg.attention == AttentionMode::kSpatialTemporal)
      st_att_.emplace(StAttentionConfig{nt, dm, cfg.e_dim}, seed,
                      name + ".att");
    else if (cfg.attention == AttentionMode::kSelfAttention)
      self_att_.emplace(dm, seed, name + ".att");
    ffn_ = FfnTd<T>(dm, cfg.ffn_width(), seed, name + ".ffn");
  }

  Tensor<T> operator()(const Tensor<T>& h) const {
    auto fused = h;
    if (cfg_.enable_forward) {
      auto z = h;
      if (laplace_) z = (*laplace_)(z);
      if (tcn_) z = (*tcn_)(z);
      fused = add(fused, fuse_(z));
    }
    if (backward_) fused = add(fused, (*backward_)(h));
    if (st_att_) fused = (*st_att_)(fused);
    else if (self_att_) fused = (*self_att_)(fused);
    return ffn_(fused);
  }

  void collect(ParamList<T>& out) {
    if (laplace_) laplace_->collect(out);
    if (tcn_) tcn_->collect(out);
    if (cfg_.enable_forward) fuse_.collect(out);
    if (backward_) backward_->collect(out);
    if (st_att_) st_att_->collect(out);
    if (self_att_) self_att_->collect(out);
    ffn_.collect(out);
  }

  bool has_laplace() const { return laplace_.has_value(); }
  bool has_tcn() const { return tcn_.has_value(); }
  bool has_backward() const { return backward_.has_value(); }
  FfnTd<T>& ffn() { return ffn_; }

 private:
  ModelConfig cfg_;
  std::optional<LaplaceBlock<T>> laplace_;
  std::optional<TcnStack<T>> tcn_;
  Linear<T> fuse_;
  std::optional<BackwardMambaBranch<T>> backward_;
  std::optional<StAttention<T>> st_att_;
  std::optional<SelfAttention<T>> self_att_;
  FfnTd<T> ffn_;
};

template <class T>
class Forecaster {
 public:
  Forecaster() = default;
  explicit Forecaster(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.lookback < 1 || cfg.horizon < 1 || cfg.variates < 1 ||
        cfg.d_model < 1 || cfg.layers < 1 || cfg.tcn_layers < 1)
      throw ConfigError(
          "model: lookback/horizon/variates/d_model/layers/tcn_layers must "
          "be >= 1");
    embed_ = Linear<T>(cfg.lookback, cfg.d_model, cfg.seed, "embed");
    layers_.reserve(static_cast<size_t>(cfg.layers));
    for (int64_t l = 0; l < cfg.layers; ++l)
      layers_.emplace_back(cfg, cfg.seed, "layer" + std::to_string(l));
    project_ = Linear<T>(cfg.d_model, cfg.horizon, cfg.seed, "project");
  }

  // x: [B, L, V] raw scale -> [B, P, V] raw scale. window_starts supplies
  // the absolute step index of each window's first row; only calendar
  // tokens consume it (hourly sampling assumed), and it defaults to zeros.
  Tensor<T> forecast(const Tensor<T>& x,
                     const std::vector<int64_t>* window_starts = nullptr) const {
    if (x.ndim() != 3 || x.dim(1) != cfg_.lookback || x.dim(2) != cfg_.variates)
      throw ConfigError("model: input " + shape_str(x.shape()) +
                        " does not match configured [B, " +
                        std::to_string(cfg_.lookback) + ", " +
                        std::to_string(cfg_.variates) + "]");
    auto [xn, stats] = normalize(x);
    auto tokens = transpose(xn, {0, 2, 1});  // [B, V, L]
    if (cfg_.time_features) {
      std::vector<Tensor<T>> parts = {tokens,
                                      calendar_tokens(x.dim(0), window_starts)};
      tokens = concat(parts, 1);
    }
    auto h = embed_(tokens);  // [B, tokens, D]
    for (const auto& layer : layers_) h = layer(h);
    auto out = project_(h);                       // [B, tokens, P]
    out = slice(out, 1, 0, cfg_.variates);        // drop calendar tokens
    return denormalize(transpose(out, {0, 2, 1}), stats);
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return forecast(x); }

  void collect(ParamList<T>& out) {
    embed_.collect(out);
    for (auto& l : layers_) l.collect(out);
    project_.collect(out);
  }

  const ModelConfig& config() const { return cfg_; }
  Linear<T>& embed() { return embed_; }
  Linear<T>& project() { return project_; }
  EncoderLayer<T>& layer(int64_t l) { return layers_[static_cast<size_t>(l)]; }

 private:
  // Two tokens per window: hour-of-day and day-of-week, both in
  // [-0.5, 0.5], computed from the absolute step index at hourly sampling.
  Tensor<T> calendar_tokens(int64_t bn,
                            const std::vector<int64_t>* starts) const {
    if (starts && static_cast<int64_t>(starts->size()) != bn)
      throw ConfigError("model: window_starts size " +
                        std::to_string(starts->size()) +
                        " does not match batch " + std::to_string(bn));
    NoGradGuard ng;
    const int64_t ln = cfg_.lookback;
    std::vector<T> v(static_cast<size_t>(bn * 2 * ln));
    for (int64_t b = 0; b < bn; ++b) {
      const int64_t t0 = starts ? (*starts)[static_cast<size_t>(b)] : 0;
      for (int64_t t = 0; t < ln; ++t) {
        const int64_t abs_t = t0 + t;
        v[static_cast<size_t>((b * 2 + 0) * ln + t)] =
            static_cast<T>((abs_t % 24) / 23.0 - 0.5);
        v[static_cast<size_t>((b * 2 + 1) * ln + t)] =
            static_cast<T>(((abs_t / 24) % 7) / 6.0 - 0.5);
      }
    }
    return Tensor<T>::from_data({bn, 2, ln}, std::move(v));
  }

  ModelConfig cfg_;
  Linear<T> embed_;
  std::vector<EncoderLayer<T>> layers_;
  Linear<T> project_;
};

}  // namespace ssf
