#pragma once

// Stack of dilated causal convolutions over the reconstruction axis.
// Layer l (1-based) uses dilation 2^(l-1), so K layers with kernel k see
// a receptive field of 1 + (k-1) * (2^K - 1) past positions. Kernels are
// per-channel (depthwise) by default; a flag enables full cross-channel
// mixing. Channel count equals the variate-token count, so parameters are
// independent of the sequence length being convolved.

#include "conv.hpp"
#include "nn.hpp"

namespace ssf {

struct TcnConfig {
  int64_t channels = 0;        // variate tokens V
  int64_t layers = 2;          // K
  int64_t kernel = 3;          // k
  bool residual = true;        // y = relu(conv(x)) + x per layer
  bool cross_channel = false;  // full [V, V, k] kernels instead of [V, 1, k]
};

inline int64_t tcn_receptive_field(const TcnConfig& cfg) {
  return 1 + (cfg.kernel - 1) * ((int64_t(1) << cfg.layers) - 1);
}

template <class T>
class TcnStack {
 public:
  TcnStack() = default;
  TcnStack(const TcnConfig& cfg, uint64_t seed, const std::string& name)
      : cfg_(cfg) {
    if (cfg.channels < 1 || cfg.layers < 1 || cfg.kernel < 1)
      throw ConfigError("tcn: channels/layers/kernel must be positive");
    const int64_t cin_g = cfg.cross_channel ? cfg.channels : 1;
    for (int64_t l = 0; l < cfg.layers; ++l) {
      const std::string base = name + ".layer" + std::to_string(l);
      Param<T> w, b;
      w.name = base + ".weight";
      w.value = init_uniform_fan_in<T>(seed, w.name,
                                       {cfg.channels, cin_g, cfg.kernel},
                                       cin_g * cfg.kernel);
      b.name = base + ".bias";
      b.value = init_uniform_fan_in<T>(seed, b.name, {cfg.channels},
                                       cin_g * cfg.kernel);
      weights_.push_back(std::move(w));
      biases_.push_back(std::move(b));
    }
  }

  // x: [B, V, P] -> [B, V, P]
  Tensor<T> operator()(const Tensor<T>& x) const {
    if (x.ndim() != 3 || x.dim(1) != cfg_.channels)
      throw ShapeError("tcn: input " + shape_str(x.shape()) +
                       " must be [B, " + std::to_string(cfg_.channels) +
                       ", P]");
    Tensor<T> h = x;
    const int64_t groups = cfg_.cross_channel ? 1 : cfg_.channels;
    for (int64_t l = 0; l < cfg_.layers; ++l) {
      const int64_t dilation = int64_t(1) << l;
      auto c = relu(conv1d_causal(h, weights_[static_cast<size_t>(l)].value,
                                  biases_[static_cast<size_t>(l)].value,
                                  dilation, groups));
      h = cfg_.residual ? add(c, h) : c;
    }
    return h;
  }

  void collect(ParamList<T>& out) {
    for (size_t l = 0; l < weights_.size(); ++l) {
      mark_trainable(out, weights_[l]);
      mark_trainable(out, biases_[l]);
    }
  }

  const TcnConfig& config() const { return cfg_; }
  Param<T>& layer_weight(int64_t l) { return weights_[static_cast<size_t>(l)]; }
  Param<T>& layer_bias(int64_t l) { return biases_[static_cast<size_t>(l)]; }

 private:
  TcnConfig cfg_;
  std::vector<Param<T>> weights_, biases_;
};

}  // namespace ssf
