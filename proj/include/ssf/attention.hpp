#pragma once

// Spatial-temporal reweighing attention and the feed-forward refinement
// stage that follows branch fusion, plus a single-head scaled-dot-product
// layer over variate tokens used as an ablation substitute.
//
// Reweighing semantics: each branch scores one axis of h [B, V, D] through
// a small ReLU embedding contracted with a context vector,
//   temporal:  s_t[b, d] = v_ctx_t . relu(W_t h[b, :, d] + b_t)   (W_t: [E, V])
//   spatial:   s_s[b, v] = v_ctx_s . relu(W_s h[b, v, :] + b_s)   (W_s: [E, D])
// softmaxes over the scored axis, and multiplies h elementwise by N * alpha
// (N = axis length) so that uniform attention reproduces h. The output is
// the mean of the two reweighed maps.

#include "nn.hpp"

namespace ssf {

struct StAttentionConfig {
  int64_t n_variates = 0;  // V
  int64_t d_model = 0;     // D
  int64_t e_dim = 64;      // embedding width shared by both branches
};

template <class T>
struct StAttentionOut {
  Tensor<T> out;      // [B, V, D]
  Tensor<T> alpha_t;  // [B, D], rows sum to 1
  Tensor<T> alpha_s;  // [B, V], rows sum to 1
};

template <class T>
class StAttention {
 public:
  StAttention() = default;
  StAttention(const StAttentionConfig& cfg, uint64_t seed,
              const std::string& name)
      : cfg_(cfg) {
    if (cfg.n_variates < 1 || cfg.d_model < 1 || cfg.e_dim < 1)
      throw ConfigError("st attention: n_variates/d_model/e_dim must be >= 1");
    w_t_.name = name + ".w_t";
    w_t_.value = init_uniform_fan_in<T>(seed, w_t_.name,
                                        {cfg.e_dim, cfg.n_variates},
                                        cfg.n_variates);
    b_t_.name = name + ".b_t";
    b_t_.value = init_uniform_fan_in<T>(seed, b_t_.name, {cfg.e_dim},
                                        cfg.n_variates);
    v_ctx_t_.name = name + ".v_ctx_t";
    v_ctx_t_.value = init_uniform_fan_in<T>(seed, v_ctx_t_.name, {cfg.e_dim},
                                            cfg.e_dim);
    w_s_.name = name + ".w_s";
    w_s_.value = init_uniform_fan_in<T>(seed, w_s_.name,
                                        {cfg.e_dim, cfg.d_model},
                                        cfg.d_model);
    b_s_.name = name + ".b_s";
    b_s_.value = init_uniform_fan_in<T>(seed, b_s_.name, {cfg.e_dim},
                                        cfg.d_model);
    v_ctx_s_.name = name + ".v_ctx_s";
    v_ctx_s_.value = init_uniform_fan_in<T>(seed, v_ctx_s_.name, {cfg.e_dim},
                                            cfg.e_dim);
  }

  StAttentionOut<T> attend(const Tensor<T>& h) const {
    if (h.ndim() != 3 || h.dim(1) != cfg_.n_variates ||
        h.dim(2) != cfg_.d_model)
      throw ConfigError("st attention: input " + shape_str(h.shape()) +
                        " must be [B, " + std::to_string(cfg_.n_variates) +
                        ", " + std::to_string(cfg_.d_model) + "]");
    const int64_t bn = h.dim(0), vn = cfg_.n_variates, dn = cfg_.d_model;

    // Temporal: embed variate columns, score, softmax over the D axis.
    auto ht = transpose(h, {0, 2, 1});                    // [B, D, V]
    auto et = relu(add(matmul(ht, transpose_last2(w_t_.value)),
                       b_t_.value));                      // [B, D, E]
    auto st = reshape(matmul(et, reshape(v_ctx_t_.value, {cfg_.e_dim, 1})),
                      {bn, dn});                          // [B, D]
    auto alpha_t = softmax(st, -1);
    auto mod_t = mul_scalar(reshape(alpha_t, {bn, 1, dn}), T(dn));

    // Spatial: embed variate rows, score, softmax over the V axis.
    auto es = relu(add(matmul(h, transpose_last2(w_s_.value)),
                       b_s_.value));                      // [B, V, E]
    auto ss = reshape(matmul(es, reshape(v_ctx_s_.value, {cfg_.e_dim, 1})),
                      {bn, vn});                          // [B, V]
    auto alpha_s = softmax(ss, -1);
    auto mod_s = mul_scalar(reshape(alpha_s, {bn, vn, 1}), T(vn));

    auto out = mul_scalar(add(mul(h, mod_t), mul(h, mod_s)), T(0.5));
    return {out, alpha_t, alpha_s};
  }

  Tensor<T> operator()(const Tensor<T>& h) const { return attend(h).out; }

  void collect(ParamList<T>& out) {
    mark_trainable(out, w_t_);
    mark_trainable(out, b_t_);
    mark_trainable(out, v_ctx_t_);
    mark_trainable(out, w_s_);
    mark_trainable(out, b_s_);
    mark_trainable(out, v_ctx_s_);
  }

  const StAttentionConfig& config() const { return cfg_; }
  Param<T>& w_t() { return w_t_; }
  Param<T>& b_t() { return b_t_; }
  Param<T>& v_ctx_t() { return v_ctx_t_; }
  Param<T>& w_s() { return w_s_; }
  Param<T>& b_s() { return b_s_; }
  Param<T>& v_ctx_s() { return v_ctx_s_; }

 private:
  StAttentionConfig cfg_;
  Param<T> w_t_, b_t_, v_ctx_t_;
  Param<T> w_s_, b_s_, v_ctx_s_;
};

// out = LayerNorm(h + lin2(relu(lin1(LayerNorm(h))))), all over the last
// axis; the trailing norm gives the refined tokens zero mean and unit
// variance along D at identity scale/shift.
template <class T>
class FfnTd {
 public:
  FfnTd() = default;
  FfnTd(int64_t d_model, int64_t d_ff, uint64_t seed, const std::string& name)
      : lin1_(d_model, d_ff, seed, name + ".lin1"),
        lin2_(d_ff, d_model, seed, name + ".lin2"),
        norm_in_(d_model, name + ".norm_in"),
        norm_out_(d_model, name + ".norm_out") {
    if (d_ff < 1) throw ConfigError("ffn_td: d_ff must be >= 1");
  }

  Tensor<T> operator()(const Tensor<T>& h) const {
    auto inner = lin2_(relu(lin1_(norm_in_(h))));
    return norm_out_(add(h, inner));
  }

  void collect(ParamList<T>& out) {
    lin1_.collect(out);
    lin2_.collect(out);
    norm_in_.collect(out);
    norm_out_.collect(out);
  }

  const Linear<T>& lin1() const { return lin1_; }
  const Linear<T>& lin2() const { return lin2_; }
  LayerNorm<T>& norm_in() { return norm_in_; }
  LayerNorm<T>& norm_out() { return norm_out_; }

 private:
  Linear<T> lin1_, lin2_;
  LayerNorm<T> norm_in_, norm_out_;
};

// Single-head scaled dot-product attention across the V variate tokens;
// stands in for the spatial-temporal layer in one ablation variant.
template <class T>
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(int64_t d_model, uint64_t seed, const std::string& name)
      : d_(d_model),
        q_(d_model, d_model, seed, name + ".q"),
        k_(d_model, d_model, seed, name + ".k"),
        v_(d_model, d_model, seed, name + ".v"),
        o_(d_model, d_model, seed, name + ".o") {}

  Tensor<T> operator()(const Tensor<T>& h) const {
    auto q = q_(h), k = k_(h), v = v_(h);
    auto scores = mul_scalar(matmul(q, transpose_last2(k)),
                             T(1.0 / std::sqrt(static_cast<double>(d_))));
    return o_(matmul(softmax(scores, -1), v));  // softmax over the key axis
  }

  void collect(ParamList<T>& out) {
    q_.collect(out);
    k_.collect(out);
    v_.collect(out);
    o_.collect(out);
  }

 private:
  int64_t d_ = 0;
  Linear<T> q_, k_, v_, o_;
};

}  // namespace ssf
