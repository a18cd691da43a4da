#pragma once

// Selective state-space machinery: the diagonal scan itself, the gated
// block around it, and the backward (anti-causal) branch that runs the
// block on a flipped token axis.
//
// Scan recurrence per channel d and state n, h starting at zero:
//   Abar = exp(delta * A[d,n])              (A strictly negative)
//   Bbar = delta * B[n]                     (Euler rule, default)
//        = (Abar - 1) / A[d,n] * B[n]       (exact zero-order hold, option)
//   h    = Abar * h + Bbar * u
//   y[d] = sum_n C[n] * h[d,n] + D_skip[d] * u[d]

#include "conv.hpp"
#include "nn.hpp"

namespace ssf {

// u, delta: [B,T,D]; a: [D,N] negative; b, c: [B,T,N]; d_skip: [D].
// Composed from taped primitives one timestep at a time, so cost and tape
// length are linear in T and gradients need no hand-written recurrence.
template <class T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta,
                         const Tensor<T>& a, const Tensor<T>& b,
                         const Tensor<T>& c, const Tensor<T>& d_skip,
                         bool zoh_b = false) {
  if (u.ndim() != 3 || delta.shape() != u.shape())
    throw ShapeError("selective_scan: u " + shape_str(u.shape()) +
                     " and delta " + shape_str(delta.shape()) +
                     " must be equal [B,T,D]");
  const int64_t bn = u.dim(0), tn = u.dim(1), dn = u.dim(2);
  if (a.ndim() != 2 || a.dim(0) != dn)
    throw ShapeError("selective_scan: a " + shape_str(a.shape()) +
                     " must be [" + std::to_string(dn) + ", N]");
  const int64_t nn = a.dim(1);
  if (b.shape() != Shape{bn, tn, nn} || c.shape() != Shape{bn, tn, nn})
    throw ShapeError("selective_scan: b " + shape_str(b.shape()) + " and c " +
                     shape_str(c.shape()) + " must be [" + std::to_string(bn) +
                     ", " + std::to_string(tn) + ", " + std::to_string(nn) +
                     "]");
  if (d_skip.shape() != Shape{dn})
    throw ShapeError("selective_scan: d_skip " + shape_str(d_skip.shape()) +
                     " must be [" + std::to_string(dn) + "]");

  auto a_r = reshape(a, {1, dn, nn});
  Tensor<T> h = Tensor<T>::zeros({bn, dn, nn});
  std::vector<Tensor<T>> ys;
  ys.reserve(static_cast<size_t>(tn));
  for (int64_t t = 0; t < tn; ++t) {
    auto dt = reshape(slice(delta, 1, t, 1), {bn, dn, 1});
    auto ut = reshape(slice(u, 1, t, 1), {bn, dn, 1});
    auto bt = reshape(slice(b, 1, t, 1), {bn, 1, nn});
    auto ct = reshape(slice(c, 1, t, 1), {bn, 1, nn});
    auto abar = exp(mul(dt, a_r));
    Tensor<T> bbar_u;
    if (zoh_b) {
      auto gain = div(add_scalar(abar, T(-1)), a_r);
      bbar_u = mul(gain, mul(bt, ut));
    } else {
      bbar_u = mul(mul(dt, bt), ut);
    }
    h = add(mul(abar, h), bbar_u);
    ys.push_back(reshape(sum_axis(mul(h, ct), 2), {bn, 1, dn}));
  }
  auto y = concat(ys, 1);
  return add(y, mul(u, d_skip));
}

struct SsmConfig {
  int64_t d_model = 0;     // token width D
  int64_t state = 16;      // N per channel
  int64_t expand = 2;      // scan width d_inner = expand * D
  int64_t conv_kernel = 4; // depthwise pre-scan conv width
  bool zoh_b = false;      // exact zero-order-hold input discretization
};

template <class T>
class MambaBlock {
 public:
  MambaBlock() = default;
  MambaBlock(const SsmConfig& cfg, uint64_t seed, const std::string& name)
      : cfg_(cfg), d_inner_(cfg.d_model * cfg.expand) {
    if (cfg.d_model < 1 || cfg.state < 1 || cfg.expand < 1 || cfg.conv_kernel < 1)
      throw ConfigError("ssm block: d_model/state/expand/conv_kernel must be positive");
    const int64_t di = d_inner_, ns = cfg.state;
    in_proj_ = Linear<T>(cfg.d_model, 2 * di, seed, name + ".in_proj");
    conv_w_.name = name + ".conv.weight";
    conv_w_.value = init_uniform_fan_in<T>(seed, conv_w_.name,
                                           {di, 1, cfg.conv_kernel},
                                           cfg.conv_kernel);
    conv_b_.name = name + ".conv.bias";
    conv_b_.value = init_uniform_fan_in<T>(seed, conv_b_.name, {di},
                                           cfg.conv_kernel);
    dt_proj_ = Linear<T>(di, di, seed, name + ".dt_proj");
    b_proj_ = Linear<T>(di, ns, seed, name + ".b_proj", false);
    c_proj_ = Linear<T>(di, ns, seed, name + ".c_proj", false);
    out_proj_ = Linear<T>(di, cfg.d_model, seed, name + ".out_proj");

    // State matrix starts at A = -(1..N) on every channel: A_log = log(1..N).
    a_log_.name = name + ".a_log";
    {
      std::vector<T> v(static_cast<size_t>(di * ns));
      for (int64_t d = 0; d < di; ++d)
        for (int64_t n = 0; n < ns; ++n)
          v[static_cast<size_t>(d * ns + n)] =
              static_cast<T>(std::log(static_cast<double>(n + 1)));
      a_log_.value = Tensor<T>::from_data({di, ns}, std::move(v));
    }
    d_skip_.name = name + ".d_skip";
    d_skip_.value = Tensor<T>::full({di}, T(1));

    // dt bias places softplus(bias) in [0.001, 0.1] at zero pre-activation.
    {
      CounterRng rng(seed, name + ".dt_proj.bias.init");
      auto& bias = dt_proj_.bias().value.mutable_values();
      for (auto& x : bias) {
        const double dt = std::exp(rng.uniform(std::log(0.001), std::log(0.1)));
        x = static_cast<T>(std::log(std::expm1(dt)));
      }
    }
  }

  // x: [B, T, D] -> [B, T, D]; the scan runs along the T axis.
  Tensor<T> operator()(const Tensor<T>& x) const {
    if (x.ndim() != 3 || x.dim(2) != cfg_.d_model)
      throw ShapeError("ssm block: input " + shape_str(x.shape()) +
                       " must be [B, T, " + std::to_string(cfg_.d_model) + "]");
    const int64_t di = d_inner_;
    auto xz = in_proj_(x);
    auto xb = slice(xz, 2, 0, di);
    auto gate = slice(xz, 2, di, di);
    auto xc = transpose(xb, {0, 2, 1});
    xc = conv1d_causal(xc, conv_w_.value, conv_b_.value, 1, di);
    auto u = silu(transpose(xc, {0, 2, 1}));
    auto delta = softplus(dt_proj_(u));
    auto b = b_proj_(u);
    auto c = c_proj_(u);
    auto a = neg(exp(a_log_.value));
    auto y = selective_scan(u, delta, a, b, c, d_skip_.value, cfg_.zoh_b);
    y = mul(y, silu(gate));
    return out_proj_(y);
  }

  void collect(ParamList<T>& out) {
    in_proj_.collect(out);
    mark_trainable(out, conv_w_);
    mark_trainable(out, conv_b_);
    dt_proj_.collect(out);
    b_proj_.collect(out);
    c_proj_.collect(out);
    mark_trainable(out, a_log_);
    mark_trainable(out, d_skip_);
    out_proj_.collect(out);
  }

  const SsmConfig& config() const { return cfg_; }
  int64_t d_inner() const { return d_inner_; }
  const Linear<T>& in_proj() const { return in_proj_; }
  const Linear<T>& dt_proj() const { return dt_proj_; }
  const Linear<T>& b_proj() const { return b_proj_; }
  const Linear<T>& c_proj() const { return c_proj_; }
  const Linear<T>& out_proj() const { return out_proj_; }
  const Param<T>& conv_weight() const { return conv_w_; }
  const Param<T>& conv_bias() const { return conv_b_; }
  const Param<T>& a_log() const { return a_log_; }
  const Param<T>& d_skip() const { return d_skip_; }

 private:
  SsmConfig cfg_;
  int64_t d_inner_ = 0;
  Linear<T> in_proj_, dt_proj_, b_proj_, c_proj_, out_proj_;
  Param<T> conv_w_, conv_b_, a_log_, d_skip_;
};

// Anti-causal branch: flip the token axis, run the causal block, flip back.
// Token t of the output therefore depends only on tokens >= t.
template <class T>
class BackwardMambaBranch {
 public:
  BackwardMambaBranch() = default;
  BackwardMambaBranch(const SsmConfig& cfg, uint64_t seed,
                      const std::string& name)
      : block_(cfg, seed, name) {}

  Tensor<T> operator()(const Tensor<T>& x) const {
    return flip(block_(flip(x, 1)), 1);
  }

  void collect(ParamList<T>& out) { block_.collect(out); }
  MambaBlock<T>& block() { return block_; }
  const MambaBlock<T>& block() const { return block_; }

 private:
  MambaBlock<T> block_;
};

}  // namespace ssf
