#pragma once

// Small building blocks shared by every model component: named parameters,
// seeded initialization, affine maps, layer normalization.
//
// Initialization is derived from (seed, parameter name) through one counter
// RNG stream per name, so results never depend on module construction
// order, and any single parameter can be re-created in isolation.

#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace ssf {

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
};

template <class T>
using ParamList = std::vector<Param<T>*>;

// Uniform(-bound, bound) with bound = 1/sqrt(fan_in).
template <class T>
Tensor<T> init_uniform_fan_in(uint64_t seed, const std::string& name,
                              Shape shape, int64_t fan_in) {
  CounterRng rng(seed, name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<T> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>::from_data(std::move(shape), std::move(v));
}

template <class T>
void mark_trainable(ParamList<T>& out, Param<T>& p) {
  p.value.set_requires_grad(true);
  out.push_back(&p);
}

// y = x W + b with W: [in, out]; leading dims of x pass through.
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(int64_t in, int64_t out, uint64_t seed, const std::string& name,
         bool with_bias = true)
      : in_(in), out_(out) {
    weight_.name = name + ".weight";
    weight_.value = init_uniform_fan_in<T>(seed, weight_.name, {in, out}, in);
    if (with_bias) {
      bias_.name = name + ".bias";
      bias_.value = init_uniform_fan_in<T>(seed, bias_.name, {out}, in);
    }
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    if (x.shape().back() != in_)
      throw ShapeError("linear '" + weight_.name + "': input " +
                       shape_str(x.shape()) + " does not end in " +
                       std::to_string(in_));
    auto y = matmul(x, weight_.value);
    if (bias_.value.defined()) y = add(y, bias_.value);
    return y;
  }

  void collect(ParamList<T>& out) {
    mark_trainable(out, weight_);
    if (bias_.value.defined()) mark_trainable(out, bias_);
  }

  int64_t in_features() const { return in_; }
  int64_t out_features() const { return out_; }
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  const Param<T>& weight() const { return weight_; }
  const Param<T>& bias() const { return bias_; }

 private:
  int64_t in_ = 0, out_ = 0;
  Param<T> weight_;
  Param<T> bias_;
};

// Normalizes the last axis to zero mean and unit variance, then applies a
// learnable per-feature scale and shift (initialized to identity).
template <class T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(int64_t dim, const std::string& name, T eps = T(1e-5))
      : dim_(dim), eps_(eps) {
    gamma_.name = name + ".scale";
    gamma_.value = Tensor<T>::full({dim}, T(1));
    beta_.name = name + ".shift";
    beta_.value = Tensor<T>::zeros({dim});
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    if (x.shape().back() != dim_)
      throw ShapeError("layer_norm '" + gamma_.name + "': input " +
                       shape_str(x.shape()) + " does not end in " +
                       std::to_string(dim_));
    auto m = mean_axis(x, -1, true);
    auto c = sub(x, m);
    auto var = mean_axis(mul(c, c), -1, true);
    auto denom = sqrt(add_scalar(var, eps_));
    auto normed = div(c, denom);
    return add(mul(normed, gamma_.value), beta_.value);
  }

  void collect(ParamList<T>& out) {
    mark_trainable(out, gamma_);
    mark_trainable(out, beta_);
  }

 private:
  int64_t dim_ = 0;
  T eps_ = T(1e-5);
  Param<T> gamma_;
  Param<T> beta_;
};

}  // namespace ssf
