#pragma once

// Adam with optional global-norm gradient clipping. Update order is fixed
// (clip, moments, bias correction, step) and iteration follows the param
// list, so runs with the same seed are bit-reproducible.

#include <cmath>

#include "nn.hpp"

namespace ssf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables clipping
};

template <class T>
class Adam {
 public:
  Adam(ParamList<T> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.numel(), T(0));
      v_.emplace_back(p->value.numel(), T(0));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->value.zero_grad();
  }

  void step() {
    ++t_;
    T scale = T(1);
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (auto* p : params_) {
        if (!p->value.has_grad()) continue;
        for (T g : p->value.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
      }
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) scale = static_cast<T>(cfg_.clip_norm / norm);
    }
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T corr1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, t_));
    const T corr2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, t_));
    const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      auto& val = params_[pi]->value.mutable_values();
      if (!params_[pi]->value.has_grad()) continue;
      const auto& grad = params_[pi]->value.grad();
      for (size_t i = 0; i < val.size(); ++i) {
        const T g = grad[i] * scale;
        m_[pi][i] = b1 * m_[pi][i] + (T(1) - b1) * g;
        v_[pi][i] = b2 * v_[pi][i] + (T(1) - b2) * g * g;
        const T mhat = m_[pi][i] / corr1;
        const T vhat = v_[pi][i] / corr2;
        val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  int64_t iterations() const { return t_; }

 private:
  ParamList<T> params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace ssf
