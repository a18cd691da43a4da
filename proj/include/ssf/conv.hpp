#pragma once

// Dilated causal 1-d convolution over the last axis. Causality is enforced
// by zero left-padding of (k-1)*dilation positions: out[t] never reads an
// input later than t. Kernel taps are stored oldest-first, so tap k-1
// touches x[t] itself.

#include "tensor.hpp"

namespace ssf {

// x: [B, Cin, T], w: [Cout, Cin/groups, K], bias: [Cout] (optional, pass an
// undefined tensor to skip). groups must divide both channel counts;
// groups == Cin == Cout gives a depthwise convolution.
template <class T>
Tensor<T> conv1d_causal(const Tensor<T>& x, const Tensor<T>& w,
                        const Tensor<T>& bias, int64_t dilation,
                        int64_t groups = 1) {
  if (x.ndim() != 3 || w.ndim() != 3)
    throw ShapeError("conv1d_causal: expected x [B,C,T] and w [Cout,Cin/g,K], got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  if (dilation < 1)
    throw ConfigError("conv1d_causal: dilation must be >= 1, got " +
                      std::to_string(dilation));
  const int64_t bn = x.dim(0), cin = x.dim(1), tn = x.dim(2);
  const int64_t cout = w.dim(0), cin_g = w.dim(1), k = w.dim(2);
  if (groups < 1 || cin % groups != 0 || cout % groups != 0 ||
      cin / groups != cin_g)
    throw ShapeError("conv1d_causal: groups=" + std::to_string(groups) +
                     " incompatible with x " + shape_str(x.shape()) +
                     " and w " + shape_str(w.shape()));
  const bool has_bias = bias.defined();
  if (has_bias && (bias.ndim() != 1 || bias.dim(0) != cout))
    throw ShapeError("conv1d_causal: bias shape " + shape_str(bias.shape()) +
                     " must be [" + std::to_string(cout) + "]");
  const int64_t cout_g = cout / groups;
  std::vector<T> out(static_cast<size_t>(bn * cout * tn), T(0));
  {
    const auto& xv = x.values();
    const auto& wv = w.values();
    for (int64_t b = 0; b < bn; ++b)
      for (int64_t oc = 0; oc < cout; ++oc) {
        const int64_t g = oc / cout_g;
        T* orow = out.data() + (b * cout + oc) * tn;
        if (has_bias) {
          const T bv = bias.values()[static_cast<size_t>(oc)];
          for (int64_t t = 0; t < tn; ++t) orow[t] = bv;
        }
        for (int64_t icl = 0; icl < cin_g; ++icl) {
          const int64_t ic = g * cin_g + icl;
          const T* xrow = xv.data() + (b * cin + ic) * tn;
          const T* wrow = wv.data() + (oc * cin_g + icl) * k;
          for (int64_t j = 0; j < k; ++j) {
            const int64_t shift = (k - 1 - j) * dilation;
            const T wj = wrow[j];
            for (int64_t t = shift; t < tn; ++t) orow[t] += wj * xrow[t - shift];
          }
        }
      }
  }
  detail::check_finite("conv1d_causal", out);
  Tensor<T> res = Tensor<T>::from_data({bn, cout, tn}, std::move(out));
  const bool need = GradMode::enabled() &&
                    (x.requires_grad() || w.requires_grad() ||
                     (has_bias && bias.requires_grad()));
  if (need) {
    res.impl->requires_grad = true;
    auto xi = x.impl, wi = w.impl;
    auto biasi = has_bias ? bias.impl : nullptr;
    auto oi = res.impl;
    Tape<T>::active().record([xi, wi, biasi, oi, bn, cin, tn, cout, cin_g, k,
                              cout_g, dilation]() {
      if (oi->grad.empty()) return;
      const auto& g = oi->grad;
      const bool gx = xi->requires_grad, gw = wi->requires_grad;
      const bool gb = biasi && biasi->requires_grad;
      if (gx) xi->ensure_grad();
      if (gw) wi->ensure_grad();
      if (gb) biasi->ensure_grad();
      for (int64_t b = 0; b < bn; ++b)
        for (int64_t oc = 0; oc < cout; ++oc) {
          const int64_t grp = oc / cout_g;
          const T* grow = g.data() + (b * cout + oc) * tn;
          if (gb) {
            T s = T(0);
            for (int64_t t = 0; t < tn; ++t) s += grow[t];
            biasi->grad[static_cast<size_t>(oc)] += s;
          }
          for (int64_t icl = 0; icl < cin_g; ++icl) {
            const int64_t ic = grp * cin_g + icl;
            const T* xrow = xi->values.data() + (b * cin + ic) * tn;
            const T* wrow = wi->values.data() + (oc * cin_g + icl) * k;
            T* gxrow = gx ? xi->grad.data() + (b * cin + ic) * tn : nullptr;
            T* gwrow = gw ? wi->grad.data() + (oc * cin_g + icl) * k : nullptr;
            for (int64_t j = 0; j < k; ++j) {
              const int64_t shift = (k - 1 - j) * dilation;
              if (gx) {
                const T wj = wrow[j];
                for (int64_t t = shift; t < tn; ++t)
                  gxrow[t - shift] += wj * grow[t];
              }
              if (gw) {
                T s = T(0);
                for (int64_t t = shift; t < tn; ++t)
                  s += xrow[t - shift] * grow[t];
                gwrow[j] += s;
              }
            }
          }
        }
    });
  }
  return res;
}

}  // namespace ssf
