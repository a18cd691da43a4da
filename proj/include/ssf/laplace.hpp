#pragma once

// Spectral reconstruction block: transforms each token's feature vector
// into the frequency domain, projects the spectrum into per-harmonic
// damped-cosine parameters, and re-synthesizes a signal on a learnable
// time grid:
//
//   y[b,v,p] = sum_h A[b,v,p,h] * exp(alpha[b,v,h] * t[p])
//                               * cos(omega[b,v,h] * t[p] + phi[b,v,h])
//
// alpha comes from the real part of the spectrum, (omega, phi) from the
// imaginary part, and the amplitudes A from both halves concatenated,
// optionally factored as A = U V^T with rank R < min(P, H). The decay
// constraint alpha <- -ELU(-alpha) caps growth at alpha < 1 while leaving
// decay rates untouched.

#include "fft.hpp"
#include "nn.hpp"

namespace ssf {

template <class T>
struct LaplaceParams {
  Tensor<T> amp;    // [B, V, P, H], materialized even in the low-rank case
  Tensor<T> alpha;  // [B, V, H], already constrained
  Tensor<T> omega;  // [B, V, H]
  Tensor<T> phi;    // [B, V, H]
  Tensor<T> t;      // [P]
};

struct LaplaceConfig {
  int64_t in_width = 0;   // token feature width D fed to the FFT
  int64_t recon_len = 0;  // output length P
  int64_t harmonics = 0;  // H
  int64_t low_rank = 0;   // 0 = full rank, else R with 0 < R < min(P, H)
  int64_t topk_bins = 0;  // 0 = off, else keep the k largest-magnitude bins
};

// Damped-cosine synthesis; differentiable in every field of `p`.
template <class T>
Tensor<T> laplace_reconstruct(const LaplaceParams<T>& p) {
  const int64_t bn = p.alpha.dim(0), vn = p.alpha.dim(1), hn = p.alpha.dim(2);
  const int64_t pn = p.t.dim(0);
  if (p.amp.shape() != Shape{bn, vn, pn, hn})
    throw ShapeError("laplace_reconstruct: amp " + shape_str(p.amp.shape()) +
                     " inconsistent with alpha " + shape_str(p.alpha.shape()) +
                     " and t " + shape_str(p.t.shape()));
  auto t_b = reshape(p.t, {1, 1, pn, 1});
  auto al = reshape(p.alpha, {bn, vn, 1, hn});
  auto om = reshape(p.omega, {bn, vn, 1, hn});
  auto ph = reshape(p.phi, {bn, vn, 1, hn});
  auto envelope = exp(mul(al, t_b));
  auto wave = cos(add(mul(om, t_b), ph));
  return sum_axis(mul(p.amp, mul(envelope, wave)), 3);
}

template <class T>
class LaplaceBlock {
 public:
  LaplaceBlock() = default;
  LaplaceBlock(const LaplaceConfig& cfg, uint64_t seed, const std::string& name)
      : cfg_(cfg) {
    if (cfg.in_width < 1 || cfg.recon_len < 1 || cfg.harmonics < 1)
      throw ConfigError("laplace block: dims must be positive, got in_width=" +
                        std::to_string(cfg.in_width) + " recon_len=" +
                        std::to_string(cfg.recon_len) + " harmonics=" +
                        std::to_string(cfg.harmonics));
    const int64_t p = cfg.recon_len, h = cfg.harmonics;
    if (cfg.low_rank != 0 &&
        (cfg.low_rank < 1 || cfg.low_rank >= std::min(p, h)))
      throw ConfigError("laplace block: low_rank=" +
                        std::to_string(cfg.low_rank) +
                        " must satisfy 0 < R < min(P, H) = " +
                        std::to_string(std::min(p, h)));
    const int64_t f = cfg.in_width / 2 + 1;
    if (cfg.topk_bins < 0 || cfg.topk_bins > f)
      throw ConfigError("laplace block: topk_bins=" +
                        std::to_string(cfg.topk_bins) + " out of range [0, " +
                        std::to_string(f) + "]");
    bins_ = f;
    proj_alpha_ = Linear<T>(f, h, seed, name + ".alpha_proj");
    proj_omega_phi_ = Linear<T>(f, 2 * h, seed, name + ".omega_phi_proj");
    if (cfg.low_rank > 0) {
      proj_amp_u_ = Linear<T>(2 * f, p * cfg.low_rank, seed, name + ".amp_u_proj");
      proj_amp_v_ = Linear<T>(2 * f, h * cfg.low_rank, seed, name + ".amp_v_proj");
    } else {
      proj_amp_ = Linear<T>(2 * f, p * h, seed, name + ".amp_proj");
    }
    // Learnable time grid starts as the identity map of linspace(1e-4, 1, P).
    proj_t_ = Linear<T>(p, p, seed, name + ".t_proj");
    {
      auto& w = proj_t_.weight().value.mutable_values();
      std::fill(w.begin(), w.end(), T(0));
      for (int64_t i = 0; i < p; ++i) w[static_cast<size_t>(i * p + i)] = T(1);
      auto& b = proj_t_.bias().value.mutable_values();
      std::fill(b.begin(), b.end(), T(0));
    }
    std::vector<T> grid(static_cast<size_t>(p));
    for (int64_t i = 0; i < p; ++i)
      grid[static_cast<size_t>(i)] =
          p == 1 ? T(1e-4)
                 : static_cast<T>(1e-4 + (1.0 - 1e-4) * static_cast<double>(i) /
                                             static_cast<double>(p - 1));
    t_grid_ = Tensor<T>::from_data({1, p}, std::move(grid));
  }

  // h: [B, V, D] -> per-harmonic parameters.
  LaplaceParams<T> project_params(const Tensor<T>& h) const {
    if (h.ndim() != 3 || h.dim(2) != cfg_.in_width)
      throw ShapeError("laplace block: input " + shape_str(h.shape()) +
                       " must be [B, V, " + std::to_string(cfg_.in_width) + "]");
    const int64_t bn = h.dim(0), vn = h.dim(1);
    auto spec = rfft(h);
    Tensor<T> re = spec.real, im = spec.imag;
    if (cfg_.topk_bins > 0) {
      auto mask = topk_mask(spec);
      re = mul(re, mask);
      im = mul(im, mask);
    }
    LaplaceParams<T> out;
    auto alpha_raw = proj_alpha_(re);
    out.alpha = neg(elu(neg(alpha_raw)));  // decay constraint, alpha < 1
    auto om_phi = proj_omega_phi_(im);
    out.omega = slice(om_phi, 2, 0, cfg_.harmonics);
    out.phi = slice(om_phi, 2, cfg_.harmonics, cfg_.harmonics);
    auto both = concat<T>({re, im}, 2);
    if (cfg_.low_rank > 0) {
      auto u = reshape(proj_amp_u_(both), {bn, vn, cfg_.recon_len, cfg_.low_rank});
      auto v = reshape(proj_amp_v_(both), {bn, vn, cfg_.harmonics, cfg_.low_rank});
      out.amp = matmul(u, transpose_last2(v));
    } else {
      out.amp = reshape(proj_amp_(both), {bn, vn, cfg_.recon_len, cfg_.harmonics});
    }
    out.t = reshape(proj_t_(t_grid_), {cfg_.recon_len});
    return out;
  }

  // [B, V, D] -> [B, V, P]
  Tensor<T> operator()(const Tensor<T>& h) const {
    return laplace_reconstruct(project_params(h));
  }

  void collect(ParamList<T>& out) {
    proj_alpha_.collect(out);
    proj_omega_phi_.collect(out);
    if (cfg_.low_rank > 0) {
      proj_amp_u_.collect(out);
      proj_amp_v_.collect(out);
    } else {
      proj_amp_.collect(out);
    }
    proj_t_.collect(out);
  }

  const LaplaceConfig& config() const { return cfg_; }

 private:
  // 0/1 mask keeping the top-k magnitude bins per (b, v) row. The mask is
  // built outside the tape: selection is piecewise constant, so gradients
  // flow only through the surviving bins.
  Tensor<T> topk_mask(const ComplexSpectrum<T>& spec) const {
    NoGradGuard ng;
    const auto& re = spec.real.values();
    const auto& im = spec.imag.values();
    const int64_t f = bins_;
    const int64_t rows = spec.real.numel() / f;
    std::vector<T> mask(re.size(), T(0));
    std::vector<std::pair<T, int64_t>> mag(static_cast<size_t>(f));
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t i = 0; i < f; ++i) {
        const size_t idx = static_cast<size_t>(r * f + i);
        mag[static_cast<size_t>(i)] = {re[idx] * re[idx] + im[idx] * im[idx], i};
      }
      std::partial_sort(mag.begin(), mag.begin() + cfg_.topk_bins, mag.end(),
                        [](const auto& a, const auto& b) {
                          return a.first > b.first ||
                                 (a.first == b.first && a.second < b.second);
                        });
      for (int64_t j = 0; j < cfg_.topk_bins; ++j)
        mask[static_cast<size_t>(r * f + mag[static_cast<size_t>(j)].second)] = T(1);
    }
    return Tensor<T>::from_data(spec.real.shape(), std::move(mask));
  }

  LaplaceConfig cfg_;
  int64_t bins_ = 0;
  Linear<T> proj_alpha_, proj_omega_phi_, proj_amp_, proj_amp_u_, proj_amp_v_, proj_t_;
  Tensor<T> t_grid_;
};

}  // namespace ssf
