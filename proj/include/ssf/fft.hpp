#pragma once

// One-sided real FFT over the last axis, differentiable through the tape.
// Arbitrary lengths are supported: power-of-two sizes run a radix-2
// Cooley-Tukey, everything else goes through Bluestein's chirp-z algorithm.
// Either way the result is the exact length-D DFT (never a zero-padded
// approximation of it), so bin k always means frequency k/D.

#include <complex>
#include <vector>

#include "tensor.hpp"

namespace ssf {

namespace detail {

constexpr double kPi = 3.141592653589793238462643383279502884;

// In-place radix-2; n must be a power of two. inverse=true applies the
// +i-sign transform without the 1/n normalization.
template <class T>
void fft_pow2(std::vector<std::complex<T>>& a, bool inverse) {
  const size_t n = a.size();
  if (n <= 1) return;
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    for (size_t i = 0; i < n; i += len) {
      for (size_t j = 0; j < len / 2; ++j) {
        const double a_j = ang * static_cast<double>(j);
        const std::complex<T> w(static_cast<T>(std::cos(a_j)),
                                static_cast<T>(std::sin(a_j)));
        const std::complex<T> u = a[i + j];
        const std::complex<T> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Exact length-n DFT for any n (unnormalized inverse when inverse=true).
// Bluestein: X_k = c_k * sum_n (x_n c_n) conj(c)_{k-n}, with the chirp
// c_n = exp(sign*i*pi*n^2/n); the convolution runs in a power-of-two FFT.
// Chirp angles use n^2 mod 2n so the argument stays small and exact.
template <class T>
void dft_any(std::vector<std::complex<T>>& a, bool inverse) {
  const size_t n = a.size();
  if (n <= 1) return;
  if ((n & (n - 1)) == 0) {
    fft_pow2(a, inverse);
    return;
  }
  const double sign = inverse ? 1.0 : -1.0;
  const size_t m = next_pow2(2 * n - 1);
  std::vector<std::complex<double>> chirp(n);
  for (size_t i = 0; i < n; ++i) {
    const double ang =
        sign * kPi * static_cast<double>((i * i) % (2 * n)) / static_cast<double>(n);
    chirp[i] = std::complex<double>(std::cos(ang), std::sin(ang));
  }
  std::vector<std::complex<double>> fa(m, {0.0, 0.0}), fb(m, {0.0, 0.0});
  for (size_t i = 0; i < n; ++i)
    fa[i] = std::complex<double>(a[i].real(), a[i].imag()) * chirp[i];
  for (size_t i = 0; i < n; ++i) {
    fb[i] = std::conj(chirp[i]);
    if (i) fb[m - i] = std::conj(chirp[i]);
  }
  fft_pow2(fa, false);
  fft_pow2(fb, false);
  for (size_t i = 0; i < m; ++i) fa[i] *= fb[i];
  fft_pow2(fa, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (size_t i = 0; i < n; ++i) {
    const std::complex<double> v = fa[i] * inv_m * chirp[i];
    a[i] = std::complex<T>(static_cast<T>(v.real()), static_cast<T>(v.imag()));
  }
}

}  // namespace detail

// Real and imaginary parts of the one-sided spectrum, shape [..., D/2+1].
template <class T>
struct ComplexSpectrum {
  Tensor<T> real;
  Tensor<T> imag;
  int64_t input_length = 0;

  int64_t bins() const { return real.shape().back(); }
};

// rfft over the last axis. Backward is the exact adjoint of the linear map
// R^D -> R^{2K}: the cotangent spectrum is zero-padded to length D, run
// through the +i-sign transform, and its real part accumulates into x.grad.
template <class T>
ComplexSpectrum<T> rfft(const Tensor<T>& x) {
  const int64_t d = x.shape().back();
  if (d < 1) throw ShapeError("rfft: empty last axis of " + shape_str(x.shape()));
  const int64_t k = d / 2 + 1;
  const int64_t rows = x.numel() / d;
  Shape os = x.shape();
  os.back() = k;
  std::vector<T> re(static_cast<size_t>(rows * k)), im(static_cast<size_t>(rows * k));
  {
    std::vector<std::complex<T>> buf(static_cast<size_t>(d));
    const auto& xv = x.values();
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t i = 0; i < d; ++i)
        buf[static_cast<size_t>(i)] = {xv[static_cast<size_t>(r * d + i)], T(0)};
      detail::dft_any(buf, false);
      for (int64_t i = 0; i < k; ++i) {
        re[static_cast<size_t>(r * k + i)] = buf[static_cast<size_t>(i)].real();
        im[static_cast<size_t>(r * k + i)] = buf[static_cast<size_t>(i)].imag();
      }
    }
  }
  detail::check_finite("rfft", re);
  detail::check_finite("rfft", im);
  ComplexSpectrum<T> out;
  out.real = Tensor<T>::from_data(os, std::move(re));
  out.imag = Tensor<T>::from_data(os, std::move(im));
  out.input_length = d;
  if (GradMode::enabled() && x.requires_grad()) {
    out.real.impl->requires_grad = true;
    out.imag.impl->requires_grad = true;
    auto xi = x.impl;
    auto rei = out.real.impl;
    auto imi = out.imag.impl;
    Tape<T>::active().record([xi, rei, imi, rows, d, k]() {
      if (rei->grad.empty() && imi->grad.empty()) return;
      xi->ensure_grad();
      std::vector<std::complex<T>> buf(static_cast<size_t>(d));
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t i = 0; i < d; ++i) buf[static_cast<size_t>(i)] = {T(0), T(0)};
        for (int64_t i = 0; i < k; ++i) {
          const size_t idx = static_cast<size_t>(r * k + i);
          const T gr = rei->grad.empty() ? T(0) : rei->grad[idx];
          const T gi = imi->grad.empty() ? T(0) : imi->grad[idx];
          buf[static_cast<size_t>(i)] = {gr, gi};
        }
        detail::dft_any(buf, true);
        for (int64_t i = 0; i < d; ++i)
          xi->grad[static_cast<size_t>(r * d + i)] += buf[static_cast<size_t>(i)].real();
      }
    });
  }
  return out;
}

}  // namespace ssf
