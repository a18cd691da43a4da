#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation on a
// dynamic tape. Tensors are immutable once they have entered a forward
// computation; parameter updates happen between tapes. The tape itself is
// strictly single-threaded (one per thread, thread_local), so concurrent
// training runs must live on separate threads.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <memory>
#include <utility>
#include <vector>

#include "common.hpp"

namespace ssf {

// Thread-local switch consulted by every op; NoGradGuard turns taping off
// for forward-only evaluation (validation, prediction).
struct GradMode {
  static bool& enabled() {
    thread_local bool on = true;
    return on;
  }
};

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(GradMode::enabled()) { GradMode::enabled() = false; }
  ~NoGradGuard() { GradMode::enabled() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> values;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until the first accumulation reaches it

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), T(0));
  }
};

template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl<T>> i) : impl(std::move(i)) {}

  static Tensor zeros(Shape shape) {
    auto i = std::make_shared<TensorImpl<T>>();
    i->values.assign(static_cast<size_t>(shape_numel(shape)), T(0));
    i->shape = std::move(shape);
    return Tensor(std::move(i));
  }

  static Tensor full(Shape shape, T v) {
    auto i = std::make_shared<TensorImpl<T>>();
    i->values.assign(static_cast<size_t>(shape_numel(shape)), v);
    i->shape = std::move(shape);
    return Tensor(std::move(i));
  }

  static Tensor from_data(Shape shape, std::vector<T> vals) {
    if (static_cast<int64_t>(vals.size()) != shape_numel(shape))
      throw ShapeError("from_data: " + std::to_string(vals.size()) +
                       " values for shape " + shape_str(shape));
    auto i = std::make_shared<TensorImpl<T>>();
    i->shape = std::move(shape);
    i->values = std::move(vals);
    return Tensor(std::move(i));
  }

  static Tensor scalar(T v) { return full({1}, v); }

  bool defined() const { return impl != nullptr; }
  const Shape& shape() const { return impl->shape; }
  int64_t ndim() const { return static_cast<int64_t>(impl->shape.size()); }
  int64_t dim(int64_t i) const { return impl->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(impl->values.size()); }
  const std::vector<T>& values() const { return impl->values; }
  // Only leaves (parameters, freshly built inputs) may be mutated, and only
  // outside a live tape; ops never call this on their operands.
  std::vector<T>& mutable_values() { return impl->values; }

  bool requires_grad() const { return impl->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    impl->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return !impl->grad.empty(); }
  const std::vector<T>& grad() const {
    if (impl->grad.empty())
      throw UsageError("grad: no gradient has been accumulated");
    return impl->grad;
  }
  void zero_grad() {
    if (!impl->grad.empty())
      std::fill(impl->grad.begin(), impl->grad.end(), T(0));
  }

  T item() const {
    if (numel() != 1)
      throw UsageError("item: tensor has " + std::to_string(numel()) +
                       " elements");
    return impl->values[0];
  }

  std::shared_ptr<TensorImpl<T>> impl;
};

// Reverse-mode tape. Ops append a closure per result; backward() replays
// them in exact reverse execution order, accumulating gradients additively,
// then drops every recorded node.
template <class T>
class Tape {
 public:
  static Tape& active() {
    thread_local Tape tape;
    return tape;
  }

  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1)
      throw UsageError("backward: loss must be scalar, got shape " +
                       shape_str(loss.shape()));
    if (!loss.requires_grad() || nodes_.empty())
      throw UsageError("backward: tensor is not connected to the tape");
    loss.impl->ensure_grad();
    loss.impl->grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
  }

 private:
  std::vector<std::function<void()>> nodes_;
};

namespace detail {

template <class T>
void check_finite(const char* op, const std::vector<T>& vals) {
  for (size_t i = 0; i < vals.size(); ++i) {
    if (!std::isfinite(vals[i]))
      throw NumericError(std::string("operation '") + op +
                         "' produced a non-finite value (index " +
                         std::to_string(i) + ")");
  }
}

template <class T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> ts) {
  for (const Tensor<T>* t : ts)
    if ((*t).requires_grad()) return true;
  return false;
}

// Wraps forward results: checks finiteness, and when grad mode is on and an
// input needs gradients, marks the output and records the closure.
template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> vals,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(TensorImpl<T>&)> vjp) {
  check_finite(op, vals);
  Tensor<T> out = Tensor<T>::from_data(std::move(shape), std::move(vals));
  if (GradMode::enabled() && any_requires_grad<T>(inputs)) {
    out.impl->requires_grad = true;
    auto out_impl = out.impl;
    Tape<T>::active().record([out_impl, vjp = std::move(vjp)]() {
      if (out_impl->grad.empty()) return;  // no gradient flowed here
      vjp(*out_impl);
    });
  }
  return out;
}

inline Shape broadcast_shapes(const char* op, const Shape& a, const Shape& b) {
  const size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (size_t i = 0; i < nd; ++i) {
    const int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    const int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                       shape_str(b) + " do not broadcast");
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `in` right-aligned against `out`, zero on broadcast dims.
inline std::vector<int64_t> strides_for(const Shape& in, const Shape& out) {
  std::vector<int64_t> st(out.size(), 0);
  int64_t acc = 1;
  for (int i = static_cast<int>(in.size()) - 1; i >= 0; --i) {
    const size_t oi = out.size() - in.size() + static_cast<size_t>(i);
    st[oi] = (in[static_cast<size_t>(i)] == 1) ? 0 : acc;
    acc *= in[static_cast<size_t>(i)];
  }
  return st;
}

// Visits every element of `out_shape` in row-major order as
// f(out_index, a_offset, b_offset); the innermost dim is a tight loop.
template <class F>
void for_each2(const Shape& out_shape, const std::vector<int64_t>& sa,
               const std::vector<int64_t>& sb, F&& f) {
  const int nd = static_cast<int>(out_shape.size());
  const int64_t total = shape_numel(out_shape);
  if (total == 0) return;
  const int64_t last = out_shape[static_cast<size_t>(nd - 1)];
  const int64_t sa_l = sa[static_cast<size_t>(nd - 1)];
  const int64_t sb_l = sb[static_cast<size_t>(nd - 1)];
  std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
  int64_t oa = 0, ob = 0, oi = 0;
  while (true) {
    for (int64_t j = 0; j < last; ++j) f(oi + j, oa + j * sa_l, ob + j * sb_l);
    oi += last;
    int d = nd - 2;
    for (; d >= 0; --d) {
      idx[static_cast<size_t>(d)]++;
      oa += sa[static_cast<size_t>(d)];
      ob += sb[static_cast<size_t>(d)];
      if (idx[static_cast<size_t>(d)] < out_shape[static_cast<size_t>(d)])
        break;
      oa -= sa[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
      ob -= sb[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
      idx[static_cast<size_t>(d)] = 0;
    }
    if (d < 0) break;
  }
}

// Elementwise binary op with broadcasting. fwd(a,b) -> out;
// dfa(a,b,out,g) and dfb(a,b,out,g) give the two input cotangents.
template <class T, class FF, class FA, class FB>
Tensor<T> binary_op(const char* op, const Tensor<T>& a, const Tensor<T>& b,
                    FF fwd, FA dfa, FB dfb) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as == bs) {
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<T> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
    auto ai = a.impl, bi = b.impl;
    return make_result<T>(
        op, as, std::move(out), {&a, &b},
        [ai, bi, dfa, dfb](TensorImpl<T>& o) {
          const auto& g = o.grad;
          if (ai->requires_grad) {
            ai->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i)
              ai->grad[i] += dfa(ai->values[i], bi->values[i], o.values[i], g[i]);
          }
          if (bi->requires_grad) {
            bi->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i)
              bi->grad[i] += dfb(ai->values[i], bi->values[i], o.values[i], g[i]);
          }
        });
  }
  Shape os = broadcast_shapes(op, as, bs);
  auto sa = strides_for(as, os);
  auto sb = strides_for(bs, os);
  std::vector<T> out(static_cast<size_t>(shape_numel(os)));
  {
    const auto& av = a.values();
    const auto& bv = b.values();
    for_each2(os, sa, sb, [&](int64_t oi, int64_t ja, int64_t jb) {
      out[static_cast<size_t>(oi)] =
          fwd(av[static_cast<size_t>(ja)], bv[static_cast<size_t>(jb)]);
    });
  }
  auto ai = a.impl, bi = b.impl;
  return make_result<T>(
      op, os, std::move(out), {&a, &b},
      [ai, bi, os, sa, sb, dfa, dfb](TensorImpl<T>& o) {
        const auto& g = o.grad;
        const bool ga = ai->requires_grad, gb = bi->requires_grad;
        if (ga) ai->ensure_grad();
        if (gb) bi->ensure_grad();
        for_each2(os, sa, sb, [&](int64_t oi, int64_t ja, int64_t jb) {
          const T av = ai->values[static_cast<size_t>(ja)];
          const T bv = bi->values[static_cast<size_t>(jb)];
          const T ov = o.values[static_cast<size_t>(oi)];
          const T gv = g[static_cast<size_t>(oi)];
          if (ga) ai->grad[static_cast<size_t>(ja)] += dfa(av, bv, ov, gv);
          if (gb) bi->grad[static_cast<size_t>(jb)] += dfb(av, bv, ov, gv);
        });
      });
}

// Elementwise unary op. df(x, y) is dy/dx given input and output values.
template <class T, class FF, class FD>
Tensor<T> unary_op(const char* op, const Tensor<T>& a, FF fwd, FD df) {
  const auto& av = a.values();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto ai = a.impl;
  return make_result<T>(op, a.shape(), std::move(out), {&a},
                        [ai, df](TensorImpl<T>& o) {
                          if (!ai->requires_grad) return;
                          ai->ensure_grad();
                          for (size_t i = 0; i < o.grad.size(); ++i)
                            ai->grad[i] +=
                                df(ai->values[i], o.values[i]) * o.grad[i];
                        });
}

}  // namespace detail

// ---- elementwise arithmetic ----

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T, T, T, T g) { return g; }, [](T, T, T, T g) { return g; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T, T, T, T g) { return g; }, [](T, T, T, T g) { return -g; });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T, T y, T, T g) { return y * g; },
      [](T x, T, T, T g) { return x * g; });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_op<T>(
      "div", a, b, [](T x, T y) { return x / y; },
      [](T, T y, T, T g) { return g / y; },
      [](T, T y, T o, T g) { return -o / y * g; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  return detail::unary_op<T>(
      "add_scalar", a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> mul_scalar(const Tensor<T>& a, T c) {
  return detail::unary_op<T>(
      "mul_scalar", a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

template <class T>
Tensor<T> neg(const Tensor<T>& a) {
  return mul_scalar(a, T(-1));
}

// ---- elementwise functions ----

template <class T>
Tensor<T> exp(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "sqrt", a, [](T x) { return std::sqrt(x); },
      [](T, T y) { return T(0.5) / y; });
}

template <class T>
Tensor<T> cos(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "cos", a, [](T x) { return std::cos(x); },
      [](T x, T) { return -std::sin(x); });
}

template <class T>
Tensor<T> sin(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "sin", a, [](T x) { return std::sin(x); },
      [](T x, T) { return std::cos(x); });
}

template <class T>
Tensor<T> abs(const Tensor<T>& a) {
  // Subgradient 0 at the kink.
  return detail::unary_op<T>(
      "abs", a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "relu", a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> elu(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "elu", a, [](T x) { return x > T(0) ? x : std::expm1(x); },
      [](T x, T y) { return x > T(0) ? T(1) : y + T(1); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "sigmoid", a,
      [](T x) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : std::exp(x) / (T(1) + std::exp(x));
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> silu(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "silu", a,
      [](T x) {
        const T s = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                              : std::exp(x) / (T(1) + std::exp(x));
        return x * s;
      },
      [](T x, T) {
        const T s = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                              : std::exp(x) / (T(1) + std::exp(x));
        return s * (T(1) + x * (T(1) - s));
      });
}

template <class T>
Tensor<T> softplus(const Tensor<T>& a) {
  return detail::unary_op<T>(
      "softplus", a,
      [](T x) { return x > T(30) ? x : std::log1p(std::exp(x)); },
      [](T x, T) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : std::exp(x) / (T(1) + std::exp(x));
      });
}

template <class T>
Tensor<T> clamp_min_scalar(const Tensor<T>& a, T lo) {
  return detail::unary_op<T>(
      "clamp_min", a, [lo](T x) { return x < lo ? lo : x; },
      [lo](T x, T) { return x < lo ? T(0) : T(1); });
}

// ---- reductions ----

template <class T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.values()) s += v;
  auto ai = a.impl;
  return detail::make_result<T>("sum", {1}, {s}, {&a},
                                [ai](TensorImpl<T>& o) {
                                  if (!ai->requires_grad) return;
                                  ai->ensure_grad();
                                  const T g = o.grad[0];
                                  for (auto& gv : ai->grad) gv += g;
                                });
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return mul_scalar(sum_all(a), T(1) / static_cast<T>(a.numel()));
}

namespace detail {
// Decomposes shape around `axis` into outer * len * inner.
inline void axis_split(const Shape& s, int64_t axis, int64_t& outer,
                       int64_t& len, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  len = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i)
    inner *= s[i];
}
}  // namespace detail

template <class T>
Tensor<T> sum_axis(const Tensor<T>& a, int64_t axis, bool keepdim = false) {
  if (axis < 0) axis += a.ndim();
  if (axis < 0 || axis >= a.ndim())
    throw ShapeError("sum_axis: axis out of range for " +
                     shape_str(a.shape()));
  int64_t outer, len, inner;
  detail::axis_split(a.shape(), axis, outer, len, inner);
  Shape os = a.shape();
  if (keepdim)
    os[static_cast<size_t>(axis)] = 1;
  else
    os.erase(os.begin() + axis);
  if (os.empty()) os = {1};
  std::vector<T> out(static_cast<size_t>(outer * inner), T(0));
  const auto& av = a.values();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t j = 0; j < len; ++j) {
      const T* src = av.data() + (o * len + j) * inner;
      T* dst = out.data() + o * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  auto ai = a.impl;
  return detail::make_result<T>(
      "sum_axis", std::move(os), std::move(out), {&a},
      [ai, outer, len, inner](TensorImpl<T>& o) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (int64_t ot = 0; ot < outer; ++ot)
          for (int64_t j = 0; j < len; ++j) {
            T* dst = ai->grad.data() + (ot * len + j) * inner;
            const T* src = o.grad.data() + ot * inner;
            for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
          }
      });
}

template <class T>
Tensor<T> mean_axis(const Tensor<T>& a, int64_t axis, bool keepdim = false) {
  if (axis < 0) axis += a.ndim();
  const T n = static_cast<T>(a.shape()[static_cast<size_t>(axis)]);
  return mul_scalar(sum_axis(a, axis, keepdim), T(1) / n);
}

// Numerically stable softmax along `axis`; the running max is treated as a
// constant shift (softmax is shift-invariant, so its gradient cancels).
template <class T>
Tensor<T> softmax(const Tensor<T>& a, int64_t axis) {
  if (axis < 0) axis += a.ndim();
  if (axis < 0 || axis >= a.ndim())
    throw ShapeError("softmax: axis out of range for " + shape_str(a.shape()));
  int64_t outer, len, inner;
  detail::axis_split(a.shape(), axis, outer, len, inner);
  const auto& av = a.values();
  std::vector<T> out(av.size());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * len * inner + i;
      T m = av[static_cast<size_t>(base)];
      for (int64_t j = 1; j < len; ++j)
        m = std::max(m, av[static_cast<size_t>(base + j * inner)]);
      T s = T(0);
      for (int64_t j = 0; j < len; ++j) {
        const T e = std::exp(av[static_cast<size_t>(base + j * inner)] - m);
        out[static_cast<size_t>(base + j * inner)] = e;
        s += e;
      }
      const T inv = T(1) / s;
      for (int64_t j = 0; j < len; ++j)
        out[static_cast<size_t>(base + j * inner)] *= inv;
    }
  auto ai = a.impl;
  return detail::make_result<T>(
      "softmax", a.shape(), std::move(out), {&a},
      [ai, outer, len, inner](TensorImpl<T>& o) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (int64_t ot = 0; ot < outer; ++ot)
          for (int64_t i = 0; i < inner; ++i) {
            const int64_t base = ot * len * inner + i;
            T dot = T(0);
            for (int64_t j = 0; j < len; ++j) {
              const size_t k = static_cast<size_t>(base + j * inner);
              dot += o.grad[k] * o.values[k];
            }
            for (int64_t j = 0; j < len; ++j) {
              const size_t k = static_cast<size_t>(base + j * inner);
              ai->grad[k] += o.values[k] * (o.grad[k] - dot);
            }
          }
      });
}

// ---- matmul ----

namespace detail {

// C[M,N] += A[M,K] * B[K,N]
template <class T>
void gemm_acc(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* brow = b + p * n;
      T* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
}

// dA[M,K] += dC[M,N] * B[K,N]^T
template <class T>
void gemm_acc_abt(const T* dc, const T* b, T* da, int64_t m, int64_t k,
                  int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const T* dcrow = dc + i * n;
      const T* brow = b + p * n;
      T s = T(0);
      for (int64_t j = 0; j < n; ++j) s += dcrow[j] * brow[j];
      da[i * k + p] += s;
    }
}

// dB[K,N] += A[M,K]^T * dC[M,N]
template <class T>
void gemm_acc_atb(const T* a, const T* dc, T* db, int64_t m, int64_t k,
                  int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* dcrow = dc + i * n;
      T* dbrow = db + p * n;
      for (int64_t j = 0; j < n; ++j) dbrow[j] += aip * dcrow[j];
    }
}

}  // namespace detail

// Batched matrix product contracting the last axis of `a` with the
// second-to-last of `b`; leading dims broadcast. Gradients reduce over the
// broadcast dims automatically by accumulating into the shared block.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() < 2 || b.ndim() < 2)
    throw ShapeError("matmul: operands must have >= 2 dims, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const int64_t m = as[as.size() - 2], k = as[as.size() - 1];
  const int64_t k2 = bs[bs.size() - 2], n = bs[bs.size() - 1];
  if (k != k2)
    throw ShapeError("matmul: inner dims differ: " + shape_str(as) + " vs " +
                     shape_str(bs));
  Shape lead_a(as.begin(), as.end() - 2);
  Shape lead_b(bs.begin(), bs.end() - 2);
  Shape batch = detail::broadcast_shapes("matmul", lead_a, lead_b);
  auto sa = detail::strides_for(lead_a, batch);
  auto sb = detail::strides_for(lead_b, batch);
  const int64_t blk_a = m * k, blk_b = k * n, blk_c = m * n;
  for (auto& s : sa) s *= blk_a;
  for (auto& s : sb) s *= blk_b;
  const int64_t nbatch = shape_numel(batch);
  Shape os = batch;
  os.push_back(m);
  os.push_back(n);
  std::vector<T> out(static_cast<size_t>(nbatch * blk_c), T(0));
  // Enumerate batch offsets once; reused verbatim in the backward pass.
  std::vector<int64_t> offs_a(static_cast<size_t>(nbatch)),
      offs_b(static_cast<size_t>(nbatch));
  {
    Shape bshape = batch.empty() ? Shape{1} : batch;
    auto psa = sa, psb = sb;
    if (batch.empty()) {
      psa = {0};
      psb = {0};
    }
    detail::for_each2(bshape, psa, psb, [&](int64_t oi, int64_t ja, int64_t jb) {
      offs_a[static_cast<size_t>(oi)] = ja;
      offs_b[static_cast<size_t>(oi)] = jb;
    });
  }
  {
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int64_t bi = 0; bi < nbatch; ++bi)
      detail::gemm_acc(av.data() + offs_a[static_cast<size_t>(bi)],
                       bv.data() + offs_b[static_cast<size_t>(bi)],
                       out.data() + bi * blk_c, m, k, n);
  }
  auto ai = a.impl, bi_ = b.impl;
  return detail::make_result<T>(
      "matmul", std::move(os), std::move(out), {&a, &b},
      [ai, bi_, offs_a, offs_b, nbatch, blk_c, m, k, n](TensorImpl<T>& o) {
        if (ai->requires_grad) {
          ai->ensure_grad();
          for (int64_t bch = 0; bch < nbatch; ++bch)
            detail::gemm_acc_abt(o.grad.data() + bch * blk_c,
                                 bi_->values.data() +
                                     offs_b[static_cast<size_t>(bch)],
                                 ai->grad.data() +
                                     offs_a[static_cast<size_t>(bch)],
                                 m, k, n);
        }
        if (bi_->requires_grad) {
          bi_->ensure_grad();
          for (int64_t bch = 0; bch < nbatch; ++bch)
            detail::gemm_acc_atb(ai->values.data() +
                                     offs_a[static_cast<size_t>(bch)],
                                 o.grad.data() + bch * blk_c,
                                 bi_->grad.data() +
                                     offs_b[static_cast<size_t>(bch)],
                                 m, k, n);
        }
      });
}

// ---- shape ops ----

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  auto ai = a.impl;
  return detail::make_result<T>("reshape", std::move(shape),
                                std::vector<T>(a.values()), {&a},
                                [ai](TensorImpl<T>& o) {
                                  if (!ai->requires_grad) return;
                                  ai->ensure_grad();
                                  for (size_t i = 0; i < o.grad.size(); ++i)
                                    ai->grad[i] += o.grad[i];
                                });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a, std::vector<int64_t> perm) {
  const int64_t nd = a.ndim();
  if (static_cast<int64_t>(perm.size()) != nd)
    throw ShapeError("transpose: perm size mismatch for " +
                     shape_str(a.shape()));
  Shape os(static_cast<size_t>(nd));
  auto ist = row_major_strides(a.shape());
  std::vector<int64_t> src_stride(static_cast<size_t>(nd));
  for (int64_t d = 0; d < nd; ++d) {
    os[static_cast<size_t>(d)] = a.shape()[static_cast<size_t>(perm[static_cast<size_t>(d)])];
    src_stride[static_cast<size_t>(d)] = ist[static_cast<size_t>(perm[static_cast<size_t>(d)])];
  }
  const int64_t total = a.numel();
  std::vector<T> out(static_cast<size_t>(total));
  std::vector<int64_t> src_of(static_cast<size_t>(total));
  {
    std::vector<int64_t> zero(static_cast<size_t>(nd), 0);
    detail::for_each2(os, src_stride, zero, [&](int64_t oi, int64_t ja, int64_t) {
      out[static_cast<size_t>(oi)] = a.values()[static_cast<size_t>(ja)];
      src_of[static_cast<size_t>(oi)] = ja;
    });
  }
  auto ai = a.impl;
  return detail::make_result<T>(
      "transpose", std::move(os), std::move(out), {&a},
      [ai, src_of](TensorImpl<T>& o) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
          ai->grad[static_cast<size_t>(src_of[i])] += o.grad[i];
      });
}

// Swaps the last two axes.
template <class T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
  std::vector<int64_t> perm(static_cast<size_t>(a.ndim()));
  for (int64_t i = 0; i < a.ndim(); ++i) perm[static_cast<size_t>(i)] = i;
  std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
  return transpose(a, std::move(perm));
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, int64_t axis, int64_t start, int64_t len) {
  if (axis < 0) axis += a.ndim();
  if (axis < 0 || axis >= a.ndim() || start < 0 || len < 0 ||
      start + len > a.shape()[static_cast<size_t>(axis)])
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") invalid for axis " +
                     std::to_string(axis) + " of " + shape_str(a.shape()));
  int64_t outer, alen, inner;
  detail::axis_split(a.shape(), axis, outer, alen, inner);
  Shape os = a.shape();
  os[static_cast<size_t>(axis)] = len;
  std::vector<T> out(static_cast<size_t>(outer * len * inner));
  const auto& av = a.values();
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * len * inner,
                av.data() + (o * alen + start) * inner,
                static_cast<size_t>(len * inner) * sizeof(T));
  auto ai = a.impl;
  return detail::make_result<T>(
      "slice", std::move(os), std::move(out), {&a},
      [ai, outer, alen, inner, start, len](TensorImpl<T>& o) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (int64_t ot = 0; ot < outer; ++ot) {
          T* dst = ai->grad.data() + (ot * alen + start) * inner;
          const T* src = o.grad.data() + ot * len * inner;
          for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
      });
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int64_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int64_t nd = parts[0].ndim();
  if (axis < 0) axis += nd;
  Shape os = parts[0].shape();
  int64_t total_axis = 0;
  for (const auto& p : parts) {
    if (p.ndim() != nd) throw ShapeError("concat: rank mismatch");
    for (int64_t d = 0; d < nd; ++d)
      if (d != axis && p.shape()[static_cast<size_t>(d)] != os[static_cast<size_t>(d)])
        throw ShapeError("concat: shape mismatch: " + shape_str(p.shape()) +
                         " vs " + shape_str(os));
    total_axis += p.shape()[static_cast<size_t>(axis)];
  }
  os[static_cast<size_t>(axis)] = total_axis;
  int64_t outer, len, inner;
  detail::axis_split(os, axis, outer, len, inner);
  std::vector<T> out(static_cast<size_t>(shape_numel(os)));
  std::vector<int64_t> axis_len(parts.size());
  int64_t off = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const int64_t plen = parts[pi].shape()[static_cast<size_t>(axis)];
    axis_len[pi] = plen;
    const auto& pv = parts[pi].values();
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data() + (o * len + off) * inner,
                  pv.data() + o * plen * inner,
                  static_cast<size_t>(plen * inner) * sizeof(T));
    off += plen;
  }
  std::vector<std::shared_ptr<TensorImpl<T>>> impls;
  for (const auto& p : parts) impls.push_back(p.impl);
  std::vector<const Tensor<T>*> inputs;
  bool any_grad = false;
  for (const auto& p : parts) any_grad |= p.requires_grad();
  detail::check_finite("concat", out);
  Tensor<T> res = Tensor<T>::from_data(std::move(os), std::move(out));
  if (GradMode::enabled() && any_grad) {
    res.impl->requires_grad = true;
    auto out_impl = res.impl;
    Tape<T>::active().record(
        [out_impl, impls, axis_len, outer, len, inner]() {
          if (out_impl->grad.empty()) return;
          int64_t off2 = 0;
          for (size_t pi = 0; pi < impls.size(); ++pi) {
            const int64_t plen = axis_len[pi];
            if (impls[pi]->requires_grad) {
              impls[pi]->ensure_grad();
              for (int64_t o = 0; o < outer; ++o) {
                const T* src = out_impl->grad.data() + (o * len + off2) * inner;
                T* dst = impls[pi]->grad.data() + o * plen * inner;
                for (int64_t i = 0; i < plen * inner; ++i) dst[i] += src[i];
              }
            }
            off2 += plen;
          }
        });
  }
  return res;
}

template <class T>
Tensor<T> flip(const Tensor<T>& a, int64_t axis) {
  if (axis < 0) axis += a.ndim();
  if (axis < 0 || axis >= a.ndim())
    throw ShapeError("flip: axis out of range for " + shape_str(a.shape()));
  int64_t outer, len, inner;
  detail::axis_split(a.shape(), axis, outer, len, inner);
  const auto& av = a.values();
  std::vector<T> out(av.size());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t j = 0; j < len; ++j) {
      const T* src = av.data() + (o * len + j) * inner;
      T* dst = out.data() + (o * len + (len - 1 - j)) * inner;
      std::memcpy(dst, src, static_cast<size_t>(inner) * sizeof(T));
    }
  auto ai = a.impl;
  return detail::make_result<T>(
      "flip", a.shape(), std::move(out), {&a},
      [ai, outer, len, inner](TensorImpl<T>& o) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (int64_t ot = 0; ot < outer; ++ot)
          for (int64_t j = 0; j < len; ++j) {
            const T* src = o.grad.data() + (ot * len + (len - 1 - j)) * inner;
            T* dst = ai->grad.data() + (ot * len + j) * inner;
            for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
          }
      });
}

template <class T>
Tensor<T> broadcast_to(const Tensor<T>& a, const Shape& shape) {
  Shape os = detail::broadcast_shapes("broadcast_to", a.shape(), shape);
  if (os != shape)
    throw ShapeError("broadcast_to: " + shape_str(a.shape()) +
                     " does not broadcast to " + shape_str(shape));
  auto sa = detail::strides_for(a.shape(), os);
  std::vector<int64_t> zero(os.size(), 0);
  std::vector<T> out(static_cast<size_t>(shape_numel(os)));
  const auto& av = a.values();
  detail::for_each2(os, sa, zero, [&](int64_t oi, int64_t ja, int64_t) {
    out[static_cast<size_t>(oi)] = av[static_cast<size_t>(ja)];
  });
  auto ai = a.impl;
  return detail::make_result<T>(
      "broadcast_to", os, std::move(out), {&a},
      [ai, os, sa, zero](TensorImpl<T>& o) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        detail::for_each2(os, sa, zero, [&](int64_t oi, int64_t ja, int64_t) {
          ai->grad[static_cast<size_t>(ja)] += o.grad[static_cast<size_t>(oi)];
        });
      });
}

}  // namespace ssf
