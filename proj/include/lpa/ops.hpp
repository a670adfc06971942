#pragma once

#include <cmath>

#include "lpa/kernels.hpp"
#include "lpa/tensor.hpp"

namespace lpa::ops {

// Scalar math used by backward passes and small parameter transforms.
template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
inline T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
inline T gelu(T x) {
  const T c = T(0.7978845608028654);
  return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
}

template <typename T>
inline T gelu_grad(T x) {
  const T c = T(0.7978845608028654);
  const T u = c * (x + T(0.044715) * x * x * x);
  const T th = std::tanh(u);
  const T du = c * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
}

// Inverse of softplus, for parameter initialization from a target value.
template <typename T>
inline T softplus_inv(T y) {
  check(y > T(0), "softplus_inv requires a positive target");
  // log(exp(y)-1) = y + log1p(-exp(-y))
  return y + std::log1p(-std::exp(-y));
}

// C(m,n) = A(m,k) * B(k,n)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 tensors");
  check(a.dim(1) == b.dim(0), "matmul inner dimensions mismatch: " + shape_str(a.shape) +
                                  " x " + shape_str(b.shape));
  Tensor<T> c({a.dim(0), b.dim(1)});
  if (c.numel() > 0 && a.dim(1) > 0)
    kern::table<T>().matmul_nn(a.ptr(), b.ptr(), c.ptr(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

// C(m,n) = A(m,k) * B(n,k)^T — the "apply weight matrix stored (out,in)" form.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.rank() == 2 && b.rank() == 2, "matmul_nt expects rank-2 tensors");
  check(a.dim(1) == b.dim(1), "matmul_nt inner dimensions mismatch");
  Tensor<T> c({a.dim(0), b.dim(0)});
  if (c.numel() > 0)
    kern::table<T>().matmul_nt(a.ptr(), b.ptr(), c.ptr(), a.dim(0), a.dim(1), b.dim(0));
  return c;
}

// C(k,n) = A(m,k)^T * B(m,n)
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.rank() == 2 && b.rank() == 2, "matmul_tn expects rank-2 tensors");
  check(a.dim(0) == b.dim(0), "matmul_tn leading dimensions mismatch");
  Tensor<T> c({a.dim(1), b.dim(1)});
  if (c.numel() > 0 && a.dim(0) > 0)
    kern::table<T>().matmul_tn(a.ptr(), b.ptr(), c.ptr(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

// softmax(x / tau) over a vector, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, T tau) {
  check(tau > T(0), "softmax temperature must be positive");
  check(x.numel() >= 1, "softmax of an empty vector");
  Tensor<T> y = zeros_like(x);
  kern::table<T>().softmax_row(x.ptr(), y.ptr(), x.numel(), T(1) / tau);
  return y;
}

template <typename T>
Tensor<T> sigmoid_t(const Tensor<T>& x) {
  Tensor<T> y = zeros_like(x);
  kern::table<T>().sigmoid_v(x.ptr(), y.ptr(), x.numel());
  return y;
}

template <typename T>
Tensor<T> gelu_t(const Tensor<T>& x) {
  Tensor<T> y = zeros_like(x);
  kern::table<T>().gelu_v(x.ptr(), y.ptr(), x.numel());
  return y;
}

// out[t,c] = sum_j kernel[j,c] * x[t-k+1+j, c], zero-padded on the left so
// output t depends only on inputs <= t.
template <typename T>
Tensor<T> causal_dwconv(const Tensor<T>& x, const Tensor<T>& kernel) {
  check(x.rank() == 2 && kernel.rank() == 2, "causal_dwconv expects rank-2 tensors");
  check(kernel.dim(0) >= 1, "causal_dwconv kernel must have at least one tap");
  check(kernel.dim(1) == x.dim(1), "causal_dwconv kernel channel count must equal input width");
  const int64_t n = x.dim(0), d = x.dim(1), k = kernel.dim(0);
  Tensor<T> out({n, d});
  for (int64_t t = 0; t < n; ++t) {
    T* orow = out.row(t);
    for (int64_t j = 0; j < k; ++j) {
      const int64_t src = t - k + 1 + j;
      if (src < 0) continue;
      const T* xrow = x.row(src);
      const T* krow = kernel.row(j);
      for (int64_t c = 0; c < d; ++c) orow[c] += krow[c] * xrow[c];
    }
  }
  return out;
}

// C(n+1,d): C[0]=0, C[t+1]=C[t]+x[t]; range sum over [s,e] is C[e+1]-C[s].
template <typename T>
Tensor<T> prefix_sum(const Tensor<T>& x) {
  check(x.rank() == 2, "prefix_sum expects a rank-2 tensor");
  const int64_t n = x.dim(0), d = x.dim(1);
  Tensor<T> c({n + 1, d});
  if (d > 0) kern::table<T>().prefix_sum2d(x.ptr(), c.ptr(), n, d);
  return c;
}

// Sum of rows s..e inclusive, via a precomputed prefix-sum tensor.
template <typename T>
void range_sum(const Tensor<T>& prefix, int64_t s, int64_t e, T* out) {
  const int64_t d = prefix.dim(1);
  const T* hi = prefix.row(e + 1);
  const T* lo = prefix.row(s);
  for (int64_t c = 0; c < d; ++c) out[c] = hi[c] - lo[c];
}

}  // namespace lpa::ops
