#include <algorithm>
#include <cmath>
#include <cstring>

#include "lpa/kernels.hpp"

namespace lpa::kern::scalar {

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  std::memset(c, 0, sizeof(T) * static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  std::memset(c, 0, sizeof(T) * static_cast<size_t>(k * n));
  for (int64_t t = 0; t < m; ++t) {
    const T* arow = a + t * k;
    const T* brow = b + t * n;
    for (int64_t i = 0; i < k; ++i) {
      const T av = arow[i];
      T* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void softmax_row(const T* x, T* y, int64_t len, T inv_tau) {
  T m = x[0];
  for (int64_t i = 1; i < len; ++i) m = std::max(m, x[i]);
  T sum = T(0);
  for (int64_t i = 0; i < len; ++i) {
    const T e = std::exp((x[i] - m) * inv_tau);
    y[i] = e;
    sum += e;
  }
  const T inv = T(1) / sum;
  for (int64_t i = 0; i < len; ++i) y[i] *= inv;
}

template <typename T>
void exp_v(const T* x, T* y, int64_t len) {
  for (int64_t i = 0; i < len; ++i) y[i] = std::exp(x[i]);
}

template <typename T>
void sigmoid_v(const T* x, T* y, int64_t len) {
  for (int64_t i = 0; i < len; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <typename T>
void softplus_v(const T* x, T* y, int64_t len) {
  for (int64_t i = 0; i < len; ++i)
    y[i] = std::max(x[i], T(0)) + std::log1p(std::exp(-std::abs(x[i])));
}

template <typename T>
void gelu_v(const T* x, T* y, int64_t len) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  for (int64_t i = 0; i < len; ++i) {
    const T v = x[i];
    const T u = c * (v + T(0.044715) * v * v * v);
    y[i] = T(0.5) * v * (T(1) + std::tanh(u));
  }
}

template <typename T>
void prefix_sum2d(const T* x, T* out, int64_t n, int64_t d) {
  std::memset(out, 0, sizeof(T) * static_cast<size_t>(d));
  for (int64_t t = 0; t < n; ++t) {
    const T* prev = out + t * d;
    const T* xr = x + t * d;
    T* cur = out + (t + 1) * d;
    for (int64_t c = 0; c < d; ++c) cur[c] = prev[c] + xr[c];
  }
}

template <typename T>
void axpy(T alpha, const T* x, T* y, int64_t len) {
  for (int64_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot(const T* x, const T* y, int64_t len) {
  T acc = T(0);
  for (int64_t i = 0; i < len; ++i) acc += x[i] * y[i];
  return acc;
}

template void matmul_nn<float>(const float*, const float*, float*, int64_t, int64_t, int64_t);
template void matmul_nn<double>(const double*, const double*, double*, int64_t, int64_t, int64_t);
template void matmul_nt<float>(const float*, const float*, float*, int64_t, int64_t, int64_t);
template void matmul_nt<double>(const double*, const double*, double*, int64_t, int64_t, int64_t);
template void matmul_tn<float>(const float*, const float*, float*, int64_t, int64_t, int64_t);
template void matmul_tn<double>(const double*, const double*, double*, int64_t, int64_t, int64_t);
template void softmax_row<float>(const float*, float*, int64_t, float);
template void softmax_row<double>(const double*, double*, int64_t, double);
template void exp_v<float>(const float*, float*, int64_t);
template void exp_v<double>(const double*, double*, int64_t);
template void sigmoid_v<float>(const float*, float*, int64_t);
template void sigmoid_v<double>(const double*, double*, int64_t);
template void softplus_v<float>(const float*, float*, int64_t);
template void softplus_v<double>(const double*, double*, int64_t);
template void gelu_v<float>(const float*, float*, int64_t);
template void gelu_v<double>(const double*, double*, int64_t);
template void prefix_sum2d<float>(const float*, float*, int64_t, int64_t);
template void prefix_sum2d<double>(const double*, double*, int64_t, int64_t);
template void axpy<float>(float, const float*, float*, int64_t);
template void axpy<double>(double, const double*, double*, int64_t);
template float dot<float>(const float*, const float*, int64_t);
template double dot<double>(const double*, const double*, int64_t);

}  // namespace lpa::kern::scalar
