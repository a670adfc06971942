#pragma once

#include <cstdint>

#include "lpa/isa.hpp"

namespace lpa::kern {

// Data-parallel inner loops behind everything else. Each kernel exists as a
// scalar reference implementation and, on x86-64, an AVX2+FMA variant; the
// active variant is chosen at runtime (see isa.hpp). SIMD variants must agree
// with the scalar reference within floating-point reassociation tolerance
// (equivalence-tested in tests/unit_kernels.cpp).
//
// Matrix arguments are dense row-major.
//   matmul_nn: C(m,n) = A(m,k) * B(k,n)
//   matmul_nt: C(m,n) = A(m,k) * B(n,k)^T
//   matmul_tn: C(k,n) = A(m,k)^T * B(m,n)
// C is overwritten.
template <typename T>
struct Kernels {
  void (*matmul_nn)(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n);
  void (*matmul_nt)(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n);
  void (*matmul_tn)(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n);
  // y = softmax(x / tau) with max subtraction; len >= 1, tau > 0.
  void (*softmax_row)(const T* x, T* y, int64_t len, T inv_tau);
  void (*exp_v)(const T* x, T* y, int64_t len);
  void (*sigmoid_v)(const T* x, T* y, int64_t len);
  // softplus as max(x,0) + log1p(exp(-|x|)); safe for large |x|.
  void (*softplus_v)(const T* x, T* y, int64_t len);
  // tanh-form gelu: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715 x^3)))
  void (*gelu_v)(const T* x, T* y, int64_t len);
  // out(n+1,d): out[0]=0, out[t+1] = out[t] + x[t]
  void (*prefix_sum2d)(const T* x, T* out, int64_t n, int64_t d);
  void (*axpy)(T alpha, const T* x, T* y, int64_t len);  // y += alpha*x
  T (*dot)(const T* x, const T* y, int64_t len);
};

const Kernels<float>& f32();
const Kernels<double>& f64();

template <typename T>
const Kernels<T>& table();

template <>
inline const Kernels<float>& table<float>() { return f32(); }
template <>
inline const Kernels<double>& table<double>() { return f64(); }

// Scalar reference implementations, always available (oracles for the SIMD
// equivalence tests and the fallback dispatch target).
namespace scalar {
template <typename T> void matmul_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n);
template <typename T> void matmul_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n);
template <typename T> void matmul_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n);
template <typename T> void softmax_row(const T* x, T* y, int64_t len, T inv_tau);
template <typename T> void exp_v(const T* x, T* y, int64_t len);
template <typename T> void sigmoid_v(const T* x, T* y, int64_t len);
template <typename T> void softplus_v(const T* x, T* y, int64_t len);
template <typename T> void gelu_v(const T* x, T* y, int64_t len);
template <typename T> void prefix_sum2d(const T* x, T* out, int64_t n, int64_t d);
template <typename T> void axpy(T alpha, const T* x, T* y, int64_t len);
template <typename T> T dot(const T* x, const T* y, int64_t len);
}  // namespace scalar

#if defined(LPA_HAVE_AVX2_TU)
namespace avx2 {
void matmul_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);
void matmul_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);
void matmul_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n);
void softmax_row(const float* x, float* y, int64_t len, float inv_tau);
void exp_v(const float* x, float* y, int64_t len);
void sigmoid_v(const float* x, float* y, int64_t len);
void softplus_v(const float* x, float* y, int64_t len);
void gelu_v(const float* x, float* y, int64_t len);
void prefix_sum2d(const float* x, float* out, int64_t n, int64_t d);
void axpy(float alpha, const float* x, float* y, int64_t len);
float dot(const float* x, const float* y, int64_t len);

void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void prefix_sum2d(const double* x, double* out, int64_t n, int64_t d);
void axpy(double alpha, const double* x, double* y, int64_t len);
double dot(const double* x, const double* y, int64_t len);
}  // namespace avx2
#endif

}  // namespace lpa::kern
