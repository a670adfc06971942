// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma in its own TU; only
// reached through the dispatch table when the CPU supports both.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lpa/kernels.hpp"

namespace lpa::kern::avx2 {

namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

// exp(x), cephes-style polynomial, ~2 ulp over the clamped range.
inline __m256 exp256(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-87.3365478515625f);
  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
  const __m256 one = _mm256_set1_ps(1.0f);

  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
  __m256 fx = _mm256_round_ps(_mm256_mul_ps(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  // r = x - fx*ln2, split constant for accuracy
  __m256 r = _mm256_fnmadd_ps(fx, c1, x);
  r = _mm256_fnmadd_ps(fx, c2, r);

  __m256 p = _mm256_set1_ps(1.9875691500e-4f);
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(1.3981999507e-3f));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(8.3334519073e-3f));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(4.1665795894e-2f));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(1.6666665459e-1f));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(5.0000001201e-1f));
  __m256 r2 = _mm256_mul_ps(r, r);
  p = _mm256_fmadd_ps(p, r2, _mm256_add_ps(r, one));

  __m256i n = _mm256_cvtps_epi32(fx);
  n = _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(127)), 23);
  return _mm256_mul_ps(p, _mm256_castsi256_ps(n));
}

// log1p(z) for z in [0,1] via 2*atanh(z/(2+z)), odd series through w^11.
inline __m256 log1p01(__m256 z) {
  const __m256 two = _mm256_set1_ps(2.0f);
  __m256 w = _mm256_div_ps(z, _mm256_add_ps(two, z));
  __m256 w2 = _mm256_mul_ps(w, w);
  __m256 p = _mm256_set1_ps(1.0f / 11.0f);
  p = _mm256_fmadd_ps(p, w2, _mm256_set1_ps(1.0f / 9.0f));
  p = _mm256_fmadd_ps(p, w2, _mm256_set1_ps(1.0f / 7.0f));
  p = _mm256_fmadd_ps(p, w2, _mm256_set1_ps(1.0f / 5.0f));
  p = _mm256_fmadd_ps(p, w2, _mm256_set1_ps(1.0f / 3.0f));
  p = _mm256_fmadd_ps(p, w2, _mm256_set1_ps(1.0f));
  return _mm256_mul_ps(_mm256_mul_ps(two, w), p);
}

inline __m256 tanh256(__m256 x) {
  // tanh(x) = 1 - 2/(exp(2x)+1)
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 two = _mm256_set1_ps(2.0f);
  __m256 e = exp256(_mm256_mul_ps(two, x));
  return _mm256_sub_ps(one, _mm256_div_ps(two, _mm256_add_ps(e, one)));
}

}  // namespace

void matmul_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
  std::memset(c, 0, sizeof(float) * static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const __m256 va = _mm256_set1_ps(arow[p]);
      const float* brow = b + p * n;
      int64_t j = 0;
      for (; j + 16 <= n; j += 16) {
        __m256 c0 = _mm256_loadu_ps(crow + j);
        __m256 c1 = _mm256_loadu_ps(crow + j + 8);
        c0 = _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j), c0);
        c1 = _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j + 8), c1);
        _mm256_storeu_ps(crow + j, c0);
        _mm256_storeu_ps(crow + j + 8, c1);
      }
      for (; j + 8 <= n; j += 8) {
        __m256 c0 = _mm256_loadu_ps(crow + j);
        c0 = _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j), c0);
        _mm256_storeu_ps(crow + j, c0);
      }
      const float av = arow[p];
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const float* brow = b + j * k;
      __m256 acc = _mm256_setzero_ps();
      int64_t p = 0;
      for (; p + 8 <= k; p += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), acc);
      float s = hsum(acc);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = s;
    }
  }
}

void matmul_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
  std::memset(c, 0, sizeof(float) * static_cast<size_t>(k * n));
  for (int64_t t = 0; t < m; ++t) {
    const float* arow = a + t * k;
    const float* brow = b + t * n;
    for (int64_t i = 0; i < k; ++i) {
      const __m256 va = _mm256_set1_ps(arow[i]);
      float* crow = c + i * n;
      int64_t j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256 cv = _mm256_loadu_ps(crow + j);
        cv = _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j), cv);
        _mm256_storeu_ps(crow + j, cv);
      }
      const float av = arow[i];
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void exp_v(const float* x, float* y, int64_t len) {
  int64_t i = 0;
  for (; i + 8 <= len; i += 8) _mm256_storeu_ps(y + i, exp256(_mm256_loadu_ps(x + i)));
  for (; i < len; ++i) y[i] = std::exp(x[i]);
}

void softmax_row(const float* x, float* y, int64_t len, float inv_tau) {
  __m256 vm = _mm256_set1_ps(-INFINITY);
  int64_t i = 0;
  for (; i + 8 <= len; i += 8) vm = _mm256_max_ps(vm, _mm256_loadu_ps(x + i));
  float m = x[0];
  {
    alignas(32) float tmp[8];
    _mm256_store_ps(tmp, vm);
    if (len >= 8)
      for (float v : tmp) m = std::max(m, v);
    for (int64_t r = i; r < len; ++r) m = std::max(m, x[r]);
  }
  const __m256 vmm = _mm256_set1_ps(m);
  const __m256 vit = _mm256_set1_ps(inv_tau);
  __m256 vsum = _mm256_setzero_ps();
  i = 0;
  for (; i + 8 <= len; i += 8) {
    __m256 e = exp256(_mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(x + i), vmm), vit));
    _mm256_storeu_ps(y + i, e);
    vsum = _mm256_add_ps(vsum, e);
  }
  float sum = hsum(vsum);
  for (; i < len; ++i) {
    const float e = std::exp((x[i] - m) * inv_tau);
    y[i] = e;
    sum += e;
  }
  const float inv = 1.0f / sum;
  const __m256 vinv = _mm256_set1_ps(inv);
  i = 0;
  for (; i + 8 <= len; i += 8)
    _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(y + i), vinv));
  for (; i < len; ++i) y[i] *= inv;
}

void sigmoid_v(const float* x, float* y, int64_t len) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 zero = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= len; i += 8) {
    __m256 e = exp256(_mm256_sub_ps(zero, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, _mm256_div_ps(one, _mm256_add_ps(one, e)));
  }
  for (; i < len; ++i) y[i] = 1.0f / (1.0f + std::exp(-x[i]));
}

void softplus_v(const float* x, float* y, int64_t len) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 absmask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  int64_t i = 0;
  for (; i + 8 <= len; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    __m256 e = exp256(_mm256_sub_ps(zero, _mm256_and_ps(v, absmask)));
    __m256 r = _mm256_add_ps(_mm256_max_ps(v, zero), log1p01(e));
    _mm256_storeu_ps(y + i, r);
  }
  for (; i < len; ++i)
    y[i] = std::max(x[i], 0.0f) + std::log1p(std::exp(-std::abs(x[i])));
}

void gelu_v(const float* x, float* y, int64_t len) {
  const __m256 c = _mm256_set1_ps(0.7978845608028654f);
  const __m256 k = _mm256_set1_ps(0.044715f);
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 one = _mm256_set1_ps(1.0f);
  int64_t i = 0;
  for (; i + 8 <= len; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    __m256 v3 = _mm256_mul_ps(_mm256_mul_ps(v, v), v);
    __m256 u = _mm256_mul_ps(c, _mm256_fmadd_ps(k, v3, v));
    __m256 t = tanh256(u);
    _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_mul_ps(half, v), _mm256_add_ps(one, t)));
  }
  for (; i < len; ++i) {
    const float v = x[i];
    const float u = 0.7978845608028654f * (v + 0.044715f * v * v * v);
    y[i] = 0.5f * v * (1.0f + std::tanh(u));
  }
}

void prefix_sum2d(const float* x, float* out, int64_t n, int64_t d) {
  std::memset(out, 0, sizeof(float) * static_cast<size_t>(d));
  for (int64_t t = 0; t < n; ++t) {
    const float* prev = out + t * d;
    const float* xr = x + t * d;
    float* cur = out + (t + 1) * d;
    int64_t c = 0;
    for (; c + 8 <= d; c += 8)
      _mm256_storeu_ps(cur + c,
                       _mm256_add_ps(_mm256_loadu_ps(prev + c), _mm256_loadu_ps(xr + c)));
    for (; c < d; ++c) cur[c] = prev[c] + xr[c];
  }
}

void axpy(float alpha, const float* x, float* y, int64_t len) {
  const __m256 va = _mm256_set1_ps(alpha);
  int64_t i = 0;
  for (; i + 8 <= len; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < len; ++i) y[i] += alpha * x[i];
}

float dot(const float* x, const float* y, int64_t len) {
  __m256 acc = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= len; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
  float s = hsum(acc);
  for (; i < len; ++i) s += x[i] * y[i];
  return s;
}

// f64 variants for the arithmetic kernels; transcendentals stay scalar.

void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  std::memset(c, 0, sizeof(double) * static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const __m256d va = _mm256_set1_pd(arow[p]);
      const double* brow = b + p * n;
      int64_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      const double av = arow[p];
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      __m256d acc = _mm256_setzero_pd();
      int64_t p = 0;
      for (; p + 4 <= k; p += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc);
      double s = hsum(acc);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = s;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  std::memset(c, 0, sizeof(double) * static_cast<size_t>(k * n));
  for (int64_t t = 0; t < m; ++t) {
    const double* arow = a + t * k;
    const double* brow = b + t * n;
    for (int64_t i = 0; i < k; ++i) {
      const __m256d va = _mm256_set1_pd(arow[i]);
      double* crow = c + i * n;
      int64_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      const double av = arow[i];
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void prefix_sum2d(const double* x, double* out, int64_t n, int64_t d) {
  std::memset(out, 0, sizeof(double) * static_cast<size_t>(d));
  for (int64_t t = 0; t < n; ++t) {
    const double* prev = out + t * d;
    const double* xr = x + t * d;
    double* cur = out + (t + 1) * d;
    int64_t c = 0;
    for (; c + 4 <= d; c += 4)
      _mm256_storeu_pd(cur + c,
                       _mm256_add_pd(_mm256_loadu_pd(prev + c), _mm256_loadu_pd(xr + c)));
    for (; c < d; ++c) cur[c] = prev[c] + xr[c];
  }
}

void axpy(double alpha, const double* x, double* y, int64_t len) {
  const __m256d va = _mm256_set1_pd(alpha);
  int64_t i = 0;
  for (; i + 4 <= len; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < len; ++i) y[i] += alpha * x[i];
}

double dot(const double* x, const double* y, int64_t len) {
  __m256d acc = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= len; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double s = hsum(acc);
  for (; i < len; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace lpa::kern::avx2
