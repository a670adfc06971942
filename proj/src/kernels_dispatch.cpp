#include <cstdlib>
#include <cstring>

#include "lpa/kernels.hpp"

namespace lpa::kern {

Isa detect_isa() {
#if defined(LPA_HAVE_AVX2_TU) && defined(__x86_64__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
#endif
  return Isa::scalar;
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::avx2: return "avx2";
    case Isa::scalar: default: return "scalar";
  }
}

namespace {

Isa initial_isa() {
  Isa best = detect_isa();
  if (const char* env = std::getenv("LPA_ISA")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0) return best;  // clamped to detected
  }
  return best;
}

Isa g_active = initial_isa();

template <typename T>
Kernels<T> scalar_table() {
  Kernels<T> t;
  t.matmul_nn = &scalar::matmul_nn<T>;
  t.matmul_nt = &scalar::matmul_nt<T>;
  t.matmul_tn = &scalar::matmul_tn<T>;
  t.softmax_row = &scalar::softmax_row<T>;
  t.exp_v = &scalar::exp_v<T>;
  t.sigmoid_v = &scalar::sigmoid_v<T>;
  t.softplus_v = &scalar::softplus_v<T>;
  t.gelu_v = &scalar::gelu_v<T>;
  t.prefix_sum2d = &scalar::prefix_sum2d<T>;
  t.axpy = &scalar::axpy<T>;
  t.dot = &scalar::dot<T>;
  return t;
}

Kernels<float> make_f32(Isa isa) {
  Kernels<float> t = scalar_table<float>();
#if defined(LPA_HAVE_AVX2_TU)
  if (isa == Isa::avx2) {
    t.matmul_nn = &avx2::matmul_nn;
    t.matmul_nt = &avx2::matmul_nt;
    t.matmul_tn = &avx2::matmul_tn;
    t.softmax_row = &avx2::softmax_row;
    t.exp_v = &avx2::exp_v;
    t.sigmoid_v = &avx2::sigmoid_v;
    t.softplus_v = &avx2::softplus_v;
    t.gelu_v = &avx2::gelu_v;
    t.prefix_sum2d = &avx2::prefix_sum2d;
    t.axpy = &avx2::axpy;
    t.dot = &avx2::dot;
  }
#else
  (void)isa;
#endif
  return t;
}

Kernels<double> make_f64(Isa isa) {
  Kernels<double> t = scalar_table<double>();
#if defined(LPA_HAVE_AVX2_TU)
  // f64 transcendentals stay on the scalar path; arithmetic kernels vectorize.
  if (isa == Isa::avx2) {
    t.matmul_nn = static_cast<void (*)(const double*, const double*, double*, int64_t, int64_t,
                                       int64_t)>(&avx2::matmul_nn);
    t.matmul_nt = static_cast<void (*)(const double*, const double*, double*, int64_t, int64_t,
                                       int64_t)>(&avx2::matmul_nt);
    t.matmul_tn = static_cast<void (*)(const double*, const double*, double*, int64_t, int64_t,
                                       int64_t)>(&avx2::matmul_tn);
    t.prefix_sum2d = static_cast<void (*)(const double*, double*, int64_t, int64_t)>(
        &avx2::prefix_sum2d);
    t.axpy = static_cast<void (*)(double, const double*, double*, int64_t)>(&avx2::axpy);
    t.dot = static_cast<double (*)(const double*, const double*, int64_t)>(&avx2::dot);
  }
#else
  (void)isa;
#endif
  return t;
}

Kernels<float> g_f32 = make_f32(g_active);
Kernels<double> g_f64 = make_f64(g_active);

}  // namespace

Isa active_isa() { return g_active; }

void force_isa(Isa isa) {
  if (isa > detect_isa()) isa = detect_isa();
  g_active = isa;
  g_f32 = make_f32(isa);
  g_f64 = make_f64(isa);
}

const Kernels<float>& f32() { return g_f32; }
const Kernels<double>& f64() { return g_f64; }

}  // namespace lpa::kern
