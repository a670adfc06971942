#pragma once

#include <cstdint>
#include <vector>

#include "lpa/ops.hpp"
#include "lpa/tensor.hpp"

namespace lpa::gates {

// Gate predictor: causal depthwise conv (kernel k) followed by a 2-layer MLP
// with GELU, Linear(d->d) -> GELU -> Linear(d->d/2). Weights stored (out,in).
template <typename T>
struct PredictorParams {
  Tensor<T> dw;       // (k, d)
  Tensor<T> w1, b1;   // (d, d), (d)
  Tensor<T> w2, b2;   // (d/2, d), (d/2)
};

// Content-dependent rectangular pulses: center and half-width predicted from
// the hidden sequence via per-pulse query vectors.
template <typename T>
struct AperiodicParams {
  PredictorParams<T> pred;
  Tensor<T> q;   // (Pa, d/2) query vectors
  Tensor<T> fw;  // (d/2) half-width head weight
  Tensor<T> fb;  // (1)   half-width head bias
  int64_t pulses() const { return q.rank() == 2 ? q.dim(0) : 0; }
};

// Square-wave pulses; period T = 2^(softplus(rho)+2) so T >= 4 for any rho.
template <typename T>
struct PeriodicParams {
  Tensor<T> rho, phi, zeta;  // (Pp) raw period logits, phases, duty logits
  int64_t pulses() const { return rho.numel(); }
};

// Content-independent gates from a learned sin/cos basis over normalized
// position t/(n-1).
template <typename T>
struct PositionalParams {
  Tensor<T> a, b;  // (Pq, K) sin and cos coefficients
  Tensor<T> bias;  // (Pq)
  int64_t pulses() const { return bias.numel(); }
  int64_t bases() const { return a.rank() == 2 ? a.dim(1) : 0; }
};

template <typename T>
struct GateParams {
  AperiodicParams<T> ap;
  PeriodicParams<T> per;
  PositionalParams<T> pos;
  int64_t pulses() const { return ap.pulses() + per.pulses() + pos.pulses(); }
};

enum class GateFamily : int { aperiodic = 0, periodic = 1, positional = 2 };

const char* family_name(GateFamily f);

// Evaluated soft gates for one head: column p is pulse p, every entry in
// [0,1]. Column order is aperiodic block, periodic block, positional block.
template <typename T>
struct GateMatrix {
  Tensor<T> g;  // (n, P)
  std::vector<GateFamily> family;
  T tau = T(1);
};

template <typename T>
struct PredictorCache {
  Tensor<T> u;   // dwconv output (n, d)
  Tensor<T> z1;  // pre-GELU (n, d)
  Tensor<T> a1;  // post-GELU (n, d)
  Tensor<T> h;   // hidden (n, d/2)
};

template <typename T>
struct GateEvalCache {
  PredictorCache<T> pred;
  Tensor<T> alpha;      // (Pa, n) softmax weights per aperiodic pulse
  Tensor<T> center;     // (Pa)
  Tensor<T> halfwidth;  // (Pa)
  Tensor<T> zw;         // (Pa) pre-softplus width logits
  Tensor<T> hbar;       // (Pa, d/2)
  Tensor<T> period;     // (Pp)
  Tensor<T> duty;       // (Pp)
  Tensor<T> bias;       // (P) applied pre-sigmoid bias, empty if none
};

template <typename T>
T period_of(T rho) {
  return std::exp2(ops::softplus(rho) + T(2));
}

template <typename T>
T duty_of(T zeta) {
  return ops::sigmoid(zeta);
}

// h = MLP(DWConv(x)); causality is inherited from the causal convolution.
template <typename T>
Tensor<T> predict_hidden(const Tensor<T>& x, const PredictorParams<T>& p,
                         PredictorCache<T>* cache = nullptr);

template <typename T>
struct AperiodicResult {
  Tensor<T> g;          // (n, Pa)
  Tensor<T> center;     // (Pa), in [0, n-1]
  Tensor<T> halfwidth;  // (Pa), > 0
};

// bias, when non-null, is one pre-sigmoid offset per pulse of the family.
template <typename T>
AperiodicResult<T> aperiodic_gate(const Tensor<T>& x, const AperiodicParams<T>& p, T tau,
                                  const T* bias = nullptr);

template <typename T>
Tensor<T> periodic_gate(const PeriodicParams<T>& p, int64_t n, T tau, const T* bias = nullptr);

template <typename T>
Tensor<T> positional_gate(const PositionalParams<T>& p, int64_t n, T tau, const T* bias = nullptr);

// Continuous-t evaluation of one periodic pulse (used to check exact
// T-periodicity, which only holds off the integer grid).
template <typename T>
T periodic_gate_at(const PeriodicParams<T>& p, int64_t pulse, T t, T tau, T bias = T(0));

// Additive pre-sigmoid bias from the previous layer's mean gate pattern:
// bias = proj(P, P_prev) * prev_gate_mean(P_prev).
template <typename T>
Tensor<T> cross_layer_bias(const Tensor<T>& prev_gate_mean, const Tensor<T>& proj);

// Full evaluation of one head's gates; fills the gate matrix and, when given,
// the cache needed by gates_backward.
template <typename T>
void evaluate_gates(const Tensor<T>& x, const GateParams<T>& p, T tau, const Tensor<T>* bias,
                    GateMatrix<T>* out, GateEvalCache<T>* cache);

// Accumulates into grads/dx/dbias; callers zero-initialize.
template <typename T>
void gates_backward(const Tensor<T>& x, const GateParams<T>& p, T tau, const GateMatrix<T>& gm,
                    const GateEvalCache<T>& cache, const Tensor<T>& dg, GateParams<T>* grads,
                    Tensor<T>* dx, Tensor<T>* dbias);

template <typename T>
GateParams<T> zeros_like(const GateParams<T>& p);

}  // namespace lpa::gates
