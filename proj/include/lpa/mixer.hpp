#pragma once

#include <cstdint>
#include <vector>

#include "lpa/gates.hpp"
#include "lpa/tensor.hpp"

namespace lpa::mixer {

// Guard on the pulse-summary and per-position denominators; guarded regions
// output zero and contribute zero gradient.
inline constexpr double kDenEps = 1e-8;

// One LPA layer. Heads operate on disjoint d/H channel slices of the value
// projection with independent pulses; outputs are concatenated and projected
// by the shared wo.
template <typename T>
struct LpaParams {
  int64_t d = 0;
  int64_t heads = 1;
  T tau = T(1);
  std::vector<gates::GateParams<T>> head_gates;  // size heads
  Tensor<T> wlogit;  // (H, P) pulse-weight logits, softmax per head
  Tensor<T> amp;     // (H, P) per-pulse amplitudes
  Tensor<T> wv, wo;  // (d, d)
  // Cross-layer coordination: bias = xproj * prev_gate_mean, one scalar per
  // pulse. Empty tensor disables it.
  Tensor<T> xproj;

  int64_t pulses_per_head() const {
    return head_gates.empty() ? 0 : head_gates[0].pulses();
  }
  int64_t head_dim() const { return heads > 0 ? d / heads : 0; }
};

template <typename T>
struct LpaOutput {
  Tensor<T> y;  // (n, d)
  std::vector<gates::GateMatrix<T>> gate;  // per head
  Tensor<T> mask;       // (n, H), m_t = 1 - exp(-sum_p g_pt) in [0,1)
  Tensor<T> vbar;       // (H, P, d/H) per-pulse summaries
  Tensor<T> gate_mean;  // (H*P) mean gate value over positions
};

template <typename T>
struct LpaCache {
  Tensor<T> v;  // (n, d) value projection
  std::vector<gates::GateEvalCache<T>> gate_caches;
  Tensor<T> w;      // (H, P) softmax pulse weights
  Tensor<T> sump;   // (H, P) per-pulse gate mass
  Tensor<T> num;    // (n, d) per-head numerators in the head's channel slice
  Tensor<T> den;    // (n, H)
  Tensor<T> mixed;  // (n, d) masked mix, pre-wo
  Tensor<T> bias;   // (H*P) applied cross-layer bias, empty if none
  std::vector<uint8_t> active;  // (H*P)
};

// v_bar_p = sum_t g_pt (wv x_t) / sum_t g_pt; pulses whose gate mass falls
// under kDenEps yield zero and are flagged inactive.
template <typename T>
Tensor<T> pulse_summary(const Tensor<T>& x, const Tensor<T>& g, const Tensor<T>& wv,
                        std::vector<uint8_t>* active = nullptr);

template <typename T>
void lpa_forward(const Tensor<T>& x, const LpaParams<T>& p, LpaOutput<T>* out,
                 LpaCache<T>* cache = nullptr, const Tensor<T>* prev_gate_mean = nullptr);

// Accumulates gradients of <upstream, y> into grads and dx (both
// zero-initialized by the caller).
template <typename T>
void lpa_backward(const Tensor<T>& x, const LpaParams<T>& p, const LpaOutput<T>& out,
                  const LpaCache<T>& cache, const Tensor<T>& upstream, LpaParams<T>* grads,
                  Tensor<T>* dx, const Tensor<T>* prev_gate_mean = nullptr);

template <typename T>
struct LpaGradients {
  LpaParams<T> params;  // same shapes as the parameters
  Tensor<T> x;
};

template <typename T>
LpaGradients<T> lpa_gradients(const Tensor<T>& x, const LpaParams<T>& p,
                              const Tensor<T>& upstream,
                              const Tensor<T>* prev_gate_mean = nullptr);

template <typename T>
LpaParams<T> zeros_like(const LpaParams<T>& p);

// Enumerates every learnable tensor as (name, param, grad) triples; the
// iteration order is fixed and shared by the optimizer, the serializer, and
// the finite-difference checks.
template <typename T, typename F>
void for_each_param(LpaParams<T>& p, LpaParams<T>& g, F&& f) {
  for (size_t h = 0; h < p.head_gates.size(); ++h) {
    auto& gp = p.head_gates[h];
    auto& gg = g.head_gates[h];
    const std::string pre = "head." + std::to_string(h) + ".";
    if (gp.ap.pulses() > 0) {
      f(pre + "gates.aperiodic.pred.dw", gp.ap.pred.dw, gg.ap.pred.dw);
      f(pre + "gates.aperiodic.pred.w1", gp.ap.pred.w1, gg.ap.pred.w1);
      f(pre + "gates.aperiodic.pred.b1", gp.ap.pred.b1, gg.ap.pred.b1);
      f(pre + "gates.aperiodic.pred.w2", gp.ap.pred.w2, gg.ap.pred.w2);
      f(pre + "gates.aperiodic.pred.b2", gp.ap.pred.b2, gg.ap.pred.b2);
      f(pre + "gates.aperiodic.q", gp.ap.q, gg.ap.q);
      f(pre + "gates.aperiodic.fw", gp.ap.fw, gg.ap.fw);
      f(pre + "gates.aperiodic.fb", gp.ap.fb, gg.ap.fb);
    }
    if (gp.per.pulses() > 0) {
      f(pre + "gates.periodic.rho", gp.per.rho, gg.per.rho);
      f(pre + "gates.periodic.phi", gp.per.phi, gg.per.phi);
      f(pre + "gates.periodic.zeta", gp.per.zeta, gg.per.zeta);
    }
    if (gp.pos.pulses() > 0) {
      f(pre + "gates.positional.a", gp.pos.a, gg.pos.a);
      f(pre + "gates.positional.b", gp.pos.b, gg.pos.b);
      f(pre + "gates.positional.bias", gp.pos.bias, gg.pos.bias);
    }
  }
  f("wlogit", p.wlogit, g.wlogit);
  f("amp", p.amp, g.amp);
  f("wv", p.wv, g.wv);
  f("wo", p.wo, g.wo);
  if (p.xproj.numel() > 0) f("xproj", p.xproj, g.xproj);
}

}  // namespace lpa::mixer
