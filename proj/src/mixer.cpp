#include "lpa/mixer.hpp"

#include <cmath>

namespace lpa::mixer {

namespace {

template <typename T>
void validate(const Tensor<T>& x, const LpaParams<T>& p) {
  check(x.rank() == 2, "lpa_forward expects (n, d) input");
  check(x.dim(1) == p.d, "lpa input width mismatch: got " + shape_str(x.shape));
  check(p.heads >= 1 && p.d % p.heads == 0, "d must be divisible by the head count");
  check(static_cast<int64_t>(p.head_gates.size()) == p.heads,
        "one gate parameter set per head required");
  check(p.wv.rank() == 2 && p.wv.dim(0) == p.d && p.wv.dim(1) == p.d, "wv must be (d, d)");
  check(p.wo.rank() == 2 && p.wo.dim(0) == p.d && p.wo.dim(1) == p.d, "wo must be (d, d)");
  const int64_t pph = p.pulses_per_head();
  for (const auto& hg : p.head_gates)
    check(hg.pulses() == pph, "heads must carry equal pulse counts");
  check(p.wlogit.rank() == 2 && p.wlogit.dim(0) == p.heads && p.wlogit.dim(1) == pph,
        "wlogit must be (heads, pulses)");
  check(p.amp.same_shape(p.wlogit), "amp must match wlogit shape");
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int64_t c0, int64_t w) {
  Tensor<T> out({x.dim(0), w});
  for (int64_t t = 0; t < x.dim(0); ++t) {
    const T* src = x.row(t) + c0;
    T* dst = out.row(t);
    for (int64_t c = 0; c < w; ++c) dst[c] = src[c];
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> pulse_summary(const Tensor<T>& x, const Tensor<T>& g, const Tensor<T>& wv,
                        std::vector<uint8_t>* active) {
  check(g.rank() == 2 && g.dim(0) == x.dim(0), "gate matrix must be (n, P)");
  const int64_t n = x.dim(0), d = x.dim(1), np = g.dim(1);
  Tensor<T> v = ops::matmul_nt(x, wv);
  Tensor<T> vbar({np, d});
  if (active) active->assign(static_cast<size_t>(np), 0);
  for (int64_t pu = 0; pu < np; ++pu) {
    T s = T(0);
    for (int64_t t = 0; t < n; ++t) s += g.at(t, pu);
    if (s < static_cast<T>(kDenEps)) continue;  // inactive: stays zero
    if (active) (*active)[static_cast<size_t>(pu)] = 1;
    T* row = vbar.row(pu);
    for (int64_t t = 0; t < n; ++t) kern::table<T>().axpy(g.at(t, pu), v.row(t), row, d);
    const T inv = T(1) / s;
    for (int64_t c = 0; c < d; ++c) row[c] *= inv;
  }
  return vbar;
}

template <typename T>
void lpa_forward(const Tensor<T>& x, const LpaParams<T>& p, LpaOutput<T>* out, LpaCache<T>* cache,
                 const Tensor<T>* prev_gate_mean) {
  validate(x, p);
  const int64_t n = x.dim(0), d = p.d, nh = p.heads;
  const int64_t dh = p.head_dim();
  const int64_t pph = p.pulses_per_head();

  out->y = Tensor<T>({n, d});
  out->gate.assign(static_cast<size_t>(nh), gates::GateMatrix<T>{});
  out->mask = Tensor<T>({n, nh});
  out->vbar = Tensor<T>({nh, pph, dh});
  out->gate_mean = Tensor<T>({nh * pph});

  LpaCache<T> local;
  LpaCache<T>& cc = cache ? *cache : local;
  cc.gate_caches.assign(static_cast<size_t>(nh), gates::GateEvalCache<T>{});
  cc.w = Tensor<T>({nh, pph});
  cc.sump = Tensor<T>({nh, pph});
  cc.num = Tensor<T>({n, d});
  cc.den = Tensor<T>({n, nh});
  cc.mixed = Tensor<T>({n, d});
  cc.active.assign(static_cast<size_t>(nh * pph), 0);
  cc.bias = Tensor<T>();

  if (n == 0) return;

  // Cross-layer coordination bias: one pre-sigmoid scalar per pulse.
  if (p.xproj.numel() > 0 && prev_gate_mean != nullptr)
    cc.bias = gates::cross_layer_bias(*prev_gate_mean, p.xproj);

  cc.v = ops::matmul_nt(x, p.wv);

  for (int64_t h = 0; h < nh; ++h) {
    const int64_t c0 = h * dh;
    Tensor<T> xh = slice_cols(x, c0, dh);

    Tensor<T> bias_h;
    if (cc.bias.numel() > 0) {
      bias_h = Tensor<T>({pph});
      for (int64_t pu = 0; pu < pph; ++pu) bias_h.at(pu) = cc.bias.at(h * pph + pu);
    }
    gates::evaluate_gates(xh, p.head_gates[h], p.tau, bias_h.numel() ? &bias_h : nullptr,
                          &out->gate[h], &cc.gate_caches[h]);
    const Tensor<T>& g = out->gate[h].g;

    kern::table<T>().softmax_row(p.wlogit.row(h), cc.w.row(h), pph, T(1));

    // Per-pulse summaries over the head's value slice.
    for (int64_t pu = 0; pu < pph; ++pu) {
      T s = T(0);
      for (int64_t t = 0; t < n; ++t) s += g.at(t, pu);
      cc.sump.at(h, pu) = s;
      out->gate_mean.at(h * pph + pu) = s / static_cast<T>(n);
      T* vb = &out->vbar.at(h, pu, 0);
      if (s < static_cast<T>(kDenEps)) continue;
      cc.active[static_cast<size_t>(h * pph + pu)] = 1;
      for (int64_t t = 0; t < n; ++t)
        kern::table<T>().axpy(g.at(t, pu), cc.v.row(t) + c0, vb, dh);
      const T inv = T(1) / s;
      for (int64_t c = 0; c < dh; ++c) vb[c] *= inv;
    }

    // Position-wise gated mean of summaries, masked by coverage.
    for (int64_t t = 0; t < n; ++t) {
      T den = T(0), sumg = T(0);
      T* numrow = cc.num.row(t) + c0;
      for (int64_t pu = 0; pu < pph; ++pu) {
        const T gv = g.at(t, pu);
        sumg += gv;
        const T wg = cc.w.at(h, pu) * gv;
        den += wg;
        kern::table<T>().axpy(wg * p.amp.at(h, pu), &out->vbar.at(h, pu, 0), numrow, dh);
      }
      cc.den.at(t, h) = den;
      const T m = -std::expm1(-sumg);
      out->mask.at(t, h) = m;
      T* mix = cc.mixed.row(t) + c0;
      if (den >= static_cast<T>(kDenEps)) {
        const T scale = m / den;
        for (int64_t c = 0; c < dh; ++c) mix[c] = numrow[c] * scale;
      }
    }
  }

  out->y = ops::matmul_nt(cc.mixed, p.wo);
}

template <typename T>
void lpa_backward(const Tensor<T>& x, const LpaParams<T>& p, const LpaOutput<T>& out,
                  const LpaCache<T>& cache, const Tensor<T>& upstream, LpaParams<T>* grads,
                  Tensor<T>* dx, const Tensor<T>* prev_gate_mean) {
  const int64_t n = x.dim(0), d = p.d, nh = p.heads;
  const int64_t dh = p.head_dim();
  const int64_t pph = p.pulses_per_head();
  check(upstream.rank() == 2 && upstream.dim(0) == n && upstream.dim(1) == d,
        "upstream shape must match the output");
  if (n == 0) return;

  // y = mixed wo^T
  {
    Tensor<T> dwo = ops::matmul_tn(upstream, cache.mixed);
    for (int64_t i = 0; i < dwo.numel(); ++i) grads->wo.at(i) += dwo.at(i);
  }
  Tensor<T> dmixed = ops::matmul(upstream, p.wo);

  Tensor<T> dv({n, d});
  Tensor<T> dbias_all;
  const bool have_bias = cache.bias.numel() > 0;
  if (have_bias) dbias_all = Tensor<T>({nh * pph});

  for (int64_t h = 0; h < nh; ++h) {
    const int64_t c0 = h * dh;
    const Tensor<T>& g = out.gate[h].g;

    Tensor<T> dg({n, pph});
    Tensor<T> dvbar({pph, dh});
    std::vector<T> dw(static_cast<size_t>(pph), T(0));
    std::vector<T> dr(static_cast<size_t>(dh));

    for (int64_t t = 0; t < n; ++t) {
      const T* du = dmixed.row(t) + c0;
      const T den = cache.den.at(t, h);
      const T m = out.mask.at(t, h);
      const T* numrow = cache.num.row(t) + c0;

      // mixed = m * r with r = num/den (0 when guarded)
      T dm = T(0);
      if (den >= static_cast<T>(kDenEps)) {
        const T invden = T(1) / den;
        for (int64_t c = 0; c < dh; ++c) {
          const T r = numrow[c] * invden;
          dm += du[c] * r;
          dr[static_cast<size_t>(c)] = m * du[c];
        }
        // num/den quotient
        T dden = T(0);
        for (int64_t c = 0; c < dh; ++c) {
          const T dn = dr[static_cast<size_t>(c)] * invden;
          dden -= dn * numrow[c] * invden;
          dr[static_cast<size_t>(c)] = dn;  // now holds dnum_c
        }
        for (int64_t pu = 0; pu < pph; ++pu) {
          const T gv = g.at(t, pu);
          const T wp = cache.w.at(h, pu);
          const T ap = p.amp.at(h, pu);
          const T* vb = &out.vbar.at(h, pu, 0);
          T vdot = T(0);
          for (int64_t c = 0; c < dh; ++c) vdot += dr[static_cast<size_t>(c)] * vb[c];
          dg.at(t, pu) += wp * ap * vdot + wp * dden;
          dw[static_cast<size_t>(pu)] += gv * (ap * vdot + dden);
          grads->amp.at(h, pu) += wp * gv * vdot;
          kern::table<T>().axpy(wp * gv * ap, dr.data(), dvbar.row(pu), dh);
        }
      }
      // mask: m = 1 - exp(-sum_p g), dm/dg_p = 1 - m
      const T dsumg = dm * (T(1) - m);
      if (dsumg != T(0))
        for (int64_t pu = 0; pu < pph; ++pu) dg.at(t, pu) += dsumg;
    }

    // pulse weights: w = softmax(wlogit)
    {
      T inner = T(0);
      for (int64_t pu = 0; pu < pph; ++pu) inner += cache.w.at(h, pu) * dw[static_cast<size_t>(pu)];
      for (int64_t pu = 0; pu < pph; ++pu)
        grads->wlogit.at(h, pu) += cache.w.at(h, pu) * (dw[static_cast<size_t>(pu)] - inner);
    }

    // summaries: vbar = sum_t g v / sum_t g (active pulses only)
    for (int64_t pu = 0; pu < pph; ++pu) {
      if (!cache.active[static_cast<size_t>(h * pph + pu)]) continue;
      const T invs = T(1) / cache.sump.at(h, pu);
      const T* vb = &out.vbar.at(h, pu, 0);
      const T* dvb = dvbar.row(pu);
      for (int64_t t = 0; t < n; ++t) {
        const T gv = g.at(t, pu);
        const T* vrow = cache.v.row(t) + c0;
        T acc = T(0);
        for (int64_t c = 0; c < dh; ++c) acc += dvb[c] * (vrow[c] - vb[c]);
        dg.at(t, pu) += acc * invs;
        kern::table<T>().axpy(gv * invs, dvb, dv.row(t) + c0, dh);
      }
    }

    // through the gate functions
    Tensor<T> xh = slice_cols(x, c0, dh);
    Tensor<T> dxh({n, dh});
    Tensor<T> dbias_h;
    if (have_bias) dbias_h = Tensor<T>({pph});
    gates::gates_backward(xh, p.head_gates[h], p.tau, out.gate[h], cache.gate_caches[h], dg,
                          &grads->head_gates[h], &dxh, have_bias ? &dbias_h : nullptr);
    if (dx)
      for (int64_t t = 0; t < n; ++t) {
        const T* src = dxh.row(t);
        T* dst = dx->row(t) + c0;
        for (int64_t c = 0; c < dh; ++c) dst[c] += src[c];
      }
    if (have_bias)
      for (int64_t pu = 0; pu < pph; ++pu) dbias_all.at(h * pph + pu) = dbias_h.at(pu);
  }

  // value projection: v = x wv^T
  {
    Tensor<T> dwv = ops::matmul_tn(dv, x);
    for (int64_t i = 0; i < dwv.numel(); ++i) grads->wv.at(i) += dwv.at(i);
    Tensor<T> dxv = ops::matmul(dv, p.wv);
    if (dx)
      for (int64_t i = 0; i < dxv.numel(); ++i) dx->at(i) += dxv.at(i);
  }

  // cross-layer projection; the previous layer's gate mean is treated as a
  // constant input.
  if (have_bias && prev_gate_mean != nullptr && p.xproj.numel() > 0) {
    for (int64_t i = 0; i < p.xproj.dim(0); ++i)
      for (int64_t j = 0; j < p.xproj.dim(1); ++j)
        grads->xproj.at(i, j) += dbias_all.at(i) * prev_gate_mean->at(j);
  }
}

template <typename T>
LpaGradients<T> lpa_gradients(const Tensor<T>& x, const LpaParams<T>& p, const Tensor<T>& upstream,
                              const Tensor<T>* prev_gate_mean) {
  LpaOutput<T> out;
  LpaCache<T> cache;
  lpa_forward(x, p, &out, &cache, prev_gate_mean);
  LpaGradients<T> gr;
  gr.params = zeros_like(p);
  gr.x = lpa::zeros_like(x);
  lpa_backward(x, p, out, cache, upstream, &gr.params, &gr.x, prev_gate_mean);
  return gr;
}

template <typename T>
LpaParams<T> zeros_like(const LpaParams<T>& p) {
  LpaParams<T> g;
  g.d = p.d;
  g.heads = p.heads;
  g.tau = p.tau;
  g.head_gates.reserve(p.head_gates.size());
  for (const auto& hg : p.head_gates) g.head_gates.push_back(gates::zeros_like(hg));
  g.wlogit = lpa::zeros_like(p.wlogit);
  g.amp = lpa::zeros_like(p.amp);
  g.wv = lpa::zeros_like(p.wv);
  g.wo = lpa::zeros_like(p.wo);
  g.xproj = lpa::zeros_like(p.xproj);
  return g;
}

#define LPA_MIXER_INSTANTIATE(T)                                                               \
  template Tensor<T> pulse_summary<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                      std::vector<uint8_t>*);                                  \
  template void lpa_forward<T>(const Tensor<T>&, const LpaParams<T>&, LpaOutput<T>*,          \
                               LpaCache<T>*, const Tensor<T>*);                               \
  template void lpa_backward<T>(const Tensor<T>&, const LpaParams<T>&, const LpaOutput<T>&,   \
                                const LpaCache<T>&, const Tensor<T>&, LpaParams<T>*,          \
                                Tensor<T>*, const Tensor<T>*);                                \
  template LpaGradients<T> lpa_gradients<T>(const Tensor<T>&, const LpaParams<T>&,            \
                                            const Tensor<T>&, const Tensor<T>*);              \
  template LpaParams<T> zeros_like<T>(const LpaParams<T>&);

LPA_MIXER_INSTANTIATE(float)
LPA_MIXER_INSTANTIATE(double)

}  // namespace lpa::mixer
