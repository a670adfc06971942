#include "lpa/gates.hpp"

#include <cmath>

namespace lpa::gates {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;
constexpr double kLn2 = 0.69314718055994530941723212145818;
}  // namespace

const char* family_name(GateFamily f) {
  switch (f) {
    case GateFamily::aperiodic: return "aperiodic";
    case GateFamily::periodic: return "periodic";
    case GateFamily::positional: return "positional";
  }
  return "?";
}

template <typename T>
Tensor<T> predict_hidden(const Tensor<T>& x, const PredictorParams<T>& p,
                         PredictorCache<T>* cache) {
  check(x.rank() == 2, "predict_hidden expects (n, d) input");
  const int64_t d = x.dim(1);
  check(d % 2 == 0, "predict_hidden requires an even channel count");
  check(p.w1.rank() == 2 && p.w1.dim(0) == d && p.w1.dim(1) == d, "predictor w1 must be (d, d)");
  check(p.w2.rank() == 2 && p.w2.dim(0) == d / 2 && p.w2.dim(1) == d,
        "predictor w2 must be (d/2, d)");

  Tensor<T> u = ops::causal_dwconv(x, p.dw);
  Tensor<T> z1 = ops::matmul_nt(u, p.w1);
  for (int64_t t = 0; t < z1.dim(0); ++t) {
    T* row = z1.row(t);
    for (int64_t c = 0; c < d; ++c) row[c] += p.b1.at(c);
  }
  Tensor<T> a1 = ops::gelu_t(z1);
  Tensor<T> h = ops::matmul_nt(a1, p.w2);
  for (int64_t t = 0; t < h.dim(0); ++t) {
    T* row = h.row(t);
    for (int64_t c = 0; c < d / 2; ++c) row[c] += p.b2.at(c);
  }
  if (cache) {
    cache->u = std::move(u);
    cache->z1 = std::move(z1);
    cache->a1 = std::move(a1);
    cache->h = h;
  }
  return h;
}

namespace {

// Shared implementation so the standalone ops and evaluate_gates produce
// identical values from identical inputs.
template <typename T>
void aperiodic_from_hidden(const Tensor<T>& h, const AperiodicParams<T>& p, T tau, const T* bias,
                           Tensor<T>* gcols, int64_t gcol0, int64_t gstride, Tensor<T>* center,
                           Tensor<T>* halfwidth, Tensor<T>* alpha, Tensor<T>* zw,
                           Tensor<T>* hbar) {
  const int64_t n = h.dim(0);
  const int64_t d2 = h.dim(1);
  const int64_t pa = p.pulses();
  check(p.q.dim(1) == d2, "aperiodic query width must match hidden width");

  std::vector<T> scores(static_cast<size_t>(n));
  for (int64_t pu = 0; pu < pa; ++pu) {
    const T* qv = p.q.row(pu);
    for (int64_t t = 0; t < n; ++t)
      scores[static_cast<size_t>(t)] = kern::table<T>().dot(h.row(t), qv, d2) / tau;
    T* arow = alpha->row(pu);
    kern::table<T>().softmax_row(scores.data(), arow, n, T(1));

    T c = T(0);
    for (int64_t t = 0; t < n; ++t) c += static_cast<T>(t) * arow[t];
    T* hb = hbar->row(pu);
    for (int64_t k = 0; k < d2; ++k) hb[k] = T(0);
    for (int64_t t = 0; t < n; ++t) kern::table<T>().axpy(arow[t], h.row(t), hb, d2);
    const T z = kern::table<T>().dot(p.fw.ptr(), hb, d2) + p.fb.at(0);
    const T delta = ops::softplus(z);
    center->at(pu) = c;
    halfwidth->at(pu) = delta;
    zw->at(pu) = z;

    const T beta = bias ? bias[pu] : T(0);
    for (int64_t t = 0; t < n; ++t) {
      const T a = (static_cast<T>(t) - c + delta + beta) / tau;
      const T b = (c + delta - static_cast<T>(t) + beta) / tau;
      gcols->at(t * gstride + gcol0 + pu) = ops::sigmoid(a) * ops::sigmoid(b);
    }
  }
}

template <typename T>
void periodic_into(const PeriodicParams<T>& p, int64_t n, T tau, const T* bias, Tensor<T>* gcols,
                   int64_t gcol0, int64_t gstride, Tensor<T>* period, Tensor<T>* duty) {
  const int64_t pp = p.pulses();
  for (int64_t pu = 0; pu < pp; ++pu) {
    const T tp = period_of(p.rho.at(pu));
    const T dc = duty_of(p.zeta.at(pu));
    if (period) period->at(pu) = tp;
    if (duty) duty->at(pu) = dc;
    const T phase = p.phi.at(pu);
    const T cth = std::cos(static_cast<T>(kPi) * dc);
    const T beta = bias ? bias[pu] : T(0);
    for (int64_t t = 0; t < n; ++t) {
      const T theta = static_cast<T>(kTwoPi) * static_cast<T>(t) / tp - phase;
      gcols->at(t * gstride + gcol0 + pu) = ops::sigmoid((std::cos(theta) - cth + beta) / tau);
    }
  }
}

template <typename T>
void positional_into(const PositionalParams<T>& p, int64_t n, T tau, const T* bias,
                     Tensor<T>* gcols, int64_t gcol0, int64_t gstride) {
  const int64_t pq = p.pulses();
  const int64_t kb = p.bases();
  check(kb >= 1 || pq == 0, "positional gate needs at least one basis function");
  for (int64_t pu = 0; pu < pq; ++pu) {
    const T* ar = p.a.row(pu);
    const T* br = p.b.row(pu);
    const T beta = bias ? bias[pu] : T(0);
    for (int64_t t = 0; t < n; ++t) {
      const T that = n > 1 ? static_cast<T>(t) / static_cast<T>(n - 1) : T(0);
      T s = p.bias.at(pu) + beta;
      for (int64_t k = 0; k < kb; ++k) {
        const T w = static_cast<T>(kTwoPi) * static_cast<T>(k + 1) * that;
        s += ar[k] * std::sin(w) + br[k] * std::cos(w);
      }
      gcols->at(t * gstride + gcol0 + pu) = ops::sigmoid(s / tau);
    }
  }
}

}  // namespace

template <typename T>
AperiodicResult<T> aperiodic_gate(const Tensor<T>& x, const AperiodicParams<T>& p, T tau,
                                  const T* bias) {
  check(tau > T(0), "gate temperature must be positive");
  check(x.dim(0) >= 1, "aperiodic_gate needs at least one position");
  Tensor<T> h = predict_hidden(x, p.pred);
  const int64_t n = x.dim(0);
  const int64_t pa = p.pulses();
  AperiodicResult<T> r;
  r.g = Tensor<T>({n, pa});
  r.center = Tensor<T>({pa});
  r.halfwidth = Tensor<T>({pa});
  Tensor<T> alpha({pa, n}), zw({pa}), hbar({pa, h.dim(1)});
  aperiodic_from_hidden(h, p, tau, bias, &r.g, 0, pa, &r.center, &r.halfwidth, &alpha, &zw,
                        &hbar);
  return r;
}

template <typename T>
Tensor<T> periodic_gate(const PeriodicParams<T>& p, int64_t n, T tau, const T* bias) {
  check(tau > T(0), "gate temperature must be positive");
  Tensor<T> g({n, p.pulses()});
  periodic_into(p, n, tau, bias, &g, 0, p.pulses(), static_cast<Tensor<T>*>(nullptr),
                static_cast<Tensor<T>*>(nullptr));
  return g;
}

template <typename T>
Tensor<T> positional_gate(const PositionalParams<T>& p, int64_t n, T tau, const T* bias) {
  check(tau > T(0), "gate temperature must be positive");
  Tensor<T> g({n, p.pulses()});
  positional_into(p, n, tau, bias, &g, 0, p.pulses());
  return g;
}

template <typename T>
T periodic_gate_at(const PeriodicParams<T>& p, int64_t pulse, T t, T tau, T bias) {
  const T tp = period_of(p.rho.at(pulse));
  const T dc = duty_of(p.zeta.at(pulse));
  const T theta = static_cast<T>(kTwoPi) * t / tp - p.phi.at(pulse);
  return ops::sigmoid((std::cos(theta) - std::cos(static_cast<T>(kPi) * dc) + bias) / tau);
}

template <typename T>
Tensor<T> cross_layer_bias(const Tensor<T>& prev_gate_mean, const Tensor<T>& proj) {
  check(proj.rank() == 2, "cross-layer projection must be a matrix");
  check(proj.dim(1) == prev_gate_mean.numel(),
        "cross-layer projection width must match previous pulse count");
  Tensor<T> bias({proj.dim(0)});
  for (int64_t i = 0; i < proj.dim(0); ++i)
    bias.at(i) = kern::table<T>().dot(proj.row(i), prev_gate_mean.ptr(), proj.dim(1));
  return bias;
}

template <typename T>
void evaluate_gates(const Tensor<T>& x, const GateParams<T>& p, T tau, const Tensor<T>* bias,
                    GateMatrix<T>* out, GateEvalCache<T>* cache) {
  check(tau > T(0), "gate temperature must be positive");
  const int64_t n = x.dim(0);
  const int64_t pa = p.ap.pulses(), pp = p.per.pulses(), pq = p.pos.pulses();
  const int64_t ptot = pa + pp + pq;
  if (bias) check(bias->numel() == ptot, "gate bias length must equal pulse count");

  out->g = Tensor<T>({n, ptot});
  out->tau = tau;
  out->family.clear();
  for (int64_t i = 0; i < pa; ++i) out->family.push_back(GateFamily::aperiodic);
  for (int64_t i = 0; i < pp; ++i) out->family.push_back(GateFamily::periodic);
  for (int64_t i = 0; i < pq; ++i) out->family.push_back(GateFamily::positional);

  GateEvalCache<T> local;
  GateEvalCache<T>& cc = cache ? *cache : local;
  cc.alpha = Tensor<T>({pa, n});
  cc.center = Tensor<T>({pa});
  cc.halfwidth = Tensor<T>({pa});
  cc.zw = Tensor<T>({pa});
  cc.period = Tensor<T>({pp});
  cc.duty = Tensor<T>({pp});
  cc.bias = bias ? *bias : Tensor<T>();

  if (n == 0) return;

  if (pa > 0) {
    Tensor<T> h = predict_hidden(x, p.ap.pred, &cc.pred);
    cc.hbar = Tensor<T>({pa, h.dim(1)});
    aperiodic_from_hidden(h, p.ap, tau, bias ? bias->ptr() : nullptr, &out->g, 0, ptot,
                          &cc.center, &cc.halfwidth, &cc.alpha, &cc.zw, &cc.hbar);
  }
  periodic_into(p.per, n, tau, bias ? bias->ptr() + pa : nullptr, &out->g, pa, ptot, &cc.period,
                &cc.duty);
  positional_into(p.pos, n, tau, bias ? bias->ptr() + pa + pp : nullptr, &out->g, pa + pp, ptot);
}

template <typename T>
void gates_backward(const Tensor<T>& x, const GateParams<T>& p, T tau, const GateMatrix<T>& gm,
                    const GateEvalCache<T>& cache, const Tensor<T>& dg, GateParams<T>* grads,
                    Tensor<T>* dx, Tensor<T>* dbias) {
  const int64_t n = x.dim(0);
  const int64_t pa = p.ap.pulses(), pp = p.per.pulses(), pq = p.pos.pulses();
  const int64_t ptot = pa + pp + pq;
  if (n == 0) return;
  const bool have_bias = cache.bias.numel() == ptot;

  // Aperiodic block: through the sigmoid product into center/width, then the
  // shared softmax and the predictor.
  if (pa > 0) {
    const Tensor<T>& h = cache.pred.h;
    const int64_t d2 = h.dim(1);
    Tensor<T> dh({n, d2});

    for (int64_t pu = 0; pu < pa; ++pu) {
      const T c = cache.center.at(pu);
      const T delta = cache.halfwidth.at(pu);
      const T beta = have_bias ? cache.bias.at(pu) : T(0);
      T dc = T(0), ddelta = T(0), dbeta = T(0);
      for (int64_t t = 0; t < n; ++t) {
        const T gd = dg.at(t, pu);
        if (gd == T(0)) continue;
        const T a = (static_cast<T>(t) - c + delta + beta) / tau;
        const T b = (c + delta - static_cast<T>(t) + beta) / tau;
        const T sa = ops::sigmoid(a);
        const T sb = ops::sigmoid(b);
        const T da = gd * sb * sa * (T(1) - sa);
        const T db = gd * sa * sb * (T(1) - sb);
        dc += (-da + db) / tau;
        ddelta += (da + db) / tau;
        dbeta += (da + db) / tau;
      }
      if (dbias) dbias->at(pu) += dbeta;

      // delta = softplus(zw), zw = fw . hbar + fb
      const T dzw = ddelta * ops::sigmoid(cache.zw.at(pu));
      const T* hb = cache.hbar.row(pu);
      for (int64_t k = 0; k < d2; ++k) grads->ap.fw.at(k) += dzw * hb[k];
      grads->ap.fb.at(0) += dzw;

      // dhbar = dzw * fw; alpha gets contributions from both c and hbar.
      const T* arow = cache.alpha.row(pu);
      std::vector<T> dalpha(static_cast<size_t>(n));
      for (int64_t t = 0; t < n; ++t) {
        const T hdot = dzw * kern::table<T>().dot(p.ap.fw.ptr(), h.row(t), d2);
        dalpha[static_cast<size_t>(t)] = static_cast<T>(t) * dc + hdot;
      }
      // dh from hbar = sum_t alpha_t h_t
      for (int64_t t = 0; t < n; ++t)
        kern::table<T>().axpy(arow[t] * dzw, p.ap.fw.ptr(), dh.row(t), d2);

      // softmax backward: ds = alpha .* (dalpha - sum(alpha .* dalpha))
      T inner = T(0);
      for (int64_t t = 0; t < n; ++t) inner += arow[t] * dalpha[static_cast<size_t>(t)];
      for (int64_t t = 0; t < n; ++t) {
        const T ds = arow[t] * (dalpha[static_cast<size_t>(t)] - inner);
        // s_t = h_t . q / tau
        kern::table<T>().axpy(ds / tau, h.row(t), grads->ap.q.row(pu), d2);
        kern::table<T>().axpy(ds / tau, p.ap.q.row(pu), dh.row(t), d2);
      }
    }

    // Predictor backward: h = a1 W2^T + b2, a1 = gelu(z1), z1 = u W1^T + b1,
    // u = causal_dwconv(x, dw).
    const PredictorParams<T>& pr = p.ap.pred;
    const int64_t d = x.dim(1);
    Tensor<T> da1 = ops::matmul(dh, pr.w2);
    {
      Tensor<T> dw2 = ops::matmul_tn(dh, cache.pred.a1);
      for (int64_t i = 0; i < dw2.numel(); ++i) grads->ap.pred.w2.at(i) += dw2.at(i);
      for (int64_t t = 0; t < n; ++t)
        for (int64_t c = 0; c < d2; ++c) grads->ap.pred.b2.at(c) += dh.at(t, c);
    }
    Tensor<T> dz1({n, d});
    for (int64_t t = 0; t < n; ++t)
      for (int64_t c = 0; c < d; ++c)
        dz1.at(t, c) = da1.at(t, c) * ops::gelu_grad(cache.pred.z1.at(t, c));
    {
      Tensor<T> dw1 = ops::matmul_tn(dz1, cache.pred.u);
      for (int64_t i = 0; i < dw1.numel(); ++i) grads->ap.pred.w1.at(i) += dw1.at(i);
      for (int64_t t = 0; t < n; ++t)
        for (int64_t c = 0; c < d; ++c) grads->ap.pred.b1.at(c) += dz1.at(t, c);
    }
    Tensor<T> du = ops::matmul(dz1, pr.w1);
    // dwconv backward
    const int64_t k = pr.dw.dim(0);
    for (int64_t t = 0; t < n; ++t) {
      const T* durow = du.row(t);
      for (int64_t j = 0; j < k; ++j) {
        const int64_t src = t - k + 1 + j;
        if (src < 0) continue;
        const T* xrow = x.row(src);
        const T* krow = pr.dw.row(j);
        T* gk = grads->ap.pred.dw.row(j);
        T* dxr = dx ? dx->row(src) : nullptr;
        for (int64_t c = 0; c < d; ++c) {
          gk[c] += durow[c] * xrow[c];
          if (dxr) dxr[c] += durow[c] * krow[c];
        }
      }
    }
  }

  // Periodic block.
  for (int64_t pu = 0; pu < pp; ++pu) {
    const int64_t col = pa + pu;
    const T tp = cache.period.at(pu);
    const T dc = cache.duty.at(pu);
    const T phase = p.per.phi.at(pu);
    T dT = T(0), dphi = T(0), dduty = T(0), dbeta = T(0);
    for (int64_t t = 0; t < n; ++t) {
      const T gd = dg.at(t, col);
      if (gd == T(0)) continue;
      const T g = gm.g.at(t, col);
      const T dpre = gd * g * (T(1) - g);
      const T theta = static_cast<T>(kTwoPi) * static_cast<T>(t) / tp - phase;
      const T sth = std::sin(theta);
      dphi += dpre * sth / tau;
      dT += dpre * sth * static_cast<T>(kTwoPi) * static_cast<T>(t) / (tp * tp * tau);
      dduty += dpre * static_cast<T>(kPi) * std::sin(static_cast<T>(kPi) * dc) / tau;
      dbeta += dpre / tau;
    }
    grads->per.phi.at(pu) += dphi;
    // T = 2^(softplus(rho)+2): dT/drho = T ln2 sigmoid(rho)
    grads->per.rho.at(pu) += dT * tp * static_cast<T>(kLn2) * ops::sigmoid(p.per.rho.at(pu));
    grads->per.zeta.at(pu) += dduty * dc * (T(1) - dc);
    if (dbias) dbias->at(pa + pu) += dbeta;
  }

  // Positional block.
  const int64_t kb = p.pos.bases();
  for (int64_t pu = 0; pu < pq; ++pu) {
    const int64_t col = pa + pp + pu;
    T dbp = T(0);
    for (int64_t t = 0; t < n; ++t) {
      const T gd = dg.at(t, col);
      if (gd == T(0)) continue;
      const T g = gm.g.at(t, col);
      const T dpre = gd * g * (T(1) - g) / tau;
      const T that = n > 1 ? static_cast<T>(t) / static_cast<T>(n - 1) : T(0);
      for (int64_t k = 0; k < kb; ++k) {
        const T w = static_cast<T>(kTwoPi) * static_cast<T>(k + 1) * that;
        grads->pos.a.at(pu, k) += dpre * std::sin(w);
        grads->pos.b.at(pu, k) += dpre * std::cos(w);
      }
      dbp += dpre;
    }
    grads->pos.bias.at(pu) += dbp;
    if (dbias) dbias->at(col) += dbp;
  }
}

template <typename T>
GateParams<T> zeros_like(const GateParams<T>& p) {
  GateParams<T> g;
  g.ap.pred.dw = lpa::zeros_like(p.ap.pred.dw);
  g.ap.pred.w1 = lpa::zeros_like(p.ap.pred.w1);
  g.ap.pred.b1 = lpa::zeros_like(p.ap.pred.b1);
  g.ap.pred.w2 = lpa::zeros_like(p.ap.pred.w2);
  g.ap.pred.b2 = lpa::zeros_like(p.ap.pred.b2);
  g.ap.q = lpa::zeros_like(p.ap.q);
  g.ap.fw = lpa::zeros_like(p.ap.fw);
  g.ap.fb = lpa::zeros_like(p.ap.fb);
  g.per.rho = lpa::zeros_like(p.per.rho);
  g.per.phi = lpa::zeros_like(p.per.phi);
  g.per.zeta = lpa::zeros_like(p.per.zeta);
  g.pos.a = lpa::zeros_like(p.pos.a);
  g.pos.b = lpa::zeros_like(p.pos.b);
  g.pos.bias = lpa::zeros_like(p.pos.bias);
  return g;
}

#define LPA_GATES_INSTANTIATE(T)                                                             \
  template Tensor<T> predict_hidden<T>(const Tensor<T>&, const PredictorParams<T>&,         \
                                       PredictorCache<T>*);                                 \
  template AperiodicResult<T> aperiodic_gate<T>(const Tensor<T>&, const AperiodicParams<T>&, \
                                                T, const T*);                               \
  template Tensor<T> periodic_gate<T>(const PeriodicParams<T>&, int64_t, T, const T*);      \
  template Tensor<T> positional_gate<T>(const PositionalParams<T>&, int64_t, T, const T*);  \
  template T periodic_gate_at<T>(const PeriodicParams<T>&, int64_t, T, T, T);               \
  template Tensor<T> cross_layer_bias<T>(const Tensor<T>&, const Tensor<T>&);               \
  template void evaluate_gates<T>(const Tensor<T>&, const GateParams<T>&, T,                \
                                  const Tensor<T>*, GateMatrix<T>*, GateEvalCache<T>*);     \
  template void gates_backward<T>(const Tensor<T>&, const GateParams<T>&, T,                \
                                  const GateMatrix<T>&, const GateEvalCache<T>&,            \
                                  const Tensor<T>&, GateParams<T>*, Tensor<T>*, Tensor<T>*); \
  template GateParams<T> zeros_like<T>(const GateParams<T>&);

LPA_GATES_INSTANTIATE(float)
LPA_GATES_INSTANTIATE(double)

}  // namespace lpa::gates
