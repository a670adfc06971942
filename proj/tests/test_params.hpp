#pragma once

#include "lpa/mixer.hpp"
#include "test_util.hpp"

namespace testutil {

template <typename T>
lpa::gates::GateParams<T> random_gates(lpa::Rng& rng, int64_t dh, int64_t pa, int64_t pp,
                                       int64_t pq, int64_t K) {
  lpa::gates::GateParams<T> g;
  const double s = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(dh, 1)));
  if (pa > 0) {
    g.ap.pred.dw = random_tensor<T>(rng, {5, dh}, -0.4, 0.4);
    g.ap.pred.w1 = random_tensor<T>(rng, {dh, dh}, -s, s);
    g.ap.pred.b1 = random_tensor<T>(rng, {dh}, -0.1, 0.1);
    g.ap.pred.w2 = random_tensor<T>(rng, {dh / 2, dh}, -s, s);
    g.ap.pred.b2 = random_tensor<T>(rng, {dh / 2}, -0.1, 0.1);
    g.ap.q = random_tensor<T>(rng, {pa, dh / 2}, -1.0, 1.0);
    g.ap.fw = random_tensor<T>(rng, {dh / 2}, -0.3, 0.3);
    g.ap.fb = lpa::Tensor<T>({1});
    g.ap.fb.at(0) = static_cast<T>(rng.uniform(0.5, 1.5));
  } else {
    g.ap.q = lpa::Tensor<T>({0, std::max<int64_t>(dh / 2, 1)});
  }
  g.per.rho = random_tensor<T>(rng, {pp}, -2.0, 3.0);
  g.per.phi = random_tensor<T>(rng, {pp}, 0.0, 6.2);
  g.per.zeta = random_tensor<T>(rng, {pp}, -1.5, 1.5);
  g.pos.a = random_tensor<T>(rng, {pq, K}, -1.0, 1.0);
  g.pos.b = random_tensor<T>(rng, {pq, K}, -1.0, 1.0);
  g.pos.bias = random_tensor<T>(rng, {pq}, -0.5, 0.5);
  return g;
}

template <typename T>
lpa::mixer::LpaParams<T> random_lpa(lpa::Rng& rng, int64_t d, int64_t heads, int64_t pa,
                                    int64_t pp, int64_t pq, double tau = 1.0, int64_t K = 4) {
  lpa::mixer::LpaParams<T> p;
  p.d = d;
  p.heads = heads;
  p.tau = static_cast<T>(tau);
  const int64_t dh = d / heads;
  for (int64_t h = 0; h < heads; ++h)
    p.head_gates.push_back(random_gates<T>(rng, dh, pa, pp, pq, K));
  const int64_t pph = pa + pp + pq;
  p.wlogit = random_tensor<T>(rng, {heads, pph}, -0.5, 0.5);
  p.amp = random_tensor<T>(rng, {heads, pph}, 0.5, 1.5);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  p.wv = random_tensor<T>(rng, {d, d}, -s, s);
  p.wo = random_tensor<T>(rng, {d, d}, -s, s);
  return p;
}

}  // namespace testutil
