#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "lpa/gates.hpp"
#include "lpa/rng.hpp"
#include "test_util.hpp"

using lpa::Tensor64;
namespace gates = lpa::gates;
namespace ops = lpa::ops;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

gates::PredictorParams<double> random_predictor(lpa::Rng& rng, int64_t d, int64_t k = 5) {
  gates::PredictorParams<double> p;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  p.dw = testutil::random_tensor<double>(rng, {k, d}, -0.5, 0.5);
  p.w1 = testutil::random_tensor<double>(rng, {d, d}, -s, s);
  p.b1 = testutil::random_tensor<double>(rng, {d}, -0.1, 0.1);
  p.w2 = testutil::random_tensor<double>(rng, {d / 2, d}, -s, s);
  p.b2 = testutil::random_tensor<double>(rng, {d / 2}, -0.1, 0.1);
  return p;
}

gates::AperiodicParams<double> random_aperiodic(lpa::Rng& rng, int64_t d, int64_t pulses) {
  gates::AperiodicParams<double> p;
  p.pred = random_predictor(rng, d);
  p.q = testutil::random_tensor<double>(rng, {pulses, d / 2});
  p.fw = testutil::random_tensor<double>(rng, {d / 2}, -0.3, 0.3);
  p.fb = Tensor64({1});
  p.fb.at(0) = rng.uniform(0.5, 2.0);
  return p;
}

}  // namespace

TEST_CASE("predict_hidden: zeros, causality, composition oracle") {
  lpa::Rng rng(41);
  const int64_t n = 10, d = 6;

  // zero input and zero biases give zero hidden state
  {
    auto p = random_predictor(rng, d);
    p.b1.fill(0.0);
    p.b2.fill(0.0);
    Tensor64 x({n, d}, 0.0);
    auto h = gates::predict_hidden(x, p);
    CHECK(max_abs_diff(h, lpa::zeros_like(h)) == 0.0);
  }

  auto p = random_predictor(rng, d);
  auto x = random_tensor<double>(rng, {n, d});
  auto h = gates::predict_hidden(x, p);

  // causality: perturbing position t leaves h[<t] unchanged
  Tensor64 xp = x;
  xp.at(4, 2) += 2.0;
  auto hp = gates::predict_hidden(xp, p);
  for (int64_t t = 0; t < 4; ++t)
    for (int64_t c = 0; c < d / 2; ++c) CHECK(hp.at(t, c) == h.at(t, c));

  // composition oracle: dwconv -> linear -> gelu -> linear, naive loops
  Tensor64 ref({n, d / 2});
  for (int64_t t = 0; t < n; ++t) {
    std::vector<double> u(static_cast<size_t>(d), 0.0);
    for (int64_t j = 0; j < 5; ++j) {
      const int64_t src = t - 5 + 1 + j;
      if (src < 0) continue;
      for (int64_t c = 0; c < d; ++c)
        u[static_cast<size_t>(c)] += p.dw.at(j, c) * x.at(src, c);
    }
    std::vector<double> a1(static_cast<size_t>(d));
    for (int64_t o = 0; o < d; ++o) {
      double z = p.b1.at(o);
      for (int64_t c = 0; c < d; ++c) z += p.w1.at(o, c) * u[static_cast<size_t>(c)];
      const double g = 0.5 * z * (1.0 + std::tanh(0.7978845608028654 * (z + 0.044715 * z * z * z)));
      a1[static_cast<size_t>(o)] = g;
    }
    for (int64_t o = 0; o < d / 2; ++o) {
      double z = p.b2.at(o);
      for (int64_t c = 0; c < d; ++c) z += p.w2.at(o, c) * a1[static_cast<size_t>(c)];
      ref.at(t, o) = z;
    }
  }
  CHECK(max_abs_diff(h, ref) < 1e-10);

  Tensor64 odd({n, 5});
  auto podd = random_predictor(rng, d);
  CHECK_THROWS(gates::predict_hidden(odd, podd));
}

TEST_CASE("aperiodic gate: closed form at center, boundary limits, symmetric center") {
  lpa::Rng rng(43);
  const int64_t n = 9, d = 4;
  gates::AperiodicParams<double> p = random_aperiodic(rng, d, 1);
  // delta kernel at the last tap makes u = x, so constant x gives uniform h
  p.pred.dw.fill(0.0);
  for (int64_t c = 0; c < d; ++c) p.pred.dw.at(4, c) = 1.0;
  // pin the half-width at exactly 2
  p.fw.fill(0.0);
  p.fb.at(0) = ops::softplus_inv(2.0);

  Tensor64 x({n, d}, 0.37);  // identical tokens
  auto r = gates::aperiodic_gate(x, p, 1.0);
  CHECK(r.center.at(0) == doctest::Approx((n - 1) / 2.0).epsilon(1e-12));
  CHECK(r.halfwidth.at(0) == doctest::Approx(2.0).epsilon(1e-12));
  const double s2 = ops::sigmoid(2.0);
  CHECK(r.g.at(4, 0) == doctest::Approx(s2 * s2).epsilon(1e-9));
  CHECK(r.g.at(4, 0) == doctest::Approx(0.77580).epsilon(1e-4));

  // low temperature: boundary 0.5, inside 1, outside 0 (c=4, delta=2)
  auto rc = gates::aperiodic_gate(x, p, 1e-3);
  CHECK(rc.g.at(2, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(rc.g.at(6, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(rc.g.at(4, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rc.g.at(0, 0) == doctest::Approx(0.0).epsilon(1e-9));

  CHECK_THROWS(gates::aperiodic_gate(x, p, 0.0));
}

TEST_CASE("aperiodic invariants: center range and positive width") {
  lpa::Rng rng(47);
  for (int rep = 0; rep < 25; ++rep) {
    const int64_t n = rng.randint(1, 24);
    const int64_t d = 6;
    auto p = random_aperiodic(rng, d, 3);
    auto x = random_tensor<double>(rng, {n, d}, -2.0, 2.0);
    auto r = gates::aperiodic_gate(x, p, rng.uniform(0.1, 3.0));
    for (int64_t pu = 0; pu < 3; ++pu) {
      CHECK(r.center.at(pu) >= 0.0);
      CHECK(r.center.at(pu) <= static_cast<double>(n - 1));
      CHECK(r.halfwidth.at(pu) > 0.0);
    }
    for (int64_t i = 0; i < r.g.numel(); ++i) {
      CHECK(r.g.at(i) >= 0.0);
      CHECK(r.g.at(i) <= 1.0);
    }
  }
}

TEST_CASE("periodic gate: duty limits and the derived on-set") {
  gates::PeriodicParams<double> p;
  p.rho = Tensor64({1});
  p.phi = Tensor64({1}, 0.0);
  p.zeta = Tensor64({1});

  // T = 8 => softplus(rho) = 1 => rho = softplus_inv(1)
  p.rho.at(0) = ops::softplus_inv(1.0);
  CHECK(gates::period_of(p.rho.at(0)) == doctest::Approx(8.0).epsilon(1e-12));

  // duty -> 1: gate at least 1/2 everywhere, ~1 at low tau off the troughs
  p.zeta.at(0) = 40.0;
  auto gful = gates::periodic_gate(p, 32, 1.0);
  for (int64_t i = 0; i < gful.numel(); ++i) CHECK(gful.at(i) >= 0.5);
  auto gful_cold = gates::periodic_gate(p, 32, 1e-3);
  int64_t on = 0;
  for (int64_t i = 0; i < gful_cold.numel(); ++i)
    if (gful_cold.at(i) > 0.99) ++on;
  CHECK(on >= 32 - (32 / 8));

  // d = 0.5, phi = 0, T = 8, n = 16, tau = 1e-3: on-set {0,1,7,8,9,15}.
  // Membership uses a 1e-9 band so that exact cos boundaries stay excluded.
  p.zeta.at(0) = 0.0;
  auto g = gates::periodic_gate(p, 16, 1e-3);
  std::set<int64_t> got;
  for (int64_t t = 0; t < 16; ++t)
    if (g.at(t, 0) > 0.5 + 1e-9) got.insert(t);
  const std::set<int64_t> want = {0, 1, 7, 8, 9, 15};
  CHECK(got == want);
}

TEST_CASE("periodic gate: minimum period and exact T-periodicity in continuous t") {
  lpa::Rng rng(53);
  gates::PeriodicParams<double> p;
  p.rho = random_tensor<double>(rng, {5}, -8.0, 4.0);
  p.phi = random_tensor<double>(rng, {5}, 0.0, 6.28);
  p.zeta = random_tensor<double>(rng, {5}, -2.0, 2.0);
  for (int64_t pu = 0; pu < 5; ++pu) {
    CHECK(gates::period_of(p.rho.at(pu)) >= 4.0);
    const double tp = gates::period_of(p.rho.at(pu));
    for (int rep = 0; rep < 10; ++rep) {
      const double t = rng.uniform(0.0, 50.0);
      const double a = gates::periodic_gate_at(p, pu, t, 0.7);
      const double b = gates::periodic_gate_at(p, pu, t + tp, 0.7);
      CHECK(std::abs(a - b) < 1e-9);
    }
  }
}

TEST_CASE("positional gate: trivial settings and cos symmetry") {
  const int64_t n = 12, K = 8;
  gates::PositionalParams<double> p;
  p.a = Tensor64({1, K}, 0.0);
  p.b = Tensor64({1, K}, 0.0);
  p.bias = Tensor64({1}, 0.0);

  auto g0 = gates::positional_gate(p, n, 1.0);
  for (int64_t i = 0; i < g0.numel(); ++i) CHECK(g0.at(i) == doctest::Approx(0.5));

  p.bias.at(0) = 10.0;
  auto g1 = gates::positional_gate(p, n, 1.0);
  for (int64_t i = 0; i < g1.numel(); ++i) CHECK(g1.at(i) == doctest::Approx(1.0).epsilon(1e-4));

  // with sin coefficients zeroed the gate is symmetric under t -> n-1-t
  lpa::Rng rng(59);
  p.a.fill(0.0);
  rng.fill_uniform(p.b, -1.0, 1.0);
  p.bias.at(0) = rng.uniform(-0.5, 0.5);
  auto gs = gates::positional_gate(p, n, 0.7);
  for (int64_t t = 0; t < n; ++t)
    CHECK(gs.at(t, 0) == doctest::Approx(gs.at(n - 1 - t, 0)).epsilon(1e-10));

  // direct evaluation oracle with random full parameters
  rng.fill_uniform(p.a, -1.0, 1.0);
  rng.fill_uniform(p.b, -1.0, 1.0);
  const double tau = 0.9;
  auto gr = gates::positional_gate(p, n, tau);
  for (int64_t t = 0; t < n; ++t) {
    const double that = static_cast<double>(t) / static_cast<double>(n - 1);
    double s = p.bias.at(0);
    for (int64_t k = 1; k <= K; ++k) {
      s += p.a.at(0, k - 1) * std::sin(2 * M_PI * k * that);
      s += p.b.at(0, k - 1) * std::cos(2 * M_PI * k * that);
    }
    CHECK(gr.at(t, 0) == doctest::Approx(ops::sigmoid(s / tau)).epsilon(1e-12));
  }

  // n = 1 defines t_hat = 0 rather than failing
  auto g_one = gates::positional_gate(p, 1, 1.0);
  CHECK(g_one.numel() == 1);
}

TEST_CASE("cross-layer bias: zero projection, zero mean, positional equivalence") {
  lpa::Rng rng(61);
  Tensor64 proj({3, 4}, 0.0);
  auto mean = random_tensor<double>(rng, {4}, 0.0, 1.0);
  auto b = gates::cross_layer_bias(mean, proj);
  for (int64_t i = 0; i < 3; ++i) CHECK(b.at(i) == 0.0);

  rng.fill_uniform(proj, -1.0, 1.0);
  Tensor64 zero_mean({4}, 0.0);
  auto b2 = gates::cross_layer_bias(zero_mean, proj);
  for (int64_t i = 0; i < 3; ++i) CHECK(b2.at(i) == 0.0);

  Tensor64 wrong({5}, 0.0);
  CHECK_THROWS(gates::cross_layer_bias(wrong, proj));

  // a bias beta on a positional pulse equals shifting its bias parameter
  const int64_t n = 10, K = 4;
  gates::PositionalParams<double> p;
  p.a = random_tensor<double>(rng, {1, K});
  p.b = random_tensor<double>(rng, {1, K});
  p.bias = random_tensor<double>(rng, {1});
  const double beta = rng.uniform(-1.0, 1.0);
  auto with_bias = gates::positional_gate(p, n, 0.8, &beta);
  gates::PositionalParams<double> shifted = p;
  shifted.bias.at(0) += beta;
  auto with_shift = gates::positional_gate(shifted, n, 0.8);
  CHECK(max_abs_diff(with_bias, with_shift) < 1e-12);
}

TEST_CASE("gate ranges and monotone sharpening") {
  lpa::Rng rng(67);
  // all families stay in [0,1] for any finite parameters
  for (int rep = 0; rep < 10; ++rep) {
    gates::GateParams<double> gp;
    gp.ap = random_aperiodic(rng, 8, 2);
    gp.per.rho = random_tensor<double>(rng, {2}, -5.0, 5.0);
    gp.per.phi = random_tensor<double>(rng, {2}, -7.0, 7.0);
    gp.per.zeta = random_tensor<double>(rng, {2}, -6.0, 6.0);
    gp.pos.a = random_tensor<double>(rng, {2, 6}, -3.0, 3.0);
    gp.pos.b = random_tensor<double>(rng, {2, 6}, -3.0, 3.0);
    gp.pos.bias = random_tensor<double>(rng, {2}, -3.0, 3.0);
    auto x = random_tensor<double>(rng, {14, 8}, -2.0, 2.0);
    gates::GateMatrix<double> gm;
    gates::evaluate_gates<double>(x, gp, rng.uniform(0.05, 3.0), nullptr, &gm,
                          static_cast<gates::GateEvalCache<double>*>(nullptr));
    for (int64_t i = 0; i < gm.g.numel(); ++i) {
      CHECK(gm.g.at(i) >= 0.0);
      CHECK(gm.g.at(i) <= 1.0);
    }
  }

  // |sigmoid(z/tau2) - step(z)| <= |sigmoid(z/tau1) - step(z)| for tau2 < tau1
  for (int rep = 0; rep < 200; ++rep) {
    double z = rng.uniform(-4.0, 4.0);
    if (std::abs(z) < 1e-3) continue;
    double tau1 = rng.uniform(0.2, 3.0);
    double tau2 = rng.uniform(0.01, tau1);
    const double step = z > 0 ? 1.0 : 0.0;
    CHECK(std::abs(ops::sigmoid(z / tau2) - step) <= std::abs(ops::sigmoid(z / tau1) - step) + 1e-15);
  }
}

TEST_CASE("periodic and positional gates are content independent") {
  lpa::Rng rng(71);
  gates::GateParams<double> gp;
  gp.per.rho = random_tensor<double>(rng, {3}, -3.0, 3.0);
  gp.per.phi = random_tensor<double>(rng, {3});
  gp.per.zeta = random_tensor<double>(rng, {3});
  gp.pos.a = random_tensor<double>(rng, {3, 5});
  gp.pos.b = random_tensor<double>(rng, {3, 5});
  gp.pos.bias = random_tensor<double>(rng, {3});

  const int64_t n = 20;
  auto x1 = random_tensor<double>(rng, {n, 4});
  auto x2 = random_tensor<double>(rng, {n, 4});
  gates::GateMatrix<double> g1, g2;
  gates::evaluate_gates<double>(x1, gp, 0.8, nullptr, &g1, static_cast<gates::GateEvalCache<double>*>(nullptr));
  gates::evaluate_gates<double>(x2, gp, 0.8, nullptr, &g2, static_cast<gates::GateEvalCache<double>*>(nullptr));
  CHECK(max_abs_diff(g1.g, g2.g) == 0.0);
}
