#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "lpa/mixer.hpp"
#include "test_params.hpp"

using lpa::Tensor64;
namespace mixer = lpa::mixer;
namespace gates = lpa::gates;
namespace ops = lpa::ops;
using testutil::max_abs_diff;
using testutil::random_lpa;
using testutil::random_tensor;

namespace {

// Direct per-position evaluation of the gated-mean mix given the evaluated
// gate matrices: summaries, weighted mean, coverage mask, output projection.
Tensor64 brute_force_mix(const Tensor64& x, const mixer::LpaParams<double>& p,
                         const std::vector<gates::GateMatrix<double>>& gms) {
  const int64_t n = x.dim(0), d = p.d, H = p.heads, dh = d / H;
  const int64_t P = p.pulses_per_head();
  Tensor64 v({n, d});
  for (int64_t t = 0; t < n; ++t)
    for (int64_t i = 0; i < d; ++i) {
      double acc = 0;
      for (int64_t j = 0; j < d; ++j) acc += p.wv.at(i, j) * x.at(t, j);
      v.at(t, i) = acc;
    }
  Tensor64 mixed({n, d});
  for (int64_t h = 0; h < H; ++h) {
    const Tensor64& g = gms[static_cast<size_t>(h)].g;
    // pulse weights
    std::vector<double> w(static_cast<size_t>(P));
    double wsum = 0;
    for (int64_t pu = 0; pu < P; ++pu) wsum += std::exp(p.wlogit.at(h, pu));
    for (int64_t pu = 0; pu < P; ++pu)
      w[static_cast<size_t>(pu)] = std::exp(p.wlogit.at(h, pu)) / wsum;
    // summaries
    std::vector<std::vector<double>> vbar(static_cast<size_t>(P),
                                          std::vector<double>(static_cast<size_t>(dh), 0.0));
    for (int64_t pu = 0; pu < P; ++pu) {
      double s = 0;
      for (int64_t t = 0; t < n; ++t) s += g.at(t, pu);
      if (s < mixer::kDenEps) continue;
      for (int64_t c = 0; c < dh; ++c) {
        double acc = 0;
        for (int64_t t = 0; t < n; ++t) acc += g.at(t, pu) * v.at(t, h * dh + c);
        vbar[static_cast<size_t>(pu)][static_cast<size_t>(c)] = acc / s;
      }
    }
    for (int64_t t = 0; t < n; ++t) {
      double den = 0, sumg = 0;
      std::vector<double> num(static_cast<size_t>(dh), 0.0);
      for (int64_t pu = 0; pu < P; ++pu) {
        const double gv = g.at(t, pu);
        sumg += gv;
        den += w[static_cast<size_t>(pu)] * gv;
        for (int64_t c = 0; c < dh; ++c)
          num[static_cast<size_t>(c)] += w[static_cast<size_t>(pu)] * gv * p.amp.at(h, pu) *
                                         vbar[static_cast<size_t>(pu)][static_cast<size_t>(c)];
      }
      const double m = 1.0 - std::exp(-sumg);
      if (den >= mixer::kDenEps)
        for (int64_t c = 0; c < dh; ++c) mixed.at(t, h * dh + c) = m * num[static_cast<size_t>(c)] / den;
    }
  }
  Tensor64 y({n, d});
  for (int64_t t = 0; t < n; ++t)
    for (int64_t i = 0; i < d; ++i) {
      double acc = 0;
      for (int64_t j = 0; j < d; ++j) acc += p.wo.at(i, j) * mixed.at(t, j);
      y.at(t, i) = acc;
    }
  return y;
}

}  // namespace

TEST_CASE("pulse_summary: trivial gates and dense oracle") {
  lpa::Rng rng(101);
  const int64_t n = 6, d = 4;
  Tensor64 eye({d, d}, 0.0);
  for (int64_t i = 0; i < d; ++i) eye.at(i, i) = 1.0;
  auto x = random_tensor<double>(rng, {n, d});

  // all-ones gate: column mean of x
  Tensor64 g1({n, 1}, 1.0);
  auto vb1 = mixer::pulse_summary(x, g1, eye);
  for (int64_t c = 0; c < d; ++c) {
    double mean = 0;
    for (int64_t t = 0; t < n; ++t) mean += x.at(t, c);
    mean /= n;
    CHECK(vb1.at(0, c) == doctest::Approx(mean).epsilon(1e-12));
  }

  // one-hot gate: the selected row
  Tensor64 g2({n, 1}, 0.0);
  g2.at(3, 0) = 1.0;
  auto vb2 = mixer::pulse_summary(x, g2, eye);
  for (int64_t c = 0; c < d; ++c) CHECK(vb2.at(0, c) == doctest::Approx(x.at(3, c)));

  // all-zero gate: inactive pulse, zero summary
  Tensor64 g3({n, 1}, 0.0);
  std::vector<uint8_t> active;
  auto vb3 = mixer::pulse_summary(x, g3, eye, &active);
  CHECK(active[0] == 0);
  for (int64_t c = 0; c < d; ++c) CHECK(vb3.at(0, c) == 0.0);

  // random case against a dense weighted-mean oracle
  auto wv = random_tensor<double>(rng, {d, d});
  auto gr = random_tensor<double>(rng, {n, 3}, 0.0, 1.0);
  auto vbr = mixer::pulse_summary(x, gr, wv);
  for (int64_t pu = 0; pu < 3; ++pu) {
    double s = 0;
    for (int64_t t = 0; t < n; ++t) s += gr.at(t, pu);
    for (int64_t c = 0; c < d; ++c) {
      double acc = 0;
      for (int64_t t = 0; t < n; ++t) {
        double vt = 0;
        for (int64_t j = 0; j < d; ++j) vt += wv.at(c, j) * x.at(t, j);
        acc += gr.at(t, pu) * vt;
      }
      CHECK(std::abs(vbr.at(pu, c) - acc / s) < 1e-10);
    }
  }
}

TEST_CASE("lpa_forward: single always-on pulse reduces to a masked global mean") {
  const int64_t n = 7, d = 4;
  lpa::Rng rng(103);
  mixer::LpaParams<double> p = random_lpa<double>(rng, d, 1, 0, 0, 1);
  // positional pulse that saturates on: big bias
  p.head_gates[0].pos.a.fill(0.0);
  p.head_gates[0].pos.b.fill(0.0);
  p.head_gates[0].pos.bias.fill(50.0);
  p.amp.fill(1.0);
  p.wlogit.fill(0.0);
  p.wv.fill(0.0);
  p.wo.fill(0.0);
  for (int64_t i = 0; i < d; ++i) {
    p.wv.at(i, i) = 1.0;
    p.wo.at(i, i) = 1.0;
  }

  auto x = random_tensor<double>(rng, {n, d});
  mixer::LpaOutput<double> out;
  mixer::lpa_forward(x, p, &out);
  const double factor = 1.0 - std::exp(-1.0);
  for (int64_t t = 0; t < n; ++t)
    for (int64_t c = 0; c < d; ++c) {
      double mean = 0;
      for (int64_t s = 0; s < n; ++s) mean += x.at(s, c);
      mean /= n;
      CHECK(out.y.at(t, c) == doctest::Approx(factor * mean).epsilon(1e-9));
    }
  CHECK(factor == doctest::Approx(0.63212).epsilon(1e-4));
}

TEST_CASE("lpa_forward: all gates off gives zero output and zero mask") {
  const int64_t n = 5, d = 4;
  lpa::Rng rng(107);
  mixer::LpaParams<double> p = random_lpa<double>(rng, d, 1, 0, 0, 1);
  p.head_gates[0].pos.a.fill(0.0);
  p.head_gates[0].pos.b.fill(0.0);
  p.head_gates[0].pos.bias.fill(-5000.0);
  auto x = random_tensor<double>(rng, {n, d});
  mixer::LpaOutput<double> out;
  mixer::lpa_forward(x, p, &out);
  for (int64_t i = 0; i < out.y.numel(); ++i) CHECK(out.y.at(i) == 0.0);
  for (int64_t i = 0; i < out.mask.numel(); ++i) CHECK(out.mask.at(i) < 1e-300);
}

TEST_CASE("lpa_forward matches the brute-force mix oracle") {
  lpa::Rng rng(109);
  for (int rep = 0; rep < 30; ++rep) {
    const int64_t H = (rep % 2) ? 2 : 1;
    const int64_t d = 8;
    const int64_t n = rng.randint(1, 8);
    auto p = random_lpa<double>(rng, d, H, 1, 1, 2, rng.uniform(0.3, 2.0));
    auto x = random_tensor<double>(rng, {n, d}, -2.0, 2.0);
    mixer::LpaOutput<double> out;
    mixer::lpa_forward(x, p, &out);
    auto ref = brute_force_mix(x, p, out.gate);
    CHECK(testutil::rel_err(out.y, ref) < 1e-9);
  }
}

TEST_CASE("lpa_forward: mask in [0,1), zero iff no coverage; n=0 works") {
  lpa::Rng rng(113);
  auto p = random_lpa<double>(rng, 8, 2, 1, 1, 1);
  auto x = random_tensor<double>(rng, {9, 8});
  mixer::LpaOutput<double> out;
  mixer::lpa_forward(x, p, &out);
  for (int64_t i = 0; i < out.mask.numel(); ++i) {
    CHECK(out.mask.at(i) >= 0.0);
    CHECK(out.mask.at(i) < 1.0);
  }

  Tensor64 empty({0, 8});
  mixer::LpaOutput<double> out0;
  mixer::lpa_forward(empty, p, &out0);
  CHECK(out0.y.dim(0) == 0);

  Tensor64 bad({5, 6});
  CHECK_THROWS(mixer::lpa_forward(bad, p, &out));
}

TEST_CASE("output is invariant to pulse reordering within families") {
  lpa::Rng rng(127);
  auto p = random_lpa<double>(rng, 8, 1, 3, 2, 2);
  auto x = random_tensor<double>(rng, {10, 8});
  mixer::LpaOutput<double> out;
  mixer::lpa_forward(x, p, &out);

  // swap aperiodic pulses 0 and 2, periodic 0 and 1, positional 0 and 1,
  // permuting q rows, per-pulse scalars, amplitudes, and weight logits
  mixer::LpaParams<double> q = p;
  auto& g0 = q.head_gates[0];
  for (int64_t c = 0; c < g0.ap.q.dim(1); ++c) std::swap(g0.ap.q.at(0, c), g0.ap.q.at(2, c));
  std::swap(q.amp.at(0, 0), q.amp.at(0, 2));
  std::swap(q.wlogit.at(0, 0), q.wlogit.at(0, 2));
  std::swap(g0.per.rho.at(0), g0.per.rho.at(1));
  std::swap(g0.per.phi.at(0), g0.per.phi.at(1));
  std::swap(g0.per.zeta.at(0), g0.per.zeta.at(1));
  std::swap(q.amp.at(0, 3), q.amp.at(0, 4));
  std::swap(q.wlogit.at(0, 3), q.wlogit.at(0, 4));
  for (int64_t c = 0; c < g0.pos.a.dim(1); ++c) {
    std::swap(g0.pos.a.at(0, c), g0.pos.a.at(1, c));
    std::swap(g0.pos.b.at(0, c), g0.pos.b.at(1, c));
  }
  std::swap(g0.pos.bias.at(0), g0.pos.bias.at(1));
  std::swap(q.amp.at(0, 5), q.amp.at(0, 6));
  std::swap(q.wlogit.at(0, 5), q.wlogit.at(0, 6));

  mixer::LpaOutput<double> out2;
  mixer::lpa_forward(x, q, &out2);
  CHECK(max_abs_diff(out.y, out2.y) < 1e-12);
}

TEST_CASE("content-independent configuration is linear in the input") {
  lpa::Rng rng(131);
  auto p = random_lpa<double>(rng, 8, 2, 0, 2, 2);  // no aperiodic pulses
  auto x = random_tensor<double>(rng, {12, 8});
  mixer::LpaOutput<double> a, b;
  mixer::lpa_forward(x, p, &a);
  Tensor64 xs = x;
  const double c = 2.7;
  for (auto& v : xs.data) v *= c;
  mixer::lpa_forward(xs, p, &b);
  Tensor64 ay = a.y;
  for (auto& v : ay.data) v *= c;
  CHECK(testutil::rel_err(b.y, ay) < 1e-12);
}

TEST_CASE("gradients match central finite differences") {
  lpa::Rng rng(137);
  int instances = 0;
  while (instances < 4) {
    const int64_t d = 4, H = 1;
    const int64_t n = 5;
    auto p = random_lpa<double>(rng, d, H, 1, 1, 1, rng.uniform(0.7, 1.5));
    auto x = random_tensor<double>(rng, {n, d}, -1.5, 1.5);
    auto up = random_tensor<double>(rng, {n, d}, -1.0, 1.0);

    auto loss = [&](const mixer::LpaParams<double>& pp, const Tensor64& xx) {
      mixer::LpaOutput<double> out;
      mixer::lpa_forward(xx, pp, &out);
      double s = 0;
      for (int64_t i = 0; i < out.y.numel(); ++i) s += up.at(i) * out.y.at(i);
      return s;
    };

    auto gr = mixer::lpa_gradients(x, p, up);
    const double h = 1e-5;
    double worst = 0;

    mixer::for_each_param(p, gr.params, [&](const std::string&, Tensor64& param, Tensor64& grad) {
      for (int64_t i = 0; i < param.numel(); ++i) {
        const double orig = param.at(i);
        param.at(i) = orig + h;
        const double lp = loss(p, x);
        param.at(i) = orig - h;
        const double lm = loss(p, x);
        param.at(i) = orig;
        const double fd = (lp - lm) / (2 * h);
        const double err = std::abs(fd - grad.at(i)) /
                           std::max({std::abs(fd), std::abs(grad.at(i)), 1e-3});
        worst = std::max(worst, err);
      }
    });
    for (int64_t i = 0; i < x.numel(); ++i) {
      const double orig = x.at(i);
      x.at(i) = orig + h;
      const double lp = loss(p, x);
      x.at(i) = orig - h;
      const double lm = loss(p, x);
      x.at(i) = orig;
      const double fd = (lp - lm) / (2 * h);
      const double err =
          std::abs(fd - gr.x.at(i)) / std::max({std::abs(fd), std::abs(gr.x.at(i)), 1e-3});
      worst = std::max(worst, err);
    }
    CHECK(worst < 1e-4);
    ++instances;
  }
}

TEST_CASE("zero upstream gives zero gradients") {
  lpa::Rng rng(139);
  auto p = random_lpa<double>(rng, 4, 1, 1, 1, 1);
  auto x = random_tensor<double>(rng, {6, 4});
  Tensor64 up({6, 4}, 0.0);
  auto gr = mixer::lpa_gradients(x, p, up);
  mixer::for_each_param(p, gr.params, [&](const std::string&, Tensor64&, Tensor64& grad) {
    for (int64_t i = 0; i < grad.numel(); ++i) CHECK(grad.at(i) == 0.0);
  });
  for (int64_t i = 0; i < gr.x.numel(); ++i) CHECK(gr.x.at(i) == 0.0);
}

TEST_CASE("cross-layer bias feeds gates and gets gradients") {
  lpa::Rng rng(149);
  const int64_t d = 4;
  auto p = random_lpa<double>(rng, d, 1, 1, 1, 1, 1.0);
  const int64_t P = p.pulses_per_head();
  p.xproj = random_tensor<double>(rng, {P, P}, -0.5, 0.5);
  auto prev = random_tensor<double>(rng, {P}, 0.0, 1.0);
  auto x = random_tensor<double>(rng, {5, d});
  auto up = random_tensor<double>(rng, {5, d});

  mixer::LpaOutput<double> with, without;
  mixer::lpa_forward(x, p, &with, static_cast<mixer::LpaCache<double>*>(nullptr), &prev);
  mixer::lpa_forward(x, p, &without);
  CHECK(max_abs_diff(with.y, without.y) > 1e-12);  // bias changes the gates

  // gradcheck on xproj
  auto gr = mixer::lpa_gradients(x, p, up, &prev);
  const double h = 1e-5;
  for (int64_t i = 0; i < p.xproj.numel(); ++i) {
    const double orig = p.xproj.at(i);
    auto loss = [&]() {
      mixer::LpaOutput<double> o;
      mixer::lpa_forward(x, p, &o, static_cast<mixer::LpaCache<double>*>(nullptr), &prev);
      double s = 0;
      for (int64_t j = 0; j < o.y.numel(); ++j) s += up.at(j) * o.y.at(j);
      return s;
    };
    p.xproj.at(i) = orig + h;
    const double lp = loss();
    p.xproj.at(i) = orig - h;
    const double lm = loss();
    p.xproj.at(i) = orig;
    const double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - gr.params.xproj.at(i)) /
              std::max({std::abs(fd), std::abs(gr.params.xproj.at(i)), 1e-3}) <
          1e-4);
  }
}
