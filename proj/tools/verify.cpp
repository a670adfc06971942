#include "verify.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "lpa/bench.hpp"
#include "lpa/conversion.hpp"
#include "lpa/hardgate.hpp"
#include "lpa/mixer.hpp"
#include "lpa/perfmodel.hpp"
#include "lpa/reference.hpp"
#include "lpa/serialize.hpp"

namespace pulse_cli {

using lpa::Rng;
using lpa::Tensor;
using lpa::Tensor64;
namespace ops = lpa::ops;
namespace kern = lpa::kern;
namespace gates = lpa::gates;
namespace mixer = lpa::mixer;
namespace ref = lpa::ref;
namespace hard = lpa::hard;
namespace convert = lpa::convert;

namespace {

std::optional<std::string> failure(uint64_t seed, const std::string& what) {
  return "seed=" + std::to_string(seed) + ": " + what;
}

template <typename T>
Tensor<T> rand_t(Rng& rng, std::vector<int64_t> shape, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  rng.fill_uniform(t, lo, hi);
  return t;
}

mixer::LpaParams<double> rand_lpa(Rng& rng, int64_t d, int64_t heads, int64_t pa, int64_t pp,
                                  int64_t pq, double tau) {
  convert::LpaShape s;
  s.d = d;
  s.heads = heads;
  s.pa = pa;
  s.pp = pp;
  s.pq = pq;
  s.K = 4;
  auto p = convert::fresh_lpa(s, tau, rng);
  // break the symmetric defaults so properties see generic parameters
  rng.fill_uniform(p.wlogit, -0.5, 0.5);
  rng.fill_uniform(p.amp, 0.5, 1.5);
  for (auto& hg : p.head_gates) {
    rng.fill_uniform(hg.per.rho, -2.0, 3.0);
    rng.fill_uniform(hg.per.zeta, -1.5, 1.5);
    if (hg.pos.pulses() > 0) {
      rng.fill_uniform(hg.pos.a, -1.0, 1.0);
      rng.fill_uniform(hg.pos.b, -1.0, 1.0);
      rng.fill_uniform(hg.pos.bias, -0.5, 0.5);
    }
  }
  return p;
}

struct SaturatedInstance {
  mixer::LpaParams<double> p;
  Tensor64 x;
};

// Rejection-samples an instance meeting the saturation-margin condition at
// tau = 0.01: every pre-sigmoid numerator at least `margin` in magnitude and
// a clear aperiodic argmax.
std::optional<SaturatedInstance> try_saturated(uint64_t seed, double margin = 0.15) {
  Rng rng(seed);
  const int64_t d = 8, heads = (seed % 2) ? 2 : 1;
  const int64_t n = rng.randint(10, 24);
  auto p = rand_lpa(rng, d, heads, 1, 1, 1, 0.01);
  for (auto& hg : p.head_gates) {
    // long periods keep few integer frames near the cosine threshold
    rng.fill_uniform(hg.per.rho, 2.5, 5.0);
    rng.fill_uniform(hg.per.zeta, -0.8, 0.8);
  }
  auto x = rand_t<double>(rng, {n, d}, -1.5, 1.5);
  if (!hard::saturation_violations(x, p, 0.01, margin).empty()) return std::nullopt;

  const int64_t dh = p.head_dim();
  for (int64_t h = 0; h < heads; ++h) {
    Tensor64 xh({n, dh});
    for (int64_t t = 0; t < n; ++t)
      for (int64_t c = 0; c < dh; ++c) xh.at(t, c) = x.at(t, h * dh + c);
    auto hid = gates::predict_hidden(xh, p.head_gates[h].ap.pred);
    for (int64_t pu = 0; pu < p.head_gates[h].ap.pulses(); ++pu) {
      double best = -1e300, second = -1e300;
      for (int64_t t = 0; t < n; ++t) {
        const double s =
            kern::f64().dot(hid.row(t), p.head_gates[h].ap.q.row(pu), hid.dim(1));
        if (s > best) {
          second = best;
          best = s;
        } else if (s > second) {
          second = s;
        }
      }
      if (best - second < 0.2) return std::nullopt;  // argmax margin
    }
  }
  return SaturatedInstance{std::move(p), std::move(x)};
}

double rel_dev(const Tensor64& got, const Tensor64& want) {
  double num = 0, den = 0;
  for (int64_t i = 0; i < got.numel(); ++i) {
    num = std::max(num, std::abs(got.at(i) - want.at(i)));
    den = std::max(den, std::abs(want.at(i)));
  }
  return den > 0 ? num / den : num;
}

}  // namespace

std::vector<Property> all_properties() {
  std::vector<Property> props;
  auto add = [&](const std::string& name,
                 std::function<std::optional<std::string>(uint64_t)> fn) {
    props.push_back({name, std::move(fn)});
  };

  add("softmax-normalizes", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 50; ++rep) {
      auto x = rand_t<double>(rng, {rng.randint(1, 32)}, -5.0, 5.0);
      auto y = ops::softmax(x, rng.uniform(0.05, 4.0));
      double s = 0;
      for (int64_t i = 0; i < y.numel(); ++i) s += y.at(i);
      if (std::abs(s - 1.0) > 1e-6) return failure(seed, "sum deviates from 1");
    }
    return std::nullopt;
  });

  add("softmax-temperature-identity", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 50; ++rep) {
      auto x = rand_t<double>(rng, {9}, -3.0, 3.0);
      const double tau = rng.uniform(0.1, 5.0);
      auto a = ops::softmax(x, tau);
      Tensor64 xs = x;
      for (auto& v : xs.data) v /= tau;
      auto b = ops::softmax(xs, 1.0);
      for (int64_t i = 0; i < 9; ++i)
        if (std::abs(a.at(i) - b.at(i)) > 1e-12)
          return failure(seed, "softmax(x,tau) != softmax(x/tau,1)");
    }
    return std::nullopt;
  });

  add("softmax-low-temperature-argmax", [](uint64_t seed) -> std::optional<std::string> {
    Tensor64 x({2});
    x.at(0) = 10;
    x.at(1) = 0;
    auto y = ops::softmax(x, 0.01);
    if (std::abs(y.at(0) - 1.0) > 1e-9 || std::abs(y.at(1)) > 1e-9)
      return failure(seed, "low-temperature limit is not one-hot");
    return std::nullopt;
  });

  add("sigmoid-symmetry", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 200; ++rep) {
      const double v = rng.uniform(-30, 30);
      if (std::abs(ops::sigmoid(v) + ops::sigmoid(-v) - 1.0) > 1e-12)
        return failure(seed, "sigmoid(x)+sigmoid(-x) != 1 at x=" + std::to_string(v));
    }
    return std::nullopt;
  });

  add("softplus-overflow-safe", [](uint64_t seed) -> std::optional<std::string> {
    if (!std::isfinite(ops::softplus(1000.0)) || std::abs(ops::softplus(1000.0) - 1000.0) > 1e-9)
      return failure(seed, "softplus overflows at large input");
    if (ops::softplus(-1000.0) != 0.0 && std::abs(ops::softplus(-1000.0)) > 1e-9)
      return failure(seed, "softplus wrong at large negative input");
    return std::nullopt;
  });

  add("matmul-triple-loop-oracle", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 10; ++rep) {
      const int64_t m = rng.randint(1, 16), k = rng.randint(1, 16), n = rng.randint(1, 16);
      auto a = rand_t<double>(rng, {m, k});
      auto b = rand_t<double>(rng, {k, n});
      auto c = ops::matmul(a, b);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          double acc = 0;
          for (int64_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
          if (std::abs(acc - c.at(i, j)) > 1e-10)
            return failure(seed, "matmul deviates from the triple loop");
        }
    }
    return std::nullopt;
  });

  add("prefix-sum-range-oracle", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto x = rand_t<double>(rng, {100, 8});
    auto c = ops::prefix_sum(x);
    std::vector<double> got(8);
    for (int rep = 0; rep < 1000; ++rep) {
      int64_t s = rng.randint(0, 99), e = rng.randint(0, 99);
      if (s > e) std::swap(s, e);
      ops::range_sum(c, s, e, got.data());
      for (int64_t ch = 0; ch < 8; ++ch) {
        double direct = 0;
        for (int64_t t = s; t <= e; ++t) direct += x.at(t, ch);
        if (std::abs(direct - got[static_cast<size_t>(ch)]) > 1e-12)
          return failure(seed, "range sum deviates from direct summation");
      }
    }
    return std::nullopt;
  });

  add("dwconv-causality", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto x = rand_t<double>(rng, {16, 4});
    auto k = rand_t<double>(rng, {5, 4});
    auto base = ops::causal_dwconv(x, k);
    const int64_t t = rng.randint(1, 15);
    Tensor64 xp = x;
    xp.at(t, rng.randint(0, 3)) += 2.0;
    auto out = ops::causal_dwconv(xp, k);
    for (int64_t s = 0; s < t; ++s)
      for (int64_t c = 0; c < 4; ++c)
        if (out.at(s, c) != base.at(s, c)) return failure(seed, "output before t changed");
    return std::nullopt;
  });

  add("simd-scalar-equivalence", [](uint64_t seed) -> std::optional<std::string> {
    if (kern::detect_isa() == kern::Isa::scalar) return std::nullopt;  // scalar-only host
    Rng rng(seed);
    auto a = rand_t<float>(rng, {33, 17});
    auto b = rand_t<float>(rng, {17, 29});
    auto v = rand_t<float>(rng, {501}, -8.0, 8.0);
    const auto prev = kern::active_isa();
    kern::force_isa(kern::Isa::scalar);
    auto c_s = ops::matmul(a, b);
    Tensor<float> sig_s = lpa::zeros_like(v);
    kern::f32().sigmoid_v(v.ptr(), sig_s.ptr(), v.numel());
    kern::force_isa(kern::Isa::avx2);
    auto c_v = ops::matmul(a, b);
    Tensor<float> sig_v = lpa::zeros_like(v);
    kern::f32().sigmoid_v(v.ptr(), sig_v.ptr(), v.numel());
    kern::force_isa(prev);
    for (int64_t i = 0; i < c_s.numel(); ++i)
      if (std::abs(c_s.at(i) - c_v.at(i)) > 1e-4f)
        return failure(seed, "avx2 matmul deviates from scalar");
    for (int64_t i = 0; i < v.numel(); ++i)
      if (std::abs(sig_s.at(i) - sig_v.at(i)) > 1e-6f)
        return failure(seed, "avx2 sigmoid deviates from scalar");
    return std::nullopt;
  });

  add("gate-values-unit-interval", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 5; ++rep) {
      auto p = rand_lpa(rng, 8, 1, 2, 2, 2, rng.uniform(0.05, 3.0));
      auto x = rand_t<double>(rng, {14, 8}, -2.0, 2.0);
      mixer::LpaOutput<double> out;
      mixer::lpa_forward(x, p, &out);
      for (const auto& gm : out.gate)
        for (int64_t i = 0; i < gm.g.numel(); ++i)
          if (gm.g.at(i) < 0.0 || gm.g.at(i) > 1.0)
            return failure(seed, "gate value outside [0,1]");
    }
    return std::nullopt;
  });

  add("temperature-monotone-sharpening", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 300; ++rep) {
      const double z = rng.uniform(-4, 4);
      if (std::abs(z) < 1e-3) continue;
      const double t1 = rng.uniform(0.2, 3.0);
      const double t2 = rng.uniform(0.01, t1);
      const double step = z > 0 ? 1.0 : 0.0;
      if (std::abs(ops::sigmoid(z / t2) - step) > std::abs(ops::sigmoid(z / t1) - step) + 1e-15)
        return failure(seed, "sharpening not monotone in temperature");
    }
    return std::nullopt;
  });

  add("aperiodic-center-width-domain", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 10; ++rep) {
      const int64_t n = rng.randint(1, 20);
      auto p = rand_lpa(rng, 8, 1, 3, 0, 0, rng.uniform(0.2, 2.0));
      auto x = rand_t<double>(rng, {n, 8}, -2.0, 2.0);
      auto r = gates::aperiodic_gate(x, p.head_gates[0].ap, p.tau);
      for (int64_t pu = 0; pu < 3; ++pu) {
        if (r.center.at(pu) < 0.0 || r.center.at(pu) > static_cast<double>(n - 1))
          return failure(seed, "center outside [0, n-1]");
        if (!(r.halfwidth.at(pu) > 0.0)) return failure(seed, "non-positive half-width");
      }
    }
    return std::nullopt;
  });

  add("periodic-continuous-periodicity", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    gates::PeriodicParams<double> p;
    p.rho = rand_t<double>(rng, {4}, -6.0, 4.0);
    p.phi = rand_t<double>(rng, {4}, 0.0, 6.28);
    p.zeta = rand_t<double>(rng, {4}, -2.0, 2.0);
    for (int64_t pu = 0; pu < 4; ++pu) {
      const double tp = gates::period_of(p.rho.at(pu));
      for (int rep = 0; rep < 20; ++rep) {
        const double t = rng.uniform(0.0, 60.0);
        if (std::abs(gates::periodic_gate_at(p, pu, t, 0.7) -
                     gates::periodic_gate_at(p, pu, t + tp, 0.7)) > 1e-9)
          return failure(seed, "gate not T-periodic in continuous t");
      }
    }
    return std::nullopt;
  });

  add("periodic-minimum-period", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 500; ++rep)
      if (gates::period_of(rng.uniform(-40.0, 40.0)) < 4.0)
        return failure(seed, "period under 4 frames");
    return std::nullopt;
  });

  add("content-independence", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto p = rand_lpa(rng, 8, 1, 0, 2, 2, 0.8);
    auto x1 = rand_t<double>(rng, {18, 8});
    auto x2 = rand_t<double>(rng, {18, 8});
    mixer::LpaOutput<double> o1, o2;
    mixer::lpa_forward(x1, p, &o1);
    mixer::lpa_forward(x2, p, &o2);
    for (int64_t i = 0; i < o1.gate[0].g.numel(); ++i)
      if (o1.gate[0].g.at(i) != o2.gate[0].g.at(i))
        return failure(seed, "periodic/positional gates depend on content");
    return std::nullopt;
  });

  add("positional-cos-symmetry", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    gates::PositionalParams<double> p;
    p.a = Tensor64({2, 6}, 0.0);
    p.b = rand_t<double>(rng, {2, 6});
    p.bias = rand_t<double>(rng, {2}, -0.5, 0.5);
    const int64_t n = 15;
    auto g = gates::positional_gate(p, n, 0.9);
    for (int64_t pu = 0; pu < 2; ++pu)
      for (int64_t t = 0; t < n; ++t)
        if (std::abs(g.at(t, pu) - g.at(n - 1 - t, pu)) > 1e-10)
          return failure(seed, "cos-only gate not symmetric under reversal");
    return std::nullopt;
  });

  add("cross-layer-zero-bias", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    Tensor64 proj({4, 6}, 0.0);
    auto mean = rand_t<double>(rng, {6}, 0.0, 1.0);
    auto b = gates::cross_layer_bias(mean, proj);
    for (int64_t i = 0; i < 4; ++i)
      if (b.at(i) != 0.0) return failure(seed, "zero projection gives nonzero bias");
    rng.fill_uniform(proj, -1.0, 1.0);
    Tensor64 zero({6}, 0.0);
    auto b2 = gates::cross_layer_bias(zero, proj);
    for (int64_t i = 0; i < 4; ++i)
      if (b2.at(i) != 0.0) return failure(seed, "all-off previous gates give nonzero bias");
    return std::nullopt;
  });

  add("eq1-brute-force-oracle", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 10; ++rep) {
      const int64_t n = rng.randint(1, 8), d = 8, H = (rep % 2) ? 2 : 1;
      auto p = rand_lpa(rng, d, H, 1, 1, 2, rng.uniform(0.3, 2.0));
      auto x = rand_t<double>(rng, {n, d}, -2.0, 2.0);
      mixer::LpaOutput<double> out;
      mixer::lpa_forward(x, p, &out);
      // direct evaluation from the gate matrices
      const int64_t dh = d / H, P = p.pulses_per_head();
      Tensor64 mixed({n, d});
      for (int64_t h = 0; h < H; ++h) {
        const auto& g = out.gate[static_cast<size_t>(h)].g;
        std::vector<double> w(static_cast<size_t>(P));
        kern::f64().softmax_row(p.wlogit.row(h), w.data(), P, 1.0);
        for (int64_t t = 0; t < n; ++t) {
          double den = 0, sumg = 0;
          std::vector<double> num(static_cast<size_t>(dh), 0.0);
          for (int64_t pu = 0; pu < P; ++pu) {
            double s = 0;
            for (int64_t u = 0; u < n; ++u) s += g.at(u, pu);
            std::vector<double> vbar(static_cast<size_t>(dh), 0.0);
            if (s >= mixer::kDenEps) {
              for (int64_t u = 0; u < n; ++u)
                for (int64_t c = 0; c < dh; ++c) {
                  double vt = 0;
                  for (int64_t j = 0; j < d; ++j) vt += p.wv.at(h * dh + c, j) * x.at(u, j);
                  vbar[static_cast<size_t>(c)] += g.at(u, pu) * vt / s;
                }
            }
            den += w[static_cast<size_t>(pu)] * g.at(t, pu);
            sumg += g.at(t, pu);
            for (int64_t c = 0; c < dh; ++c)
              num[static_cast<size_t>(c)] += w[static_cast<size_t>(pu)] * g.at(t, pu) *
                                             p.amp.at(h, pu) * vbar[static_cast<size_t>(c)];
          }
          if (den >= mixer::kDenEps) {
            const double m = 1.0 - std::exp(-sumg);
            for (int64_t c = 0; c < dh; ++c) mixed.at(t, h * dh + c) = m * num[static_cast<size_t>(c)] / den;
          }
        }
      }
      for (int64_t t = 0; t < n; ++t)
        for (int64_t i = 0; i < d; ++i) {
          double acc = 0;
          for (int64_t j = 0; j < d; ++j) acc += p.wo.at(i, j) * mixed.at(t, j);
          if (std::abs(acc - out.y.at(t, i)) >
              1e-9 * std::max(1.0, std::abs(acc)))
            return failure(seed, "forward deviates from the direct evaluation");
        }
    }
    return std::nullopt;
  });

  add("pulse-reorder-invariance", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto p = rand_lpa(rng, 8, 1, 0, 2, 2, 0.9);
    auto x = rand_t<double>(rng, {10, 8});
    mixer::LpaOutput<double> a, b;
    mixer::lpa_forward(x, p, &a);
    auto q = p;
    auto& g0 = q.head_gates[0];
    std::swap(g0.per.rho.at(0), g0.per.rho.at(1));
    std::swap(g0.per.phi.at(0), g0.per.phi.at(1));
    std::swap(g0.per.zeta.at(0), g0.per.zeta.at(1));
    std::swap(q.amp.at(0, 0), q.amp.at(0, 1));
    std::swap(q.wlogit.at(0, 0), q.wlogit.at(0, 1));
    mixer::lpa_forward(x, q, &b);
    for (int64_t i = 0; i < a.y.numel(); ++i)
      if (std::abs(a.y.at(i) - b.y.at(i)) > 1e-12)
        return failure(seed, "output changed under pulse reordering");
    return std::nullopt;
  });

  add("value-linearity-content-independent", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto p = rand_lpa(rng, 8, 2, 0, 2, 2, 1.1);
    auto x = rand_t<double>(rng, {12, 8});
    mixer::LpaOutput<double> a, b;
    mixer::lpa_forward(x, p, &a);
    Tensor64 xs = x;
    for (auto& v : xs.data) v *= 3.0;
    mixer::lpa_forward(xs, p, &b);
    for (int64_t i = 0; i < a.y.numel(); ++i)
      if (std::abs(3.0 * a.y.at(i) - b.y.at(i)) > 1e-10 * std::max(1.0, std::abs(b.y.at(i))))
        return failure(seed, "gated mix not linear in the values");
    return std::nullopt;
  });

  add("mask-unit-range", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto p = rand_lpa(rng, 8, 2, 1, 1, 1, 0.8);
    auto x = rand_t<double>(rng, {11, 8});
    mixer::LpaOutput<double> out;
    mixer::lpa_forward(x, p, &out);
    for (int64_t i = 0; i < out.mask.numel(); ++i)
      if (out.mask.at(i) < 0.0 || out.mask.at(i) >= 1.0)
        return failure(seed, "mask outside [0,1)");
    return std::nullopt;
  });

  add("gradient-finite-difference-spot", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto p = rand_lpa(rng, 4, 1, 1, 1, 1, rng.uniform(0.7, 1.5));
    auto x = rand_t<double>(rng, {5, 4}, -1.5, 1.5);
    auto up = rand_t<double>(rng, {5, 4});
    auto gr = mixer::lpa_gradients(x, p, up);
    auto loss = [&]() {
      mixer::LpaOutput<double> out;
      mixer::lpa_forward(x, p, &out);
      double s = 0;
      for (int64_t i = 0; i < out.y.numel(); ++i) s += up.at(i) * out.y.at(i);
      return s;
    };
    const double h = 1e-5;
    std::optional<std::string> bad;
    mixer::for_each_param(p, gr.params, [&](const std::string& name, Tensor64& param,
                                            Tensor64& grad) {
      if (bad) return;
      Rng pick(static_cast<uint64_t>(param.numel()) * 31 + 7);
      for (int s = 0; s < std::min<int64_t>(param.numel(), 3); ++s) {
        const int64_t i = pick.randint(0, param.numel() - 1);
        const double orig = param.at(i);
        param.at(i) = orig + h;
        const double lp = loss();
        param.at(i) = orig - h;
        const double lm = loss();
        param.at(i) = orig;
        const double fd = (lp - lm) / (2 * h);
        if (std::abs(fd - grad.at(i)) / std::max({std::abs(fd), std::abs(grad.at(i)), 1e-3}) >
            1e-4)
          bad = failure(seed, "gradient mismatch at " + name);
      }
    });
    return bad;
  });

  add("attention-rows-stochastic", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto p = ref::random_attention<double>(8, 2, rng);
    auto x = rand_t<double>(rng, {7, 8});
    ref::AttentionCache<double> cache;
    ref::attention_forward(x, p, &cache);
    for (const auto& pr : cache.probs)
      for (int64_t i = 0; i < pr.dim(0); ++i) {
        double s = 0;
        for (int64_t j = 0; j < pr.dim(1); ++j) s += pr.at(i, j);
        if (std::abs(s - 1.0) > 1e-6) return failure(seed, "attention row does not sum to 1");
      }
    return std::nullopt;
  });

  add("attention-pairwise-oracle", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    const int64_t n = 4, d = 8, H = 2, dh = d / H;
    auto p = ref::random_attention<double>(d, H, rng);
    auto x = rand_t<double>(rng, {n, d});
    auto y = ref::attention_forward(x, p);
    auto proj = [&](const Tensor64& w, int64_t t, int64_t i) {
      double acc = 0;
      for (int64_t j = 0; j < d; ++j) acc += w.at(i, j) * x.at(t, j);
      return acc;
    };
    Tensor64 concat({n, d});
    for (int64_t h = 0; h < H; ++h)
      for (int64_t i = 0; i < n; ++i) {
        double scores[4], mx = -1e300;
        for (int64_t j = 0; j < n; ++j) {
          double s = 0;
          for (int64_t c = 0; c < dh; ++c)
            s += proj(p.wq, i, h * dh + c) * proj(p.wk, j, h * dh + c);
          scores[j] = s / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, scores[j]);
        }
        double z = 0;
        for (int64_t j = 0; j < n; ++j) z += std::exp(scores[j] - mx);
        for (int64_t j = 0; j < n; ++j)
          for (int64_t c = 0; c < dh; ++c)
            concat.at(i, h * dh + c) +=
                std::exp(scores[j] - mx) / z * proj(p.wv, j, h * dh + c);
      }
    for (int64_t t = 0; t < n; ++t)
      for (int64_t i = 0; i < d; ++i) {
        double acc = 0;
        for (int64_t j = 0; j < d; ++j) acc += p.wo.at(i, j) * concat.at(t, j);
        if (std::abs(acc - y.at(t, i)) > 1e-10)
          return failure(seed, "attention deviates from the pairwise oracle");
      }
    return std::nullopt;
  });

  add("soft-hard-equivalence-margin", [](uint64_t seed) -> std::optional<std::string> {
    int found = 0;
    for (uint64_t s = seed; found < 3 && s < seed + 4000; ++s) {
      auto inst = try_saturated(s);
      if (!inst) continue;
      ++found;
      mixer::LpaOutput<double> soft;
      mixer::lpa_forward(inst->x, inst->p, &soft);
      auto progs = hard::compile_layer(inst->x, inst->p);
      auto yh = hard::hard_forward(inst->x, inst->p, progs);
      if (rel_dev(yh, soft.y) > 1e-4)
        return failure(s, "hard path deviates from soft at tau=0.01 under the margin");
    }
    if (found < 3) return failure(seed, "could not sample saturated instances");
    return std::nullopt;
  });

  add("prefix-dense-path-equality", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 5; ++rep) {
      const int64_t n = 64, d = 8;
      convert::LpaShape s;
      s.d = d;
      s.heads = 2;
      s.pa = 1;
      s.pp = 2;
      s.pq = 2;
      s.K = 4;
      Rng prng(rng.next());
      auto p64 = convert::fresh_lpa(s, 1.0, prng);
      mixer::LpaParams<float> p;
      p.d = d;
      p.heads = 2;
      p.tau = 1.0f;
      for (auto& hg64 : p64.head_gates) {
        gates::GateParams<float> g;
        auto cast = [](const Tensor64& t) {
          Tensor<float> o(t.shape);
          for (int64_t i = 0; i < t.numel(); ++i) o.at(i) = static_cast<float>(t.at(i));
          return o;
        };
        g.ap.pred.dw = cast(hg64.ap.pred.dw);
        g.ap.pred.w1 = cast(hg64.ap.pred.w1);
        g.ap.pred.b1 = cast(hg64.ap.pred.b1);
        g.ap.pred.w2 = cast(hg64.ap.pred.w2);
        g.ap.pred.b2 = cast(hg64.ap.pred.b2);
        g.ap.q = cast(hg64.ap.q);
        g.ap.fw = cast(hg64.ap.fw);
        g.ap.fb = cast(hg64.ap.fb);
        g.per.rho = cast(hg64.per.rho);
        g.per.phi = cast(hg64.per.phi);
        g.per.zeta = cast(hg64.per.zeta);
        g.pos.a = cast(hg64.pos.a);
        g.pos.b = cast(hg64.pos.b);
        g.pos.bias = cast(hg64.pos.bias);
        p.head_gates.push_back(std::move(g));
      }
      p.wlogit = Tensor<float>({2, s.pulses_per_head()});
      p.amp = Tensor<float>({2, s.pulses_per_head()}, 1.0f);
      p.wv = Tensor<float>({d, d});
      p.wo = Tensor<float>({d, d});
      Rng wrng(rng.next());
      wrng.fill_uniform(p.wv, -0.5, 0.5);
      wrng.fill_uniform(p.wo, -0.5, 0.5);
      Tensor<float> x({n, d});
      wrng.fill_uniform(x, -1.0, 1.0);
      auto progs = hard::compile_layer(x, p);
      auto yd = hard::hard_forward(x, p, progs, hard::HardStrategy::dense);
      auto yp = hard::hard_forward(x, p, progs, hard::HardStrategy::prefix);
      for (int64_t i = 0; i < yd.numel(); ++i)
        if (std::abs(yd.at(i) - yp.at(i)) > 1e-5f)
          return failure(seed, "prefix and dense strategies disagree");
    }
    return std::nullopt;
  });

  add("periodic-threshold-oracle", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    for (int rep = 0; rep < 100; ++rep) {
      gates::PeriodicParams<double> p;
      p.rho = rand_t<double>(rng, {1}, -3.0, 6.0);
      p.phi = rand_t<double>(rng, {1}, 0.0, 6.2831853);
      p.zeta = rand_t<double>(rng, {1}, -6.0, 6.0);
      const int64_t n = rng.randint(1, 300);
      auto prog = hard::compile_periodic(p, n);
      const double tp = gates::period_of(p.rho.at(0));
      const double duty = gates::duty_of(p.zeta.at(0));
      std::set<int64_t> on;
      for (const auto& sg : prog.pulses[0].segments)
        for (int64_t t = sg.s; t <= sg.e; ++t) on.insert(t);
      for (int64_t t = 0; t < n; ++t) {
        const double diff = std::cos(2.0 * M_PI * static_cast<double>(t) / tp - p.phi.at(0)) -
                            std::cos(M_PI * duty);
        if (std::abs(diff) < 1e-9) continue;
        if (on.count(t) != (diff > 0 ? 1u : 0u))
          return failure(seed, "analytic segments deviate from thresholding");
      }
    }
    return std::nullopt;
  });

  add("program-recompile-deterministic", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto p = rand_lpa(rng, 8, 2, 1, 2, 2, 0.5);
    auto x = rand_t<double>(rng, {40, 8});
    auto a = hard::compile_layer(x, p);
    auto b = hard::compile_layer(x, p);
    if (hard::programs_to_json(a) != hard::programs_to_json(b))
      return failure(seed, "recompilation not deterministic");
    return std::nullopt;
  });

  add("elastic-net-direct", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    auto amp = rand_t<double>(rng, {2, 9}, -2.0, 2.0);
    double direct = 0;
    for (int64_t i = 0; i < amp.numel(); ++i)
      direct += 0.01 * std::abs(amp.at(i)) + 0.001 * amp.at(i) * amp.at(i);
    if (std::abs(convert::elastic_net_penalty(amp, 0.01, 0.001) - direct) > 1e-10)
      return failure(seed, "penalty deviates from direct evaluation");
    return std::nullopt;
  });

  add("temperature-schedule-endpoints", [](uint64_t seed) -> std::optional<std::string> {
    convert::CurriculumSchedule s{3.0, 0.5, 21, false};
    if (convert::temperature_at(0, s) != 3.0) return failure(seed, "start not 3.0");
    if (convert::temperature_at(20, s) != 0.5) return failure(seed, "end not 0.5");
    if (std::abs(convert::temperature_at(10, s) - 1.75) > 1e-12)
      return failure(seed, "midpoint not 1.75");
    return std::nullopt;
  });

  add("roofline-pulse-independence", [](uint64_t seed) -> std::optional<std::string> {
    auto hw = lpa::perf::m4_pro();
    auto l12 = lpa::perf::lpa_cost(6000, 768, 12, hw, lpa::perf::Dtype::f16);
    auto l36 = lpa::perf::lpa_cost(6000, 768, 36, hw, lpa::perf::Dtype::f16);
    if (l12.component("linear_projections").time_s != l36.component("linear_projections").time_s)
      return failure(seed, "projection cost depends on pulse count");
    if (std::abs(l36.total_s - l12.total_s) / l12.total_s > 0.01)
      return failure(seed, "per-layer total depends on pulse count by more than 1%");
    return std::nullopt;
  });

  add("memory-table-rows", [](uint64_t seed) -> std::optional<std::string> {
    auto rows = lpa::perf::memory_table({10, 30, 60, 120}, 50.0, 12, 4.0);
    const double want_ratio[4] = {42, 125, 250, 500};
    for (int i = 0; i < 4; ++i)
      if (std::llround(rows[static_cast<size_t>(i)].ratio) !=
          static_cast<long long>(want_ratio[i]))
        return failure(seed, "memory ratio column deviates from the expected table");
    if (std::abs(rows[3].attn_bytes / (1024.0 * 1024.0) - 137.3) > 0.05)
      return failure(seed, "attention memory at 120s deviates");
    return std::nullopt;
  });

  add("param-store-roundtrip", [](uint64_t seed) -> std::optional<std::string> {
    Rng rng(seed);
    lpa::io::ParamStore store;
    auto t = rand_t<double>(rng, {4, 7}, -3.0, 3.0);
    store.put("layer.0.wv", t);
    auto back = lpa::io::ParamStore::from_json(store.to_json()).get<double>("layer.0.wv");
    for (int64_t i = 0; i < t.numel(); ++i)
      if (std::abs(back.at(i) - t.at(i)) > 1e-6)
        return failure(seed, "round trip drifts beyond 1e-6");
    return std::nullopt;
  });

  return props;
}

int run_verify(uint64_t seed, bool inject_fault) {
  auto props = all_properties();
  if (inject_fault)
    props.push_back({"self-test-fault", [](uint64_t s) -> std::optional<std::string> {
                       return "seed=" + std::to_string(s) + ": injected fault";
                     }});
  int failures = 0;
  for (const auto& p : props) {
    std::optional<std::string> err;
    try {
      err = p.run(seed);
    } catch (const std::exception& e) {
      err = std::string("exception: ") + e.what();
    }
    if (err) {
      ++failures;
      std::printf("[FAIL] %-38s %s\n", p.name.c_str(), err->c_str());
    } else {
      std::printf("[ok]   %s\n", p.name.c_str());
    }
  }
  std::printf("%zu properties, %d failed\n", props.size(), failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace pulse_cli
