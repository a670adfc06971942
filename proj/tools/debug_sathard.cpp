// temporary debugging harness, not part of the build
#include <cmath>
#include <cstdio>

#include "lpa/conversion.hpp"
#include "lpa/hardgate.hpp"
#include "lpa/mixer.hpp"

using lpa::Rng;
using lpa::Tensor64;
namespace gates = lpa::gates;
namespace mixer = lpa::mixer;
namespace hard = lpa::hard;
namespace convert = lpa::convert;
namespace kern = lpa::kern;

static mixer::LpaParams<double> rand_lpa(Rng& rng, int64_t d, int64_t heads, int64_t pa,
                                         int64_t pp, int64_t pq, double tau) {
  convert::LpaShape s;
  s.d = d;
  s.heads = heads;
  s.pa = pa;
  s.pp = pp;
  s.pq = pq;
  s.K = 4;
  auto p = convert::fresh_lpa(s, tau, rng);
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

int main() {
  const uint64_t seed = 690;
  Rng rng(seed);
  const int64_t d = 8, heads = (seed % 2) ? 2 : 1;
  const int64_t n = rng.randint(10, 24);
  auto p = rand_lpa(rng, d, heads, 1, 1, 1, 0.01);
  for (auto& hg : p.head_gates) {
    rng.fill_uniform(hg.per.rho, 2.5, 5.0);
    rng.fill_uniform(hg.per.zeta, -0.8, 0.8);
  }
  Tensor64 x({n, d});
  rng.fill_uniform(x, -1.5, 1.5);
  auto viol = hard::saturation_violations(x, p, 0.01, 0.15);
  std::printf("n=%lld heads=%lld violations=%zu\n", (long long)n, (long long)heads, viol.size());

  mixer::LpaOutput<double> soft;
  mixer::lpa_forward(x, p, &soft);
  auto progs = hard::compile_layer(x, p);
  auto yh = hard::hard_forward(x, p, progs);

  for (size_t h = 0; h < progs.size(); ++h) {
    for (size_t pu = 0; pu < progs[h].pulses.size(); ++pu) {
      std::printf("head %zu pulse %zu fam %d covered %lld segs:", h, pu,
                  (int)progs[h].pulses[pu].family, (long long)progs[h].pulses[pu].covered);
      for (auto& s : progs[h].pulses[pu].segments) std::printf(" [%lld,%lld]", (long long)s.s, (long long)s.e);
      // soft column sums and per-位置 compare
      double s1 = 0;
      for (int64_t t = 0; t < n; ++t) s1 += soft.gate[h].g.at(t, pu);
      std::printf(" soft_mass %.6f\n", s1);
      for (int64_t t = 0; t < n; ++t) {
        bool on = false;
        for (auto& s : progs[h].pulses[pu].segments) on |= (t >= s.s && t <= s.e);
        const double g = soft.gate[h].g.at(t, pu);
        if ((on && g < 0.99) || (!on && g > 0.01))
          std::printf("    mismatch t=%lld on=%d soft=%.6g\n", (long long)t, (int)on, g);
      }
    }
  }
  double dev = 0, den = 0;
  int64_t where = -1;
  for (int64_t i = 0; i < yh.numel(); ++i) {
    const double e = std::abs(yh.at(i) - soft.y.at(i));
    if (e > dev) {
      dev = e;
      where = i;
    }
    den = std::max(den, std::abs(soft.y.at(i)));
  }
  std::printf("max dev %.6g rel %.6g at flat index %lld (t=%lld c=%lld)\n", dev, dev / den,
              (long long)where, (long long)(where / d), (long long)(where % d));
  return 0;
}
