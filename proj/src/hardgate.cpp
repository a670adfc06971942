#include "lpa/hardgate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <set>
#include <unordered_map>

#include "json.hpp"

namespace lpa::hard {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;
// Open-interval endpoints are shrunk by this before integer extraction so
// that frames landing on a zero-crossing (within floating noise) stay off,
// matching the strict `> 0.5` soft threshold.
constexpr double kBoundaryEps = 1e-9;

uint64_t fnv1a(const void* data, size_t len, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
uint64_t hash_tensor(const Tensor<T>& t, uint64_t h) {
  h = fnv1a(t.shape.data(), t.shape.size() * sizeof(int64_t), h);
  return fnv1a(t.data.data(), t.data.size() * sizeof(T), h);
}

void push_segment(PulseProgram* p, int64_t s, int64_t e, int64_t n) {
  s = std::max<int64_t>(s, 0);
  e = std::min<int64_t>(e, n - 1);
  if (s > e) return;
  p->segments.push_back({s, e});
  p->covered += e - s + 1;
}

void finalize(PulseProgram* p) { p->active = p->covered > 0; }

// Integer frames strictly inside the open interval (lo, hi).
void open_interval_segment(PulseProgram* p, double lo, double hi, int64_t n) {
  const auto s = static_cast<int64_t>(std::floor(lo + kBoundaryEps)) + 1;
  const auto e = static_cast<int64_t>(std::ceil(hi - kBoundaryEps)) - 1;
  push_segment(p, s, e, n);
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int64_t c0, int64_t w) {
  Tensor<T> out({x.dim(0), w});
  for (int64_t t = 0; t < x.dim(0); ++t)
    for (int64_t c = 0; c < w; ++c) out.at(t, c) = x.at(t, c0 + c);
  return out;
}

template <typename T>
SegmentProgram compile_aperiodic_impl(const Tensor<T>& x, const gates::AperiodicParams<T>& p,
                                      const HardGateOptions& opt, const T* bias) {
  const int64_t n = x.dim(0);
  SegmentProgram prog;
  prog.n = n;
  const int64_t pa = p.pulses();
  if (pa == 0) return prog;

  Tensor<T> h = gates::predict_hidden(x, p.pred);
  const int64_t d2 = h.dim(1);
  for (int64_t pu = 0; pu < pa; ++pu) {
    PulseProgram pp;
    pp.family = gates::GateFamily::aperiodic;
    const T* qv = p.q.row(pu);
    // argmax of h_t . q, ties toward the lowest index
    int64_t best = 0;
    T best_score = kern::table<T>().dot(h.row(0), qv, d2);
    for (int64_t t = 1; t < n; ++t) {
      const T s = kern::table<T>().dot(h.row(t), qv, d2);
      if (s > best_score) {
        best_score = s;
        best = t;
      }
    }
    double delta;
    if (opt.recompute_delta) {
      // one-hot weights: hbar = h[argmax]
      delta = ops::softplus(static_cast<double>(
          kern::table<T>().dot(p.fw.ptr(), h.row(best), d2) + p.fb.at(0)));
    } else {
      const T tau = static_cast<T>(opt.soft_tau);
      std::vector<T> scores(static_cast<size_t>(n)), alpha(static_cast<size_t>(n));
      for (int64_t t = 0; t < n; ++t)
        scores[static_cast<size_t>(t)] = kern::table<T>().dot(h.row(t), qv, d2) / tau;
      kern::table<T>().softmax_row(scores.data(), alpha.data(), n, T(1));
      std::vector<T> hbar(static_cast<size_t>(d2), T(0));
      for (int64_t t = 0; t < n; ++t)
        kern::table<T>().axpy(alpha[static_cast<size_t>(t)], h.row(t), hbar.data(), d2);
      delta = ops::softplus(
          static_cast<double>(kern::table<T>().dot(p.fw.ptr(), hbar.data(), d2) + p.fb.at(0)));
    }
    const double beta = bias ? static_cast<double>(bias[pu]) : 0.0;
    const double c = static_cast<double>(best);
    // integer frames inside the tau->0 indicator support
    // [c - delta - beta, c + delta + beta]; ceil/floor keeps the compiled
    // interval consistent with the soft gate's 0.5 threshold
    const auto s = static_cast<int64_t>(std::ceil(c - delta - beta));
    const auto e = static_cast<int64_t>(std::floor(c + delta + beta));
    push_segment(&pp, s, e, n);
    finalize(&pp);
    prog.pulses.push_back(std::move(pp));
  }
  return prog;
}

template <typename T>
SegmentProgram compile_periodic_impl(const gates::PeriodicParams<T>& p, int64_t n,
                                     const T* bias) {
  SegmentProgram prog;
  prog.n = n;
  for (int64_t pu = 0; pu < p.pulses(); ++pu) {
    PulseProgram pp;
    pp.family = gates::GateFamily::periodic;
    const double tp = static_cast<double>(gates::period_of(p.rho.at(pu)));
    double duty = static_cast<double>(gates::duty_of(p.zeta.at(pu)));
    const double phase = static_cast<double>(p.phi.at(pu));
    const double beta = bias ? static_cast<double>(bias[pu]) : 0.0;
    if (duty < 1e-6 && beta <= 0.0) {
      finalize(&pp);
      prog.pulses.push_back(std::move(pp));
      continue;
    }
    // bias shifts the threshold: on where cos(theta) > cos(pi d) - beta
    const double cth = std::cos(kPi * duty) - beta;
    if (cth <= -1.0) {
      push_segment(&pp, 0, n - 1, n);
      finalize(&pp);
      prog.pulses.push_back(std::move(pp));
      continue;
    }
    if (cth >= 1.0) {
      finalize(&pp);
      prog.pulses.push_back(std::move(pp));
      continue;
    }
    const double eff_duty = std::acos(cth) / kPi;
    // on-interval around t = T*phi/(2pi) + k*T with half-width T*d/2
    const double center0 = tp * phase / kTwoPi;
    const double half = tp * eff_duty / 2.0;
    const auto kmin = static_cast<int64_t>(std::floor((0.0 - center0 - half) / tp)) - 1;
    const auto kmax =
        static_cast<int64_t>(std::ceil((static_cast<double>(n - 1) - center0 + half) / tp)) + 1;
    for (int64_t k = kmin; k <= kmax; ++k) {
      const double c = center0 + static_cast<double>(k) * tp;
      open_interval_segment(&pp, c - half, c + half, n);
    }
    finalize(&pp);
    prog.pulses.push_back(std::move(pp));
  }
  return prog;
}

template <typename T>
SegmentProgram compile_positional_impl(const gates::PositionalParams<T>& p, int64_t n,
                                       const T* bias) {
  SegmentProgram prog;
  prog.n = n;
  const int64_t kb = p.bases();
  for (int64_t pu = 0; pu < p.pulses(); ++pu) {
    PulseProgram pp;
    pp.family = gates::GateFamily::positional;
    const double beta = bias ? static_cast<double>(bias[pu]) : 0.0;
    int64_t run_start = -1;
    for (int64_t t = 0; t < n; ++t) {
      const double that = n > 1 ? static_cast<double>(t) / static_cast<double>(n - 1) : 0.0;
      double s = static_cast<double>(p.bias.at(pu)) + beta;
      for (int64_t k = 0; k < kb; ++k) {
        const double w = kTwoPi * static_cast<double>(k + 1) * that;
        s += static_cast<double>(p.a.at(pu, k)) * std::sin(w) +
             static_cast<double>(p.b.at(pu, k)) * std::cos(w);
      }
      const bool on = s > 0.0;
      if (on && run_start < 0) run_start = t;
      if (!on && run_start >= 0) {
        push_segment(&pp, run_start, t - 1, n);
        run_start = -1;
      }
    }
    if (run_start >= 0) push_segment(&pp, run_start, n - 1, n);
    finalize(&pp);
    prog.pulses.push_back(std::move(pp));
  }
  return prog;
}

std::mutex g_pos_cache_mu;
std::unordered_map<uint64_t, SegmentProgram> g_pos_cache;

}  // namespace

template <typename T>
SegmentProgram compile_aperiodic(const Tensor<T>& x, const gates::AperiodicParams<T>& p,
                                 const HardGateOptions& opt) {
  return compile_aperiodic_impl(x, p, opt, static_cast<const T*>(nullptr));
}

template <typename T>
SegmentProgram compile_periodic(const gates::PeriodicParams<T>& p, int64_t n) {
  return compile_periodic_impl(p, n, static_cast<const T*>(nullptr));
}

template <typename T>
SegmentProgram compile_positional(const gates::PositionalParams<T>& p, int64_t n) {
  uint64_t h = 1469598103934665603ull;
  h = hash_tensor(p.a, h);
  h = hash_tensor(p.b, h);
  h = hash_tensor(p.bias, h);
  h = fnv1a(&n, sizeof(n), h);
  const auto dtype = static_cast<uint64_t>(sizeof(T));
  h = fnv1a(&dtype, sizeof(dtype), h);
  {
    std::lock_guard<std::mutex> lock(g_pos_cache_mu);
    auto it = g_pos_cache.find(h);
    if (it != g_pos_cache.end()) return it->second;
  }
  SegmentProgram prog = compile_positional_impl(p, n, static_cast<const T*>(nullptr));
  {
    std::lock_guard<std::mutex> lock(g_pos_cache_mu);
    g_pos_cache.emplace(h, prog);
  }
  return prog;
}

template <typename T>
SegmentProgram compile_gates_with_bias(const Tensor<T>& x_head, const gates::GateParams<T>& p,
                                       const HardGateOptions& opt, const Tensor<T>* bias) {
  const int64_t n = x_head.dim(0);
  const int64_t pa = p.ap.pulses(), pp = p.per.pulses();
  const T* b0 = (bias && bias->numel()) ? bias->ptr() : nullptr;
  SegmentProgram prog;
  prog.n = n;
  SegmentProgram a = compile_aperiodic_impl(x_head, p.ap, opt, b0);
  SegmentProgram pe = compile_periodic_impl(p.per, n, b0 ? b0 + pa : nullptr);
  SegmentProgram po = b0 ? compile_positional_impl(p.pos, n, b0 + pa + pp)
                         : compile_positional(p.pos, n);  // cacheable only without bias
  for (auto& v : a.pulses) prog.pulses.push_back(std::move(v));
  for (auto& v : pe.pulses) prog.pulses.push_back(std::move(v));
  for (auto& v : po.pulses) prog.pulses.push_back(std::move(v));
  return prog;
}

template <typename T>
SegmentProgram compile_gates(const Tensor<T>& x_head, const gates::GateParams<T>& p,
                             const HardGateOptions& opt) {
  return compile_gates_with_bias<T>(x_head, p, opt, nullptr);
}

template <typename T>
std::vector<SegmentProgram> compile_layer(const Tensor<T>& x, const mixer::LpaParams<T>& p,
                                          const HardGateOptions& opt) {
  const int64_t dh = p.head_dim();
  std::vector<SegmentProgram> progs;
  for (int64_t h = 0; h < p.heads; ++h) {
    Tensor<T> xh = slice_cols(x, h * dh, dh);
    progs.push_back(compile_gates(xh, p.head_gates[h], opt));
  }
  return progs;
}

template <typename T>
Tensor<T> prefix_accumulate(const Tensor<T>& x, const SegmentProgram& prog, const Tensor<T>& wv) {
  const int64_t d = wv.dim(0);
  Tensor<T> v = ops::matmul_nt(x, wv);
  Tensor<T> c = ops::prefix_sum(v);
  const auto np = static_cast<int64_t>(prog.pulses.size());
  Tensor<T> vbar({np, d});
  std::vector<T> range(static_cast<size_t>(d));
  for (int64_t pu = 0; pu < np; ++pu) {
    const PulseProgram& pp = prog.pulses[static_cast<size_t>(pu)];
    if (!pp.active) continue;  // |S_p| = 0: zero summary, pulse inactive
    T* row = vbar.row(pu);
    for (const Segment& seg : pp.segments) {
      ops::range_sum(c, seg.s, seg.e, range.data());
      kern::table<T>().axpy(T(1), range.data(), row, d);
    }
    const T inv = T(1) / static_cast<T>(pp.covered);
    for (int64_t i = 0; i < d; ++i) row[i] *= inv;
  }
  return vbar;
}

template <typename T>
Tensor<T> hard_forward(const Tensor<T>& x, const mixer::LpaParams<T>& p,
                       const std::vector<SegmentProgram>& programs, HardStrategy strategy,
                       HardForwardStats* stats) {
  const int64_t n = x.dim(0), d = p.d, nh = p.heads;
  const int64_t dh = p.head_dim();
  const int64_t pph = p.pulses_per_head();
  check(static_cast<int64_t>(programs.size()) == nh, "one segment program per head required");

  Tensor<T> v = ops::matmul_nt(x, p.wv);
  Tensor<T> mixed({n, d});
  double active_accum = 0;

  for (int64_t h = 0; h < nh; ++h) {
    const int64_t c0 = h * dh;
    const SegmentProgram& prog = programs[static_cast<size_t>(h)];
    check(static_cast<int64_t>(prog.pulses.size()) == pph,
          "segment program pulse count must match the layer");
    check(prog.n == n, "segment program compiled for a different length");

    std::vector<T> w(static_cast<size_t>(pph));
    kern::table<T>().softmax_row(p.wlogit.row(h), w.data(), pph, T(1));
    Tensor<T> vh = slice_cols(v, c0, dh);

    Tensor<T> vbar({pph, dh});
    Tensor<T> num({n, dh});
    std::vector<T> den(static_cast<size_t>(n), T(0));
    std::vector<int32_t> count(static_cast<size_t>(n), 0);

    if (strategy == HardStrategy::dense) {
      // binary gate matrix, summaries as G^T V
      Tensor<T> g({n, pph});
      for (int64_t pu = 0; pu < pph; ++pu)
        for (const Segment& seg : prog.pulses[static_cast<size_t>(pu)].segments)
          for (int64_t t = seg.s; t <= seg.e; ++t) g.at(t, pu) = T(1);
      Tensor<T> sums = ops::matmul_tn(g, vh);  // (pph, dh)
      for (int64_t pu = 0; pu < pph; ++pu) {
        const auto& pp = prog.pulses[static_cast<size_t>(pu)];
        if (!pp.active) continue;
        const T inv = T(1) / static_cast<T>(pp.covered);
        for (int64_t c = 0; c < dh; ++c) vbar.at(pu, c) = sums.at(pu, c) * inv;
      }
      for (int64_t t = 0; t < n; ++t) {
        T* numrow = num.row(t);
        for (int64_t pu = 0; pu < pph; ++pu) {
          if (g.at(t, pu) == T(0)) continue;
          den[static_cast<size_t>(t)] += w[static_cast<size_t>(pu)];
          ++count[static_cast<size_t>(t)];
          kern::table<T>().axpy(w[static_cast<size_t>(pu)] * p.amp.at(h, pu), vbar.row(pu),
                                numrow, dh);
        }
      }
    } else {
      // prefix sums for summaries, range adds for the broadcast
      Tensor<T> pref = ops::prefix_sum(vh);
      std::vector<T> range(static_cast<size_t>(dh));
      for (int64_t pu = 0; pu < pph; ++pu) {
        const auto& pp = prog.pulses[static_cast<size_t>(pu)];
        if (!pp.active) continue;
        T* row = vbar.row(pu);
        for (const Segment& seg : pp.segments) {
          ops::range_sum(pref, seg.s, seg.e, range.data());
          kern::table<T>().axpy(T(1), range.data(), row, dh);
        }
        const T inv = T(1) / static_cast<T>(pp.covered);
        for (int64_t c = 0; c < dh; ++c) row[c] *= inv;
      }
      for (int64_t pu = 0; pu < pph; ++pu) {
        const auto& pp = prog.pulses[static_cast<size_t>(pu)];
        for (const Segment& seg : pp.segments)
          for (int64_t t = seg.s; t <= seg.e; ++t) {
            den[static_cast<size_t>(t)] += w[static_cast<size_t>(pu)];
            ++count[static_cast<size_t>(t)];
            kern::table<T>().axpy(w[static_cast<size_t>(pu)] * p.amp.at(h, pu), vbar.row(pu),
                                  num.row(t), dh);
          }
      }
    }

    for (int64_t t = 0; t < n; ++t) {
      active_accum += count[static_cast<size_t>(t)];
      if (den[static_cast<size_t>(t)] < static_cast<T>(mixer::kDenEps)) continue;
      const T m = -std::expm1(-static_cast<T>(count[static_cast<size_t>(t)]));
      const T scale = m / den[static_cast<size_t>(t)];
      const T* numrow = num.row(t);
      T* mix = mixed.row(t) + c0;
      for (int64_t c = 0; c < dh; ++c) mix[c] = numrow[c] * scale;
    }
  }

  if (stats && n > 0) stats->avg_active_pulses = active_accum / static_cast<double>(n * nh);
  return ops::matmul_nt(mixed, p.wo);
}

std::string programs_to_json(const std::vector<SegmentProgram>& programs) {
  nlohmann::json out = nlohmann::json::array();
  for (size_t h = 0; h < programs.size(); ++h) {
    for (size_t pu = 0; pu < programs[h].pulses.size(); ++pu) {
      const PulseProgram& pp = programs[h].pulses[pu];
      nlohmann::json rec;
      rec["head"] = h;
      rec["pulse"] = pu;
      rec["family"] = gates::family_name(pp.family);
      nlohmann::json segs = nlohmann::json::array();
      for (const Segment& s : pp.segments) segs.push_back({s.s, s.e});
      rec["segments"] = segs;
      rec["covered"] = pp.covered;
      out.push_back(std::move(rec));
    }
  }
  return out.dump(2);
}

template <typename T>
std::vector<int64_t> saturation_violations(const Tensor<T>& x, const mixer::LpaParams<T>& p,
                                           T tau, T margin) {
  const int64_t n = x.dim(0);
  const int64_t dh = p.head_dim();
  std::set<int64_t> bad;
  for (int64_t h = 0; h < p.heads; ++h) {
    Tensor<T> xh = slice_cols(x, h * dh, dh);
    const gates::GateParams<T>& gp = p.head_gates[h];
    if (gp.ap.pulses() > 0) {
      auto r = gates::aperiodic_gate(xh, gp.ap, tau);
      for (int64_t pu = 0; pu < gp.ap.pulses(); ++pu) {
        const T c = r.center.at(pu), delta = r.halfwidth.at(pu);
        for (int64_t t = 0; t < n; ++t) {
          const T z1 = static_cast<T>(t) - c + delta;
          const T z2 = c + delta - static_cast<T>(t);
          if (std::abs(z1) < margin || std::abs(z2) < margin) bad.insert(t);
        }
      }
    }
    for (int64_t pu = 0; pu < gp.per.pulses(); ++pu) {
      const T tp = gates::period_of(gp.per.rho.at(pu));
      const T duty = gates::duty_of(gp.per.zeta.at(pu));
      for (int64_t t = 0; t < n; ++t) {
        const T z =
            std::cos(static_cast<T>(kTwoPi) * static_cast<T>(t) / tp - gp.per.phi.at(pu)) -
            std::cos(static_cast<T>(kPi) * duty);
        if (std::abs(z) < margin) bad.insert(t);
      }
    }
    for (int64_t pu = 0; pu < gp.pos.pulses(); ++pu) {
      for (int64_t t = 0; t < n; ++t) {
        const T that = n > 1 ? static_cast<T>(t) / static_cast<T>(n - 1) : T(0);
        T s = gp.pos.bias.at(pu);
        for (int64_t k = 0; k < gp.pos.bases(); ++k) {
          const T w = static_cast<T>(kTwoPi) * static_cast<T>(k + 1) * that;
          s += gp.pos.a.at(pu, k) * std::sin(w) + gp.pos.b.at(pu, k) * std::cos(w);
        }
        if (std::abs(s) < margin) bad.insert(t);
      }
    }
  }
  return {bad.begin(), bad.end()};
}

#define LPA_HARD_INSTANTIATE(T)                                                                \
  template SegmentProgram compile_aperiodic<T>(const Tensor<T>&,                              \
                                               const gates::AperiodicParams<T>&,              \
                                               const HardGateOptions&);                       \
  template SegmentProgram compile_periodic<T>(const gates::PeriodicParams<T>&, int64_t);      \
  template SegmentProgram compile_positional<T>(const gates::PositionalParams<T>&, int64_t);  \
  template SegmentProgram compile_gates<T>(const Tensor<T>&, const gates::GateParams<T>&,     \
                                           const HardGateOptions&);                           \
  template SegmentProgram compile_gates_with_bias<T>(                                         \
      const Tensor<T>&, const gates::GateParams<T>&, const HardGateOptions&,                  \
      const Tensor<T>*);                                                                      \
  template std::vector<SegmentProgram> compile_layer<T>(const Tensor<T>&,                     \
                                                        const mixer::LpaParams<T>&,           \
                                                        const HardGateOptions&);              \
  template Tensor<T> prefix_accumulate<T>(const Tensor<T>&, const SegmentProgram&,            \
                                          const Tensor<T>&);                                  \
  template Tensor<T> hard_forward<T>(const Tensor<T>&, const mixer::LpaParams<T>&,            \
                                     const std::vector<SegmentProgram>&, HardStrategy,        \
                                     HardForwardStats*);                                      \
  template std::vector<int64_t> saturation_violations<T>(const Tensor<T>&,                    \
                                                         const mixer::LpaParams<T>&, T, T);

LPA_HARD_INSTANTIATE(float)
LPA_HARD_INSTANTIATE(double)

}  // namespace lpa::hard
