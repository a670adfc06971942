#include "lpa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lpa/conversion.hpp"
#include "lpa/mixer.hpp"
#include "lpa/reference.hpp"

namespace lpa::bench {

using Clock = std::chrono::steady_clock;

Timing time_median(const std::function<void()>& fn, int warmup, int iters) {
  Timing result;
  iters = std::max(iters, 1);
  for (int retry = 0; retry < 4; ++retry) {
    for (int i = 0; i < warmup; ++i) fn();
    std::vector<double> samples;
    samples.reserve(static_cast<size_t>(iters));
    for (int i = 0; i < iters; ++i) {
      const auto t0 = Clock::now();
      fn();
      const auto t1 = Clock::now();
      samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(samples.begin(), samples.end());
    result.median_ms = samples[samples.size() / 2];
    result.iterations = iters;

    const double tick_ms =
        1e3 * static_cast<double>(Clock::period::num) / static_cast<double>(Clock::period::den);
    if (result.median_ms >= 20.0 * tick_ms || retry == 3) break;
    std::fprintf(stderr,
                 "bench: median %.3g ms under 20 timer ticks, doubling iterations to %d\n",
                 result.median_ms, iters * 2);
    result.resolution_warning = true;
    iters *= 2;
  }
  return result;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  check(x.size() == y.size() && x.size() >= 2, "slope fit needs matching series of length >= 2");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<ScalingRow> run_scaling(const ScalingConfig& cfg) {
  Rng rng(cfg.seed);
  auto attn = ref::random_attention<float>(cfg.d, cfg.heads, rng);

  convert::LpaShape shape;
  shape.d = cfg.d;
  shape.heads = cfg.heads;
  shape.pa = cfg.pa;
  shape.pp = cfg.pp;
  shape.pq = cfg.pq;
  Rng lrng(cfg.seed + 1);
  auto lpa64 = convert::fresh_lpa(shape, 1.0, lrng);
  // f32 copy for the benchmark path
  mixer::LpaParams<float> lpa;
  lpa.d = lpa64.d;
  lpa.heads = lpa64.heads;
  lpa.tau = 1.0f;
  auto cast = [](const Tensor<double>& t) {
    Tensor<float> o(t.shape);
    for (int64_t i = 0; i < t.numel(); ++i) o.at(i) = static_cast<float>(t.at(i));
    return o;
  };
  for (const auto& hg : lpa64.head_gates) {
    gates::GateParams<float> g;
    g.ap.pred.dw = cast(hg.ap.pred.dw);
    g.ap.pred.w1 = cast(hg.ap.pred.w1);
    g.ap.pred.b1 = cast(hg.ap.pred.b1);
    g.ap.pred.w2 = cast(hg.ap.pred.w2);
    g.ap.pred.b2 = cast(hg.ap.pred.b2);
    g.ap.q = cast(hg.ap.q);
    g.ap.fw = cast(hg.ap.fw);
    g.ap.fb = cast(hg.ap.fb);
    g.per.rho = cast(hg.per.rho);
    g.per.phi = cast(hg.per.phi);
    g.per.zeta = cast(hg.per.zeta);
    g.pos.a = cast(hg.pos.a);
    g.pos.b = cast(hg.pos.b);
    g.pos.bias = cast(hg.pos.bias);
    lpa.head_gates.push_back(std::move(g));
  }
  lpa.wlogit = cast(lpa64.wlogit);
  lpa.amp = cast(lpa64.amp);
  lpa.wv = cast(lpa64.wv);
  lpa.wo = cast(lpa64.wo);

  std::vector<ScalingRow> rows;
  for (int64_t n : cfg.sizes) {
    Tensor<float> x({n, cfg.d});
    rng.fill_uniform(x, -1.0, 1.0);

    volatile float sink = 0;
    auto ta = time_median(
        [&] {
          auto y = ref::attention_forward(x, attn);
          sink = sink + y.at(0, 0);
        },
        cfg.warmup, cfg.iters);
    auto tl = time_median(
        [&] {
          mixer::LpaOutput<float> out;
          mixer::lpa_forward(x, lpa, &out);
          sink = sink + out.y.at(0, 0);
        },
        cfg.warmup, cfg.iters);

    ScalingRow r;
    r.n = n;
    r.attn_ms = ta.median_ms;
    r.lpa_ms = tl.median_ms;
    r.speedup = tl.median_ms > 0 ? ta.median_ms / tl.median_ms : 0.0;
    rows.push_back(r);
  }
  return rows;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
  std::ostringstream os;
  os << "n,attn_ms,lpa_ms,speedup\n";
  for (const auto& r : rows)
    os << r.n << "," << r.attn_ms << "," << r.lpa_ms << "," << r.speedup << "\n";
  return os.str();
}

namespace {

double map_coord(double v, double lo, double hi, double out_lo, double out_hi) {
  return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
}

}  // namespace

std::string scaling_svg(const std::vector<ScalingRow>& rows) {
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 30, mb = 50;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& r : rows) {
    xlo = std::min(xlo, std::log10(static_cast<double>(r.n)));
    xhi = std::max(xhi, std::log10(static_cast<double>(r.n)));
    for (double v : {r.attn_ms, r.lpa_ms}) {
      if (v <= 0) continue;
      ylo = std::min(ylo, std::log10(v));
      yhi = std::max(yhi, std::log10(v));
    }
  }
  if (ylo > yhi) {
    ylo = 0;
    yhi = 1;
  }
  ylo -= 0.1;
  yhi += 0.1;

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='18' text-anchor='middle' font-size='14'>"
     << "forward time vs sequence length (log-log)</text>\n";

  auto px = [&](double logn) { return map_coord(logn, xlo, xhi, ml, W - mr); };
  auto py = [&](double logt) { return map_coord(logt, ylo, yhi, H - mb, mt); };

  // axes and tick labels at the measured sizes
  os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  for (const auto& r : rows) {
    const double x = px(std::log10(static_cast<double>(r.n)));
    os << "<line x1='" << x << "' y1='" << H - mb << "' x2='" << x << "' y2='" << H - mb + 5
       << "' stroke='black'/>\n";
    os << "<text x='" << x << "' y='" << H - mb + 20 << "' text-anchor='middle' font-size='11'>"
       << r.n << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(ylo)); e <= static_cast<int>(std::floor(yhi)); ++e) {
    const double y = py(e);
    os << "<line x1='" << ml - 5 << "' y1='" << y << "' x2='" << ml << "' y2='" << y
       << "' stroke='black'/>\n";
    os << "<text x='" << ml - 10 << "' y='" << y + 4 << "' text-anchor='end' font-size='11'>1e"
       << e << "</text>\n";
  }
  os << "<text x='" << W / 2 << "' y='" << H - 15
     << "' text-anchor='middle' font-size='12'>n (frames)</text>\n";
  os << "<text x='15' y='" << H / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 15 "
     << H / 2 << ")'>time (ms)</text>\n";

  auto series = [&](auto get, const char* color, const char* label, double label_y) {
    std::ostringstream pts;
    for (const auto& r : rows)
      pts << px(std::log10(static_cast<double>(r.n))) << "," << py(std::log10(get(r))) << " ";
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='" << pts.str()
       << "'/>\n";
    for (const auto& r : rows)
      os << "<circle cx='" << px(std::log10(static_cast<double>(r.n))) << "' cy='"
         << py(std::log10(get(r))) << "' r='3' fill='" << color << "'/>\n";
    os << "<text x='" << W - mr - 5 << "' y='" << label_y << "' text-anchor='end' fill='" << color
       << "' font-size='12'>" << label << "</text>\n";
  };
  series([](const ScalingRow& r) { return r.attn_ms; }, "#c0392b", "attention", mt + 16);
  series([](const ScalingRow& r) { return r.lpa_ms; }, "#2471a3", "lpa", mt + 34);
  os << "</svg>\n";
  return os.str();
}

}  // namespace lpa::bench
