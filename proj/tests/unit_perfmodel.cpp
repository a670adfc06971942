#include <cmath>

#include "doctest.h"
#include "lpa/bench.hpp"
#include "lpa/perfmodel.hpp"

namespace perf = lpa::perf;

TEST_CASE("attention roofline reproduces the published per-layer entries") {
  auto hw = perf::m4_pro();
  auto cost = perf::attention_cost(6000, 768, 12, hw, perf::Dtype::f16);

  const double us = 1e6;
  CHECK(std::abs(cost.component("linear_projections").time_s * us - 1696.0) / 1696.0 < 0.01);
  CHECK(std::abs(cost.component("qk").time_s * us - 3311.0) / 3311.0 < 0.01);
  CHECK(std::abs(cost.component("scores_v").time_s * us - 3311.0) / 3311.0 < 0.01);

  // fp16 score storage: 12 heads * 6000^2 * 2 bytes = 864 MB per pass
  CHECK(cost.component("softmax").bytes == doctest::Approx(864e6).epsilon(1e-12));
  // memory-bound entry within 2x of the published 2110 us
  const double softmax_us = cost.component("softmax").time_s * us;
  CHECK(softmax_us < 2.0 * 2110.0);
  CHECK(softmax_us > 0.5 * 2110.0);

  // component times dominate both bounds and the total is their sum
  double total = 0;
  for (const auto& c : cost.components) {
    CHECK(c.time_s >= c.compute_s - 1e-18);
    CHECK(c.time_s >= c.memory_s - 1e-18);
    total += c.time_s;
  }
  CHECK(total == doctest::Approx(cost.total_s));
}

TEST_CASE("lpa roofline: projections match attention, pulse count is nearly free") {
  auto hw = perf::m4_pro();
  auto a = perf::attention_cost(6000, 768, 12, hw, perf::Dtype::f16);
  auto l12 = perf::lpa_cost(6000, 768, 12, hw, perf::Dtype::f16);
  auto l36 = perf::lpa_cost(6000, 768, 36, hw, perf::Dtype::f16);

  CHECK(l12.component("linear_projections").time_s ==
        doctest::Approx(a.component("linear_projections").time_s));
  // exactly P-independent projections and gate prediction
  CHECK(l12.component("linear_projections").time_s ==
        l36.component("linear_projections").time_s);
  CHECK(l12.component("gate_prediction").time_s == l36.component("gate_prediction").time_s);

  const double us = 1e6;
  // gate prediction within 25% of the published 797 us
  CHECK(std::abs(l12.component("gate_prediction").time_s * us - 797.0) / 797.0 < 0.25);
  // element-wise and accumulation within 2x of 201 and 136 us
  CHECK(std::abs(l12.component("elementwise").time_s * us - 201.0) / 201.0 < 1.0);
  CHECK(std::abs(l12.component("accumulation").time_s * us - 136.0) / 136.0 < 1.0);

  // per-layer totals differ by at most 1% between P=12 and P=36
  CHECK(std::abs(l36.total_s - l12.total_s) / l12.total_s <= 0.01);

  // gate tensor at P=36: 864 KB, under 5% of the accumulation input read
  const double gate_bytes = l36.component("accumulation").bytes -
                            hw.accum_input_passes * 6000.0 * 768.0 * 4.0;
  CHECK(gate_bytes == doctest::Approx(864e3));
  CHECK(gate_bytes / (6000.0 * 768.0 * 4.0) < 0.05);

  // P=0 degenerate: accumulation traffic is the input read alone
  auto l0 = perf::lpa_cost(6000, 768, 0, hw, perf::Dtype::f16);
  CHECK(l0.component("accumulation").bytes ==
        doctest::Approx(hw.accum_input_passes * 6000.0 * 768.0 * 4.0));
}

TEST_CASE("memory table reproduces the published rows") {
  auto rows = perf::memory_table({10, 30, 60, 120}, 50.0, 12, 4.0);
  REQUIRE(rows.size() == 4);
  const double mib = 1024.0 * 1024.0;
  const double kib = 1024.0;
  const double want_mb[4] = {0.95, 8.6, 34.3, 137.3};
  const double want_kb[4] = {23, 70, 140, 281};
  const double want_ratio[4] = {42, 125, 250, 500};
  const int64_t want_frames[4] = {500, 1500, 3000, 6000};
  for (int i = 0; i < 4; ++i) {
    CHECK(rows[i].frames == want_frames[i]);
    CHECK(std::abs(rows[i].attn_bytes / mib - want_mb[i]) <= 0.05);
    // the published KB column truncates to the unit
    CHECK(std::abs(rows[i].lpa_bytes / kib - want_kb[i]) <= 0.7);
    CHECK(std::llround(rows[i].ratio) == static_cast<long long>(want_ratio[i]));
  }

  auto zero = perf::memory_table({0.0}, 50.0, 12, 4.0);
  CHECK(zero[0].attn_bytes == 0.0);
  CHECK(zero[0].lpa_bytes == 0.0);
}

TEST_CASE("asymptotic scaling shapes and the crossover") {
  auto hw = perf::m4_pro();
  std::vector<double> ts, attn_quad, lpa_total;
  std::vector<double> attn_total_ext, ts_ext;
  for (int64_t t = 500; t <= 6000; t += 500) {
    auto a = perf::attention_cost(t, 768, 12, hw, perf::Dtype::f16);
    auto l = perf::lpa_cost(t, 768, 12, hw, perf::Dtype::f16);
    ts.push_back(static_cast<double>(t));
    attn_quad.push_back(a.total_s - a.component("linear_projections").time_s);
    lpa_total.push_back(l.total_s);
  }
  // attention minus the shared projections is the quadratic part
  CHECK(lpa::bench::loglog_slope(ts, attn_quad) >= 1.9);
  CHECK(lpa::bench::loglog_slope(ts, lpa_total) <= 1.1);

  // attention's full total reaches the quadratic regime at larger T
  for (int64_t t = 6000; t <= 48000; t *= 2) {
    auto a = perf::attention_cost(t, 768, 12, hw, perf::Dtype::f16);
    ts_ext.push_back(static_cast<double>(t));
    attn_total_ext.push_back(a.total_s);
  }
  CHECK(lpa::bench::loglog_slope(ts_ext, attn_total_ext) >= 1.9);

  // monotone in T
  double prev = 0;
  for (int64_t t = 500; t <= 6000; t += 500) {
    const double cur = perf::attention_cost(t, 768, 12, hw, perf::Dtype::f16).total_s;
    CHECK(cur > prev);
    prev = cur;
  }

  // a crossover exists: attention faster below, LPA faster above
  const int64_t cross = perf::crossover_frames(768, 12, 12, hw, perf::Dtype::f16);
  CHECK(cross > 0);
  auto a_small = perf::attention_cost(200, 768, 12, hw, perf::Dtype::f16).total_s;
  auto l_small = perf::lpa_cost(200, 768, 12, hw, perf::Dtype::f16).total_s;
  CHECK(a_small < l_small);
  auto a_big = perf::attention_cost(6000, 768, 12, hw, perf::Dtype::f16).total_s;
  auto l_big = perf::lpa_cost(6000, 768, 12, hw, perf::Dtype::f16).total_s;
  CHECK(l_big < a_big);
}

TEST_CASE("profile json round trip and implied passes") {
  auto hw = perf::m4_pro();
  auto text = perf::profile_to_json(hw);
  auto back = perf::profile_from_json(text);
  CHECK(back.bandwidth_bps == hw.bandwidth_bps);
  CHECK(back.flops_f16 == hw.flops_f16);
  CHECK(back.name == hw.name);

  // implied pass count for the published softmax entry
  const double implied = perf::implied_passes(2110e-6, 12.0 * 6000.0 * 6000.0 * 2.0, hw);
  CHECK(implied == doctest::Approx(0.6667).epsilon(0.01));

  CHECK_THROWS(perf::profile_from_json("{\"bandwidth_bps\": -1}"));
}
