#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lpa::bench {

struct Timing {
  double median_ms = 0;
  int iterations = 0;
  bool resolution_warning = false;
};

// Median wall time over `iters` runs after `warmup` discarded runs. When the
// median lands under 20 steady_clock ticks the iteration count doubles (up to
// 3 retries) and a warning is recorded.
Timing time_median(const std::function<void()>& fn, int warmup = 3, int iters = 11);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingRow {
  int64_t n = 0;
  double attn_ms = 0;
  double lpa_ms = 0;
  double speedup = 0;
};

struct ScalingConfig {
  std::vector<int64_t> sizes = {256, 512, 1024, 2048, 4096};
  int64_t d = 64;
  int64_t heads = 4;
  int64_t pa = 4, pp = 4, pq = 4;
  int warmup = 3;
  int iters = 11;
  uint64_t seed = 42;
};

// f32 wall-clock of attention_forward vs lpa_forward per size.
std::vector<ScalingRow> run_scaling(const ScalingConfig& cfg);

std::string scaling_csv(const std::vector<ScalingRow>& rows);

// Two-series log-log line chart (time vs n).
std::string scaling_svg(const std::vector<ScalingRow>& rows);

}  // namespace lpa::bench
