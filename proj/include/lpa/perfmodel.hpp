#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lpa::perf {

enum class Dtype { f16, f32 };

const char* dtype_name(Dtype d);

// Bandwidth/peak description plus the pass-count calibration constants for
// the memory-bound passes (the published table does not pin the bytes-per-
// pass assumptions, so they are profile-level knobs with defaults that land
// the element-wise and accumulation entries).
struct HardwareProfile {
  std::string name = "m4-pro";
  double bandwidth_bps = 273e9;
  double flops_f16 = 16.7e12;
  double flops_f32 = 8.35e12;
  double softmax_passes = 1.0;      // passes over the (heads, T, T) scores
  double elementwise_passes = 3.0;  // passes over the (T, d) activations, f32
  double accum_input_passes = 2.0;  // passes over the (T, d) input, f32

  double flops(Dtype t) const { return t == Dtype::f16 ? flops_f16 : flops_f32; }
  static double bytes_per_elem(Dtype t) { return t == Dtype::f16 ? 2.0 : 4.0; }
};

HardwareProfile m4_pro();
HardwareProfile profile_from_json(const std::string& text);
std::string profile_to_json(const HardwareProfile& p);

struct Component {
  std::string name;
  double flops = 0;
  double bytes = 0;
  double compute_s = 0;
  double memory_s = 0;
  double time_s = 0;  // max(compute_s, memory_s)
};

struct CostBreakdown {
  std::vector<Component> components;
  double total_s = 0;

  const Component& component(const std::string& name) const;
};

// Per-layer attention cost: four d x d projections, QK^T, softmax, scores*V.
CostBreakdown attention_cost(int64_t T, int64_t d, int64_t heads, const HardwareProfile& hw,
                             Dtype dtype);

// Per-layer LPA cost: the same four projections, gate prediction
// (dwconv kernel 5 + the 2-layer MLP), element-wise gate work, and the
// bandwidth-bound accumulation whose only P dependence is the (T, P) gate
// tensor. Element-wise and accumulation traffic is modeled on f32 tensors.
CostBreakdown lpa_cost(int64_t T, int64_t d, int64_t P, const HardwareProfile& hw, Dtype dtype);

struct MemoryRow {
  double seconds = 0;
  int64_t frames = 0;
  double attn_bytes = 0;  // T*T*bytes
  double lpa_bytes = 0;   // T*P*bytes
  double ratio = 0;       // attn/lpa
};

std::vector<MemoryRow> memory_table(const std::vector<double>& durations_s,
                                    double frame_rate = 50.0, int64_t P = 12,
                                    double bytes_per_elem = 4.0);

// Pass counts implied by a measured memory-bound time, for reporting.
double implied_passes(double time_s, double bytes_per_pass, const HardwareProfile& hw);

// Smallest T in [t_lo, t_hi] (scanned by step) where the LPA per-layer total
// beats attention, or -1 when there is no crossover in range.
int64_t crossover_frames(int64_t d, int64_t heads, int64_t P, const HardwareProfile& hw,
                         Dtype dtype, int64_t t_lo = 50, int64_t t_hi = 20000,
                         int64_t step = 50);

}  // namespace lpa::perf
