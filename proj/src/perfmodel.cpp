#include "lpa/perfmodel.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "lpa/tensor.hpp"

namespace lpa::perf {

const char* dtype_name(Dtype d) { return d == Dtype::f16 ? "f16" : "f32"; }

HardwareProfile m4_pro() { return HardwareProfile{}; }

HardwareProfile profile_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  HardwareProfile p;
  p.name = j.value("name", p.name);
  p.bandwidth_bps = j.value("bandwidth_bps", p.bandwidth_bps);
  if (j.contains("flops")) {
    p.flops_f16 = j["flops"].value("f16", p.flops_f16);
    p.flops_f32 = j["flops"].value("f32", p.flops_f32);
  }
  p.softmax_passes = j.value("softmax_passes", p.softmax_passes);
  p.elementwise_passes = j.value("elementwise_passes", p.elementwise_passes);
  p.accum_input_passes = j.value("accum_input_passes", p.accum_input_passes);
  check(p.bandwidth_bps > 0 && p.flops_f16 > 0 && p.flops_f32 > 0,
        "hardware profile requires positive bandwidth and peak flops");
  return p;
}

std::string profile_to_json(const HardwareProfile& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["bandwidth_bps"] = p.bandwidth_bps;
  j["flops"] = {{"f16", p.flops_f16}, {"f32", p.flops_f32}};
  j["softmax_passes"] = p.softmax_passes;
  j["elementwise_passes"] = p.elementwise_passes;
  j["accum_input_passes"] = p.accum_input_passes;
  return j.dump(2);
}

namespace {

Component make_component(std::string name, double flops, double bytes,
                         const HardwareProfile& hw, Dtype dtype) {
  Component c;
  c.name = std::move(name);
  c.flops = flops;
  c.bytes = bytes;
  c.compute_s = flops / hw.flops(dtype);
  c.memory_s = bytes / hw.bandwidth_bps;
  c.time_s = std::max(c.compute_s, c.memory_s);
  return c;
}

CostBreakdown finish(std::vector<Component> cs) {
  CostBreakdown b;
  b.components = std::move(cs);
  for (const Component& c : b.components) b.total_s += c.time_s;
  return b;
}

}  // namespace

const Component& CostBreakdown::component(const std::string& name) const {
  for (const Component& c : components)
    if (c.name == name) return c;
  fail("no such cost component: " + name);
}

CostBreakdown attention_cost(int64_t T, int64_t d, int64_t heads, const HardwareProfile& hw,
                             Dtype dtype) {
  check(T >= 1 && d >= 1 && heads >= 1, "attention_cost requires positive dimensions");
  const double b = HardwareProfile::bytes_per_elem(dtype);
  const double Td = static_cast<double>(T) * static_cast<double>(d);
  const double T2 = static_cast<double>(T) * static_cast<double>(T);
  const double scores = static_cast<double>(heads) * T2;

  std::vector<Component> cs;
  cs.push_back(make_component("linear_projections", 8.0 * Td * d,
                              (8.0 * Td + 4.0 * d * static_cast<double>(d)) * b, hw, dtype));
  cs.push_back(make_component("qk", 2.0 * T2 * d, (2.0 * Td + scores) * b, hw, dtype));
  cs.push_back(make_component("softmax", 5.0 * scores, hw.softmax_passes * scores * b, hw, dtype));
  cs.push_back(make_component("scores_v", 2.0 * T2 * d, (scores + 2.0 * Td) * b, hw, dtype));
  return finish(std::move(cs));
}

CostBreakdown lpa_cost(int64_t T, int64_t d, int64_t P, const HardwareProfile& hw, Dtype dtype) {
  check(T >= 1 && d >= 1 && P >= 0, "lpa_cost requires positive dimensions");
  const double b = HardwareProfile::bytes_per_elem(dtype);
  const double Td = static_cast<double>(T) * static_cast<double>(d);
  const double TP = static_cast<double>(T) * static_cast<double>(P);
  constexpr double kDwKernel = 5.0;
  constexpr double kF32 = 4.0;  // element-wise and accumulation tensors stay f32

  std::vector<Component> cs;
  cs.push_back(make_component("linear_projections", 8.0 * Td * d,
                              (8.0 * Td + 4.0 * d * static_cast<double>(d)) * b, hw, dtype));
  // dwconv + Linear(d->d) + Linear(d->d/2)
  cs.push_back(make_component("gate_prediction",
                              2.0 * kDwKernel * Td + 2.0 * Td * d + Td * d,
                              (4.0 * Td + 2.5 * d * static_cast<double>(d)) * b, hw, dtype));
  cs.push_back(make_component("elementwise", 5.0 * Td, hw.elementwise_passes * Td * kF32, hw,
                              dtype));
  cs.push_back(make_component("accumulation", 4.0 * TP * d,
                              hw.accum_input_passes * Td * kF32 + TP * kF32, hw, dtype));
  return finish(std::move(cs));
}

std::vector<MemoryRow> memory_table(const std::vector<double>& durations_s, double frame_rate,
                                    int64_t P, double bytes_per_elem) {
  std::vector<MemoryRow> rows;
  for (double s : durations_s) {
    MemoryRow r;
    r.seconds = s;
    r.frames = static_cast<int64_t>(std::llround(s * frame_rate));
    const double T = static_cast<double>(r.frames);
    r.attn_bytes = T * T * bytes_per_elem;
    r.lpa_bytes = T * static_cast<double>(P) * bytes_per_elem;
    r.ratio = r.lpa_bytes > 0 ? r.attn_bytes / r.lpa_bytes : 0.0;
    rows.push_back(r);
  }
  return rows;
}

double implied_passes(double time_s, double bytes_per_pass, const HardwareProfile& hw) {
  return time_s * hw.bandwidth_bps / bytes_per_pass;
}

int64_t crossover_frames(int64_t d, int64_t heads, int64_t P, const HardwareProfile& hw,
                         Dtype dtype, int64_t t_lo, int64_t t_hi, int64_t step) {
  bool attn_was_faster = false;
  for (int64_t t = t_lo; t <= t_hi; t += step) {
    const double a = attention_cost(t, d, heads, hw, dtype).total_s;
    const double l = lpa_cost(t, d, P, hw, dtype).total_s;
    if (a < l) attn_was_faster = true;
    if (attn_was_faster && l < a) return t;
  }
  return -1;
}

}  // namespace lpa::perf
