#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpa/gates.hpp"
#include "lpa/mixer.hpp"
#include "lpa/tensor.hpp"

namespace lpa::hard {

// Inclusive integer frame interval.
struct Segment {
  int64_t s = 0, e = 0;
};

struct PulseProgram {
  gates::GateFamily family = gates::GateFamily::aperiodic;
  std::vector<Segment> segments;  // sorted, disjoint, within [0, n-1]
  int64_t covered = 0;            // total frame count across segments
  bool active = false;
};

// Compiled tau->0 gates for one head; pulse order matches the soft gate
// matrix columns.
struct SegmentProgram {
  int64_t n = 0;
  std::vector<PulseProgram> pulses;
};

struct HardGateOptions {
  // Half-width recomputed with the argmax one-hot weights (default), or
  // reused from the soft softmax evaluated at soft_tau.
  bool recompute_delta = true;
  double soft_tau = 0.01;
};

enum class HardStrategy { dense, prefix };

// Aperiodic pulses collapse to argmax: one interval
// [round(c-delta), round(c+delta)] ∩ [0, n-1], ties broken toward the lowest
// index, rounding half away from zero.
template <typename T>
SegmentProgram compile_aperiodic(const Tensor<T>& x, const gates::AperiodicParams<T>& p,
                                 const HardGateOptions& opt = {});

// Periodic on-regions from the zero-crossings of cos(2*pi*t/T - phi) against
// cos(pi*d); at most ceil(n/T)+1 segments per pulse. Duty below 1e-6 compiles
// to an empty program.
template <typename T>
SegmentProgram compile_periodic(const gates::PeriodicParams<T>& p, int64_t n);

// Positional masks thresholded at logit zero, cached by (parameter hash, n).
template <typename T>
SegmentProgram compile_positional(const gates::PositionalParams<T>& p, int64_t n);

// All three families for one head, in soft column order.
template <typename T>
SegmentProgram compile_gates(const Tensor<T>& x_head, const gates::GateParams<T>& p,
                             const HardGateOptions& opt = {});

// As compile_gates, with one cross-layer pre-sigmoid offset per pulse: the
// indicator thresholds shift accordingly (aperiodic widths by beta, periodic
// duty in cos space, positional logit zero).
template <typename T>
SegmentProgram compile_gates_with_bias(const Tensor<T>& x_head, const gates::GateParams<T>& p,
                                       const HardGateOptions& opt, const Tensor<T>* bias);

// Per-head programs for a full layer (aperiodic compilation consumes the
// head's input slice).
template <typename T>
std::vector<SegmentProgram> compile_layer(const Tensor<T>& x, const mixer::LpaParams<T>& p,
                                          const HardGateOptions& opt = {});

// v_bar_p = (1/|S_p|) sum_i (C[e_i+1] - C[s_i]) over prefix sums of wv x.
template <typename T>
Tensor<T> prefix_accumulate(const Tensor<T>& x, const SegmentProgram& prog, const Tensor<T>& wv);

struct HardForwardStats {
  double avg_active_pulses = 0;  // mean covering-pulse count per (frame, head)
};

// Eq. 1 with binary gates. Both strategies produce the same output up to
// floating reassociation; dense materializes the n x P gate matrix and uses
// G^T V, prefix uses range sums and range adds.
template <typename T>
Tensor<T> hard_forward(const Tensor<T>& x, const mixer::LpaParams<T>& p,
                       const std::vector<SegmentProgram>& programs,
                       HardStrategy strategy = HardStrategy::dense,
                       HardForwardStats* stats = nullptr);

std::string programs_to_json(const std::vector<SegmentProgram>& programs);

// Positions violating the saturation margin |pre-sigmoid logit| >= margin at
// the given tau (per head, for `infer --hard --strict` diagnostics).
template <typename T>
std::vector<int64_t> saturation_violations(const Tensor<T>& x, const mixer::LpaParams<T>& p,
                                           T tau, T margin);

}  // namespace lpa::hard
