#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lpa/reference.hpp"

namespace lpa::convert {

// Pulse layout of one LPA layer: per head, `pa` aperiodic + `pp` periodic +
// `pq` positional pulses with K positional basis functions.
struct LpaShape {
  int64_t d = 32;
  int64_t heads = 2;
  int64_t pa = 4, pp = 4, pq = 4;
  int64_t K = 16;
  int64_t pulses_per_head() const { return pa + pp + pq; }
};

// Seeded default initialization: predictor and positional coefficients small
// random, periods spread log-uniformly over ~[10, 512] frames, phases
// uniform, duty logits zero, amplitudes one, pulse-weight logits zero,
// identity-scaled value/output projections.
mixer::LpaParams<double> fresh_lpa(const LpaShape& shape, double tau, Rng& rng);

// Initialization from attention weights: wv/wo copied, aperiodic query p
// takes row (p mod d) of wq truncated to the hidden width; everything else
// from the seeded defaults.
mixer::LpaParams<double> selective_init(const ref::AttentionParams<double>& attn,
                                        const LpaShape& shape, double tau, Rng& rng);

struct CurriculumSchedule {
  double tau_start = 3.0;
  double tau_end = 0.5;
  int steps = 1;
  bool global_scope = false;  // re-anneal every LPA layer vs the current one
};

// Linear interpolation over the phase; clamped outside [0, steps-1].
double temperature_at(int step, const CurriculumSchedule& s);

// Decoupled-weight-decay adaptive optimizer over registered (param, grad)
// pairs; step() consumes and zeroes the gradients.
struct AdamW {
  double lr = 5e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 0.0;

  void add(Tensor<double>* param, Tensor<double>* grad, double lr_mult = 1.0);
  void step();
  size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    Tensor<double>* p;
    Tensor<double>* g;
    double mult;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

struct DataConfig {
  int64_t n = 32;
  int64_t d = 32;
  int64_t train_count = 32;
  int64_t val_count = 8;
  int64_t batch = 8;
  double noise = 0.3;
};

// Denoising task for the teacher: minimizes MSE(enc(noisy), clean).
void train_teacher(ref::ToyEncoder<double>* enc, const DataConfig& data, int steps, double lr,
                   uint64_t seed);

struct SweepHyperparams {
  double lambda1 = 0.01;
  double lambda2 = 0.001;
  double prune_threshold = 0.1;  // relative to max |amp|
  int floor_pulses = 4;
  int epochs = 2;
  int overprovision = 3;  // P_sweep = overprovision * base counts per family
  double lr = 5e-4;
  double tau_start = 3.0, tau_end = 0.5;
};

struct LayerSweepResult {
  int layer = 0;
  double mse = 0;
  int surviving = 0;
  int order_rank = 0;
  bool failed = false;
  std::vector<int> amp_histogram;  // |amp| distribution over 10 bins of [0, max]
};

struct SweepReport {
  std::vector<LayerSweepResult> layers;  // indexed by layer
  std::vector<int> order;                // layers sorted by increasing MSE
};

// Amplitudes above threshold*max, never below the floor (the floor keeps the
// largest f).
int surviving_pulses(const Tensor<double>& amp, double threshold, int floor_pulses);

double elastic_net_penalty(const Tensor<double>& amp, double lambda1, double lambda2);

SweepReport mse_sweep(const ref::ToyEncoder<double>& teacher, const DataConfig& data,
                      const SweepHyperparams& hp, const LpaShape& base_shape, uint64_t seed);

std::string sweep_csv(const SweepReport& r);

struct ConvertHyperparams {
  LpaShape shape;
  int warm_epochs = 2;
  int task_epochs = 8;
  int align_epochs = 5;
  int final_epochs = 8;
  double lr = 5e-4;
  double ffn_lr_mult = 0.1;
  double align_lr_mult = 0.5;
  double final_lr_mult = 0.2;
  double tau_start = 3.0, tau_end = 0.5;
  double budget = std::numeric_limits<double>::infinity();
};

struct StageTraceRow {
  int stage = 0;
  int layer = -1;
  std::string phase;  // baseline|warm|task|align|final
  int step = 0;
  double tau = 0;
  double loss = 0;
  double val_metric = 0;
  int reverted = 0;
};

struct ConvertResult {
  ref::ToyEncoder<double> model;
  std::vector<StageTraceRow> trace;
  int stages_done = 0;
  double final_val = 0;
  bool stopped_by_budget = false;
};

// Progressive replacement in the given order: selective init, MSE warm-start
// on the layer taps, distillation to the frozen teacher's output with the
// temperature curriculum on the current layer (FFN at 0.1x lr, layer norms
// unfrozen), then a global-anneal alignment pass over all LPA layers with
// auto-revert when the held-out metric worsens; stops once the metric
// exceeds the budget. A final joint pass tunes all LPA layers at 0.2x lr.
ConvertResult progressive_replace(const ref::ToyEncoder<double>& teacher,
                                  const std::vector<int>& order, const ConvertHyperparams& hp,
                                  const DataConfig& data, uint64_t seed);

std::string trace_csv(const std::vector<StageTraceRow>& trace);

// Distillation metric: mean squared deviation between the two encoders'
// outputs over a dataset.
double distillation_metric(const ref::ToyEncoder<double>& student,
                           const ref::ToyEncoder<double>& teacher,
                           const std::vector<Tensor<double>>& inputs);

}  // namespace lpa::convert
