#include "lpa/conversion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lpa::convert {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

gates::GateParams<double> fresh_gates(const LpaShape& s, Rng& rng) {
  const int64_t dh = s.d / s.heads;
  check(dh % 2 == 0, "head width must be even for the gate predictor");
  const int64_t d2 = dh / 2;
  const double xs = 1.0 / std::sqrt(static_cast<double>(dh));
  gates::GateParams<double> g;
  if (s.pa > 0) {
    g.ap.pred.dw = Tensor<double>({5, dh});
    rng.fill_normal(g.ap.pred.dw, 0.0, 0.4);
    g.ap.pred.w1 = Tensor<double>({dh, dh});
    rng.fill_normal(g.ap.pred.w1, 0.0, xs);
    g.ap.pred.b1 = Tensor<double>({dh});
    g.ap.pred.w2 = Tensor<double>({d2, dh});
    rng.fill_normal(g.ap.pred.w2, 0.0, xs);
    g.ap.pred.b2 = Tensor<double>({d2});
    g.ap.q = Tensor<double>({s.pa, d2});
    rng.fill_normal(g.ap.q, 0.0, 1.0 / std::sqrt(static_cast<double>(d2)));
    g.ap.fw = Tensor<double>({d2});
    rng.fill_normal(g.ap.fw, 0.0, 0.2);
    g.ap.fb = Tensor<double>({1});
    g.ap.fb.at(0) = ops::softplus_inv(3.0);  // frames of initial half-width
  } else {
    g.ap.q = Tensor<double>({0, d2});
  }

  // periods spread log-uniformly over ~[10, 512] frames
  g.per.rho = Tensor<double>({s.pp});
  g.per.phi = Tensor<double>({s.pp});
  g.per.zeta = Tensor<double>({s.pp});
  for (int64_t j = 0; j < s.pp; ++j) {
    const double frac = s.pp > 1 ? static_cast<double>(j) / static_cast<double>(s.pp - 1) : 0.0;
    const double period = 10.0 * std::pow(512.0 / 10.0, frac);
    g.per.rho.at(j) = ops::softplus_inv(std::log2(period) - 2.0);
    g.per.phi.at(j) = rng.uniform(0.0, kTwoPi);
    g.per.zeta.at(j) = 0.0;  // duty 0.5
  }

  g.pos.a = Tensor<double>({s.pq, s.K});
  g.pos.b = Tensor<double>({s.pq, s.K});
  g.pos.bias = Tensor<double>({s.pq});
  if (s.pq > 0) {
    rng.fill_normal(g.pos.a, 0.0, 0.5 / std::sqrt(static_cast<double>(s.K)));
    rng.fill_normal(g.pos.b, 0.0, 0.5 / std::sqrt(static_cast<double>(s.K)));
    rng.fill_uniform(g.pos.bias, -0.2, 0.2);
  }
  return g;
}

// Mean over batches of seq indices in fixed order.
std::vector<std::vector<int64_t>> make_batches(int64_t count, int64_t batch) {
  std::vector<std::vector<int64_t>> out;
  for (int64_t i = 0; i < count; i += batch) {
    std::vector<int64_t> b;
    for (int64_t j = i; j < std::min(count, i + batch); ++j) b.push_back(j);
    out.push_back(std::move(b));
  }
  return out;
}

double mse(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = a.at(i) - b.at(i);
    s += d * d;
  }
  return a.numel() > 0 ? s / static_cast<double>(a.numel()) : 0.0;
}

}  // namespace

mixer::LpaParams<double> fresh_lpa(const LpaShape& shape, double tau, Rng& rng) {
  check(shape.heads >= 1 && shape.d % shape.heads == 0, "d must divide into heads");
  mixer::LpaParams<double> p;
  p.d = shape.d;
  p.heads = shape.heads;
  p.tau = tau;
  for (int64_t h = 0; h < shape.heads; ++h) p.head_gates.push_back(fresh_gates(shape, rng));
  const int64_t pph = shape.pulses_per_head();
  p.wlogit = Tensor<double>({shape.heads, pph});  // uniform pulse weights
  p.amp = Tensor<double>({shape.heads, pph}, 1.0);
  p.wv = Tensor<double>({shape.d, shape.d});
  p.wo = Tensor<double>({shape.d, shape.d});
  rng.fill_normal(p.wv, 0.0, 1.0 / std::sqrt(static_cast<double>(shape.d)));
  rng.fill_normal(p.wo, 0.0, 1.0 / std::sqrt(static_cast<double>(shape.d)));
  return p;
}

mixer::LpaParams<double> selective_init(const ref::AttentionParams<double>& attn,
                                        const LpaShape& shape, double tau, Rng& rng) {
  check(attn.wv.dim(0) == shape.d, "selective_init dimension mismatch");
  mixer::LpaParams<double> p = fresh_lpa(shape, tau, rng);
  p.wv = attn.wv;
  p.wo = attn.wo;
  const int64_t dh = shape.d / shape.heads;
  const int64_t d2 = dh / 2;
  for (int64_t h = 0; h < shape.heads; ++h) {
    if (shape.pa == 0) continue;
    for (int64_t j = 0; j < shape.pa; ++j) {
      const int64_t row = (h * shape.pa + j) % shape.d;  // partial wq reading
      for (int64_t c = 0; c < d2; ++c) p.head_gates[h].ap.q.at(j, c) = attn.wq.at(row, c);
    }
  }
  return p;
}

double temperature_at(int step, const CurriculumSchedule& s) {
  if (s.steps <= 1) return s.tau_end;
  double frac = static_cast<double>(step) / static_cast<double>(s.steps - 1);
  frac = std::min(1.0, std::max(0.0, frac));
  return s.tau_start + (s.tau_end - s.tau_start) * frac;
}

void AdamW::add(Tensor<double>* param, Tensor<double>* grad, double lr_mult) {
  check(param->numel() == grad->numel(), "optimizer param/grad size mismatch");
  Slot s;
  s.p = param;
  s.g = grad;
  s.mult = lr_mult;
  s.m.assign(static_cast<size_t>(param->numel()), 0.0);
  s.v.assign(static_cast<size_t>(param->numel()), 0.0);
  slots_.push_back(std::move(s));
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (Slot& s : slots_) {
    const double a = lr * s.mult;
    for (int64_t i = 0; i < s.p->numel(); ++i) {
      const double g = s.g->at(i);
      s.m[static_cast<size_t>(i)] = beta1 * s.m[static_cast<size_t>(i)] + (1.0 - beta1) * g;
      s.v[static_cast<size_t>(i)] = beta2 * s.v[static_cast<size_t>(i)] + (1.0 - beta2) * g * g;
      const double mh = s.m[static_cast<size_t>(i)] / bc1;
      const double vh = s.v[static_cast<size_t>(i)] / bc2;
      s.p->at(i) -= a * (mh / (std::sqrt(vh) + eps) + weight_decay * s.p->at(i));
      s.g->at(i) = 0.0;
    }
  }
}

void train_teacher(ref::ToyEncoder<double>* enc, const DataConfig& data, int steps, double lr,
                   uint64_t seed) {
  Rng rng(seed);
  auto batch = ref::make_batch<double>(rng, data.train_count, data.n, data.d, data.noise);
  auto grads = ref::zeros_like(*enc);
  AdamW opt;
  opt.lr = lr;
  ref::for_each_param(*enc, grads,
                      [&](const std::string&, Tensor<double>& p, Tensor<double>& g) {
                        opt.add(&p, &g, 1.0);
                      });
  auto batches = make_batches(data.train_count, data.batch);
  for (int step = 0; step < steps; ++step) {
    const auto& idx = batches[static_cast<size_t>(step) % batches.size()];
    for (int64_t i : idx) {
      ref::EncoderCache<double> cache;
      auto y = ref::encoder_forward(batch.noisy[static_cast<size_t>(i)], *enc, &cache);
      Tensor<double> dy = y;
      const double scale = 2.0 / (static_cast<double>(y.numel()) * static_cast<double>(idx.size()));
      for (int64_t k = 0; k < y.numel(); ++k)
        dy.at(k) = scale * (y.at(k) - batch.clean[static_cast<size_t>(i)].at(k));
      ref::encoder_backward<double>(*enc, cache, dy, &grads, nullptr);
    }
    opt.step();
  }
}

int surviving_pulses(const Tensor<double>& amp, double threshold, int floor_pulses) {
  double mx = 0;
  for (int64_t i = 0; i < amp.numel(); ++i) mx = std::max(mx, std::abs(amp.at(i)));
  int count = 0;
  for (int64_t i = 0; i < amp.numel(); ++i)
    if (std::abs(amp.at(i)) > threshold * mx) ++count;
  const int total = static_cast<int>(amp.numel());
  return std::max(std::min(floor_pulses, total), count);
}

double elastic_net_penalty(const Tensor<double>& amp, double lambda1, double lambda2) {
  double l1 = 0, l2 = 0;
  for (int64_t i = 0; i < amp.numel(); ++i) {
    l1 += std::abs(amp.at(i));
    l2 += amp.at(i) * amp.at(i);
  }
  return lambda1 * l1 + lambda2 * l2;
}

SweepReport mse_sweep(const ref::ToyEncoder<double>& teacher, const DataConfig& data,
                      const SweepHyperparams& hp, const LpaShape& base_shape, uint64_t seed) {
  Rng data_rng(seed);
  auto batch = ref::make_batch<double>(data_rng, data.train_count, data.n, data.d, data.noise);

  const auto layer_count = static_cast<int>(teacher.layers.size());
  // teacher taps, fixed for the whole sweep
  std::vector<std::vector<ref::LayerTap<double>>> taps(static_cast<size_t>(data.train_count));
  for (int64_t i = 0; i < data.train_count; ++i)
    ref::encoder_forward<double>(batch.noisy[static_cast<size_t>(i)], teacher, nullptr,
                         &taps[static_cast<size_t>(i)]);

  LpaShape shape = base_shape;
  shape.pa *= hp.overprovision;
  shape.pp *= hp.overprovision;
  shape.pq *= hp.overprovision;

  SweepReport report;
  report.layers.assign(static_cast<size_t>(layer_count), LayerSweepResult{});

  auto batches = make_batches(data.train_count, data.batch);
  const int total_steps = hp.epochs * static_cast<int>(batches.size());

  for (int layer = 0; layer < layer_count; ++layer) {
    LayerSweepResult& res = report.layers[static_cast<size_t>(layer)];
    res.layer = layer;
    Rng init_rng(seed ^ (0x9e3779b97f4a7c15ull + static_cast<uint64_t>(layer)));
    auto lpa = selective_init(teacher.layers[static_cast<size_t>(layer)].attn, shape,
                              hp.tau_start, init_rng);
    auto grads = mixer::zeros_like(lpa);
    AdamW opt;
    opt.lr = hp.lr;
    mixer::for_each_param(lpa, grads,
                          [&](const std::string&, Tensor<double>& p, Tensor<double>& g) {
                            opt.add(&p, &g, 1.0);
                          });
    CurriculumSchedule sched{hp.tau_start, hp.tau_end, total_steps, false};

    int step = 0;
    bool failed = false;
    for (int epoch = 0; epoch < hp.epochs && !failed; ++epoch) {
      for (const auto& idx : batches) {
        lpa.tau = temperature_at(step, sched);
        double batch_loss = 0;
        for (int64_t i : idx) {
          const auto& tap = taps[static_cast<size_t>(i)][static_cast<size_t>(layer)];
          mixer::LpaOutput<double> out;
          mixer::LpaCache<double> cache;
          mixer::lpa_forward(tap.mix_in, lpa, &out, &cache);
          Tensor<double> dy = out.y;
          const double scale =
              2.0 / (static_cast<double>(out.y.numel()) * static_cast<double>(idx.size()));
          for (int64_t k = 0; k < out.y.numel(); ++k) {
            const double diff = out.y.at(k) - tap.mix_out.at(k);
            batch_loss += diff * diff / static_cast<double>(out.y.numel() * idx.size());
            dy.at(k) = scale * diff;
          }
          mixer::lpa_backward<double>(tap.mix_in, lpa, out, cache, dy, &grads, nullptr);
        }
        if (!std::isfinite(batch_loss)) {
          failed = true;
          break;
        }
        // elastic net on the amplitudes
        for (int64_t i = 0; i < lpa.amp.numel(); ++i) {
          const double a = lpa.amp.at(i);
          grads.amp.at(i) += hp.lambda1 * (a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0)) +
                             2.0 * hp.lambda2 * a;
        }
        opt.step();
        ++step;
      }
    }

    if (failed || !lpa.amp.all_finite()) {
      res.failed = true;
      res.mse = std::numeric_limits<double>::infinity();
      res.surviving = 0;
      continue;
    }

    lpa.tau = hp.tau_end;
    double total = 0;
    int64_t count = 0;
    for (int64_t i = 0; i < data.train_count; ++i) {
      const auto& tap = taps[static_cast<size_t>(i)][static_cast<size_t>(layer)];
      mixer::LpaOutput<double> out;
      mixer::lpa_forward(tap.mix_in, lpa, &out);
      total += mse(out.y, tap.mix_out) * static_cast<double>(out.y.numel());
      count += out.y.numel();
    }
    res.mse = count ? total / static_cast<double>(count) : 0.0;
    res.surviving = surviving_pulses(lpa.amp, hp.prune_threshold, hp.floor_pulses);

    double mx = 0;
    for (int64_t i = 0; i < lpa.amp.numel(); ++i) mx = std::max(mx, std::abs(lpa.amp.at(i)));
    res.amp_histogram.assign(10, 0);
    for (int64_t i = 0; i < lpa.amp.numel(); ++i) {
      const double frac = mx > 0 ? std::abs(lpa.amp.at(i)) / mx : 0.0;
      int bin = static_cast<int>(frac * 10.0);
      if (bin > 9) bin = 9;
      ++res.amp_histogram[static_cast<size_t>(bin)];
    }
  }

  report.order.resize(static_cast<size_t>(layer_count));
  std::iota(report.order.begin(), report.order.end(), 0);
  std::sort(report.order.begin(), report.order.end(), [&](int a, int b) {
    const double ma = report.layers[static_cast<size_t>(a)].mse;
    const double mb = report.layers[static_cast<size_t>(b)].mse;
    if (ma != mb) return ma < mb;
    return a < b;
  });
  for (size_t rank = 0; rank < report.order.size(); ++rank)
    report.layers[static_cast<size_t>(report.order[rank])].order_rank = static_cast<int>(rank);
  return report;
}

std::string sweep_csv(const SweepReport& r) {
  std::ostringstream os;
  os << "layer,mse,surviving,order_rank\n";
  for (const auto& l : r.layers)
    os << l.layer << "," << l.mse << "," << l.surviving << "," << l.order_rank << "\n";
  return os.str();
}

double distillation_metric(const ref::ToyEncoder<double>& student,
                           const ref::ToyEncoder<double>& teacher,
                           const std::vector<Tensor<double>>& inputs) {
  double total = 0;
  int64_t count = 0;
  for (const auto& x : inputs) {
    auto ys = ref::encoder_forward(x, student);
    auto yt = ref::encoder_forward(x, teacher);
    total += mse(ys, yt) * static_cast<double>(ys.numel());
    count += ys.numel();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

namespace {

// One distillation training phase over the full student; trainable tensors
// are whatever got registered in `opt`.
double run_distill_phase(ref::ToyEncoder<double>* student, ref::ToyEncoder<double>* grads,
                         AdamW* opt, const std::vector<Tensor<double>>& inputs,
                         const std::vector<Tensor<double>>& targets,
                         const std::vector<std::vector<int64_t>>& batches, int epochs,
                         const CurriculumSchedule& sched, const std::vector<int>& lpa_layers,
                         int current_layer, std::vector<StageTraceRow>* trace, int stage,
                         int layer, const char* phase, double* last_val) {
  int step = 0;
  double last_loss = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& idx : batches) {
      const double tau = temperature_at(step, sched);
      if (sched.global_scope) {
        for (int li : lpa_layers) student->layers[static_cast<size_t>(li)].lpa.tau = tau;
      } else if (current_layer >= 0) {
        student->layers[static_cast<size_t>(current_layer)].lpa.tau = tau;
      }
      double batch_loss = 0;
      for (int64_t i : idx) {
        ref::EncoderCache<double> cache;
        auto y = ref::encoder_forward(inputs[static_cast<size_t>(i)], *student, &cache);
        Tensor<double> dy = y;
        const double scale =
            2.0 / (static_cast<double>(y.numel()) * static_cast<double>(idx.size()));
        for (int64_t k = 0; k < y.numel(); ++k) {
          const double diff = y.at(k) - targets[static_cast<size_t>(i)].at(k);
          batch_loss += diff * diff / static_cast<double>(y.numel() * idx.size());
          dy.at(k) = scale * diff;
        }
        ref::encoder_backward<double>(*student, cache, dy, grads, nullptr);
      }
      opt->step();
      trace->push_back(
          {stage, layer, phase, step, tau, batch_loss, *last_val, 0});
      last_loss = batch_loss;
      ++step;
    }
  }
  return last_loss;
}

void register_lpa_params(ref::ToyEncoder<double>* enc, ref::ToyEncoder<double>* grads, int layer,
                         AdamW* opt, double mult) {
  auto& l = enc->layers[static_cast<size_t>(layer)];
  auto& g = grads->layers[static_cast<size_t>(layer)];
  mixer::for_each_param(l.lpa, g.lpa,
                        [&](const std::string&, Tensor<double>& p, Tensor<double>& gr) {
                          opt->add(&p, &gr, mult);
                        });
}

}  // namespace

ConvertResult progressive_replace(const ref::ToyEncoder<double>& teacher,
                                  const std::vector<int>& order, const ConvertHyperparams& hp,
                                  const DataConfig& data, uint64_t seed) {
  Rng data_rng(seed);
  auto train = ref::make_batch<double>(data_rng, data.train_count, data.n, data.d, data.noise);
  auto val = ref::make_batch<double>(data_rng, data.val_count, data.n, data.d, data.noise);

  std::vector<Tensor<double>> train_targets;
  for (const auto& x : train.noisy) train_targets.push_back(ref::encoder_forward(x, teacher));

  ConvertResult result;
  result.model = teacher;
  ref::ToyEncoder<double>& student = result.model;
  auto batches = make_batches(data.train_count, data.batch);
  const int spe = static_cast<int>(batches.size());

  double val_metric = distillation_metric(student, teacher, val.noisy);
  result.trace.push_back({0, -1, "baseline", 0, 0.0, 0.0, val_metric, 0});
  std::vector<int> lpa_layers;

  int stage = 0;
  for (int layer : order) {
    ++stage;
    check(layer >= 0 && layer < static_cast<int>(student.layers.size()),
          "replacement order names a layer outside the encoder");
    check(student.layers[static_cast<size_t>(layer)].kind == ref::MixerKind::attention,
          "replacement order repeats a layer");

    Rng init_rng(seed ^ (0xc2b2ae3d27d4eb4full + static_cast<uint64_t>(layer)));
    auto& slayer = student.layers[static_cast<size_t>(layer)];
    slayer.kind = ref::MixerKind::lpa;
    slayer.lpa = selective_init(teacher.layers[static_cast<size_t>(layer)].attn, hp.shape,
                                hp.tau_start, init_rng);
    const int64_t ptot = hp.shape.heads * hp.shape.pulses_per_head();
    slayer.lpa.xproj = Tensor<double>({ptot, ptot});  // cross-layer bias starts at zero
    lpa_layers.push_back(layer);
    std::sort(lpa_layers.begin(), lpa_layers.end());

    // MSE warm-start on the layer's taps against the original attention
    {
      auto grads = ref::zeros_like(student);
      AdamW opt;
      opt.lr = hp.lr;
      register_lpa_params(&student, &grads, layer, &opt, 1.0);
      int step = 0;
      for (int epoch = 0; epoch < hp.warm_epochs; ++epoch) {
        for (const auto& idx : batches) {
          double batch_loss = 0;
          for (int64_t i : idx) {
            ref::EncoderCache<double> cache;
            ref::encoder_forward(train.noisy[static_cast<size_t>(i)], student, &cache);
            const auto& lc = cache.layers[static_cast<size_t>(layer)];
            auto target = ref::attention_forward(
                lc.mix_in, teacher.layers[static_cast<size_t>(layer)].attn);
            Tensor<double> dy = lc.lpa_out.y;
            const double scale =
                2.0 / (static_cast<double>(dy.numel()) * static_cast<double>(idx.size()));
            for (int64_t k = 0; k < dy.numel(); ++k) {
              const double diff = lc.lpa_out.y.at(k) - target.at(k);
              batch_loss += diff * diff / static_cast<double>(dy.numel() * idx.size());
              dy.at(k) = scale * diff;
            }
            mixer::lpa_backward<double>(lc.mix_in, slayer.lpa, lc.lpa_out, lc.lpa, dy,
                                &grads.layers[static_cast<size_t>(layer)].lpa, nullptr,
                                lc.had_prev_mean ? &lc.prev_gate_mean : nullptr);
          }
          opt.step();
          result.trace.push_back(
              {stage, layer, "warm", step, hp.tau_start, batch_loss, val_metric, 0});
          ++step;
        }
      }
    }

    // distillation training with the temperature curriculum on this layer;
    // the layer's FFN joins at reduced lr, its layer norms at full lr
    {
      auto grads = ref::zeros_like(student);
      AdamW opt;
      opt.lr = hp.lr;
      register_lpa_params(&student, &grads, layer, &opt, 1.0);
      auto& sl = student.layers[static_cast<size_t>(layer)];
      auto& gl = grads.layers[static_cast<size_t>(layer)];
      opt.add(&sl.ffn.w1, &gl.ffn.w1, hp.ffn_lr_mult);
      opt.add(&sl.ffn.b1, &gl.ffn.b1, hp.ffn_lr_mult);
      opt.add(&sl.ffn.w2, &gl.ffn.w2, hp.ffn_lr_mult);
      opt.add(&sl.ffn.b2, &gl.ffn.b2, hp.ffn_lr_mult);
      opt.add(&sl.ln1.gamma, &gl.ln1.gamma, 1.0);
      opt.add(&sl.ln1.beta, &gl.ln1.beta, 1.0);
      opt.add(&sl.ln2.gamma, &gl.ln2.gamma, 1.0);
      opt.add(&sl.ln2.beta, &gl.ln2.beta, 1.0);
      CurriculumSchedule sched{hp.tau_start, hp.tau_end, hp.task_epochs * spe, false};
      run_distill_phase(&student, &grads, &opt, train.noisy, train_targets, batches,
                        hp.task_epochs, sched, lpa_layers, layer, &result.trace, stage, layer,
                        "task", &val_metric);
      val_metric = distillation_metric(student, teacher, val.noisy);
    }

    // alignment: every LPA layer fine-tuned at reduced lr with a global
    // re-anneal; revert when the held-out metric worsens
    {
      ref::ToyEncoder<double> snapshot = student;
      const double pre_metric = val_metric;
      auto grads = ref::zeros_like(student);
      AdamW opt;
      opt.lr = hp.lr;
      for (int li : lpa_layers) register_lpa_params(&student, &grads, li, &opt, hp.align_lr_mult);
      CurriculumSchedule sched{hp.tau_start, hp.tau_end, hp.align_epochs * spe, true};
      run_distill_phase(&student, &grads, &opt, train.noisy, train_targets, batches,
                        hp.align_epochs, sched, lpa_layers, layer, &result.trace, stage, layer,
                        "align", &val_metric);
      const double post_metric = distillation_metric(student, teacher, val.noisy);
      int reverted = 0;
      if (post_metric > pre_metric) {
        student = snapshot;
        val_metric = pre_metric;
        reverted = 1;
      } else {
        val_metric = post_metric;
      }
      result.trace.push_back({stage, layer, "align", hp.align_epochs * spe, hp.tau_end, 0.0,
                              val_metric, reverted});
    }

    result.stages_done = stage;
    if (val_metric > hp.budget) {
      result.stopped_by_budget = true;
      break;
    }
  }

  // final joint fine-tuning of all LPA layers
  if (!result.stopped_by_budget && !lpa_layers.empty() && hp.final_epochs > 0) {
    auto grads = ref::zeros_like(student);
    AdamW opt;
    opt.lr = hp.lr;
    for (int li : lpa_layers) register_lpa_params(&student, &grads, li, &opt, hp.final_lr_mult);
    CurriculumSchedule sched{hp.tau_end, hp.tau_end, hp.final_epochs * spe, true};
    run_distill_phase(&student, &grads, &opt, train.noisy, train_targets, batches,
                      hp.final_epochs, sched, lpa_layers, -1, &result.trace, stage, -1, "final",
                      &val_metric);
    val_metric = distillation_metric(student, teacher, val.noisy);
    result.trace.push_back(
        {stage, -1, "final", hp.final_epochs * spe, hp.tau_end, 0.0, val_metric, 0});
  }

  result.final_val = val_metric;
  return result;
}

std::string trace_csv(const std::vector<StageTraceRow>& trace) {
  std::ostringstream os;
  os << "stage,layer,phase,step,tau,loss,val_metric,reverted\n";
  for (const auto& r : trace)
    os << r.stage << "," << r.layer << "," << r.phase << "," << r.step << "," << r.tau << ","
       << r.loss << "," << r.val_metric << "," << r.reverted << "\n";
  return os.str();
}

}  // namespace lpa::convert
