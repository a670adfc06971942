// pulse: verification, benchmarks, sweep/convert runs on the toy encoder,
// and soft/hard inference for the learnable pulse accumulator.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lpa/bench.hpp"
#include "lpa/conversion.hpp"
#include "lpa/hardgate.hpp"
#include "lpa/perfmodel.hpp"
#include "lpa/serialize.hpp"
#include "verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using lpa::Tensor64;
namespace ref = lpa::ref;
namespace convert = lpa::convert;
namespace hard = lpa::hard;
namespace mixer = lpa::mixer;
namespace perf = lpa::perf;

namespace {

uint64_t default_seed() {
  if (const char* env = std::getenv("PULSE_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return static_cast<uint64_t>(v);
    std::fprintf(stderr, "warning: ignoring unparsable PULSE_SEED=%s\n", env);
  }
  return 42;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream f(path);
  lpa::check(f.good(), "cannot open for writing: " + path.string());
  f << text;
  lpa::check(f.good(), "write failed: " + path.string());
  std::printf("wrote %s\n", path.string().c_str());
}

struct RunConfig {
  uint64_t seed = default_seed();
  int64_t layers = 4;
  int64_t d = 32;
  int64_t heads = 2;
  int64_t pa = 4, pp = 4, pq = 4;
  int64_t K = 16;
  convert::DataConfig data;
  int teacher_steps = 300;
  double teacher_lr = 1e-3;
  convert::ConvertHyperparams train;
  convert::SweepHyperparams sweep;
  std::string out = ".";
  std::string teacher_ckpt;

  convert::LpaShape shape() const {
    convert::LpaShape s;
    s.d = d;
    s.heads = heads;
    s.pa = pa;
    s.pp = pp;
    s.pq = pq;
    s.K = K;
    return s;
  }
};

// Config file values load first; command-line flags override them afterwards
// because CLI11 parses flags after this runs.
void apply_config_file(RunConfig* cfg, const std::string& path) {
  std::ifstream f(path);
  lpa::check(f.good(), "cannot open config file: " + path);
  json j = json::parse(f);
  cfg->seed = j.value("seed", cfg->seed);
  if (j.contains("model")) {
    const auto& m = j["model"];
    cfg->layers = m.value("layers", cfg->layers);
    cfg->d = m.value("d", cfg->d);
    cfg->heads = m.value("heads", cfg->heads);
    cfg->K = m.value("K", cfg->K);
    if (m.contains("pulses")) {
      cfg->pa = m["pulses"].value("aperiodic", cfg->pa);
      cfg->pp = m["pulses"].value("periodic", cfg->pp);
      cfg->pq = m["pulses"].value("positional", cfg->pq);
    }
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    cfg->data.n = d.value("n", cfg->data.n);
    cfg->data.train_count = d.value("train", cfg->data.train_count);
    cfg->data.val_count = d.value("val", cfg->data.val_count);
    cfg->data.batch = d.value("batch", cfg->data.batch);
    cfg->data.noise = d.value("noise", cfg->data.noise);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    cfg->teacher_steps = t.value("teacher_steps", cfg->teacher_steps);
    cfg->teacher_lr = t.value("teacher_lr", cfg->teacher_lr);
    cfg->train.warm_epochs = t.value("warm_epochs", cfg->train.warm_epochs);
    cfg->train.task_epochs = t.value("task_epochs", cfg->train.task_epochs);
    cfg->train.align_epochs = t.value("align_epochs", cfg->train.align_epochs);
    cfg->train.final_epochs = t.value("final_epochs", cfg->train.final_epochs);
    cfg->train.lr = t.value("lr", cfg->train.lr);
    cfg->train.tau_start = t.value("tau_start", cfg->train.tau_start);
    cfg->train.tau_end = t.value("tau_end", cfg->train.tau_end);
    cfg->train.budget = t.value("budget", cfg->train.budget);
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    cfg->sweep.lambda1 = s.value("lambda1", cfg->sweep.lambda1);
    cfg->sweep.lambda2 = s.value("lambda2", cfg->sweep.lambda2);
    cfg->sweep.prune_threshold = s.value("prune_threshold", cfg->sweep.prune_threshold);
    cfg->sweep.floor_pulses = s.value("floor", cfg->sweep.floor_pulses);
    cfg->sweep.epochs = s.value("epochs", cfg->sweep.epochs);
    cfg->sweep.overprovision = s.value("overprovision", cfg->sweep.overprovision);
  }
  cfg->out = j.value("out", cfg->out);
}

ref::ToyEncoder<double> obtain_teacher(const RunConfig& cfg) {
  if (!cfg.teacher_ckpt.empty()) {
    lpa::check(fs::exists(cfg.teacher_ckpt), "missing checkpoint: " + cfg.teacher_ckpt);
    return lpa::io::load_encoder(cfg.teacher_ckpt);
  }
  lpa::check(cfg.d % (2 * cfg.heads) == 0, "d must be divisible by 2*heads");
  lpa::Rng rng(cfg.seed);
  auto enc = ref::make_encoder<double>(cfg.d, cfg.heads, cfg.layers, rng);
  convert::DataConfig data = cfg.data;
  data.d = cfg.d;
  std::printf("training toy teacher: L=%lld d=%lld heads=%lld steps=%d\n",
              static_cast<long long>(cfg.layers), static_cast<long long>(cfg.d),
              static_cast<long long>(cfg.heads), cfg.teacher_steps);
  convert::train_teacher(&enc, data, cfg.teacher_steps, cfg.teacher_lr, cfg.seed + 1);
  return enc;
}

// Hard-gate inference over a converted encoder; LPA layers compile to
// segment programs with cross-layer biases chained through the coverage
// fractions of the previous LPA layer.
Tensor64 hard_encoder_forward(const Tensor64& x, const ref::ToyEncoder<double>& enc,
                              hard::HardStrategy strategy,
                              std::vector<std::vector<hard::SegmentProgram>>* all_programs,
                              double* avg_active) {
  Tensor64 cur = x;
  Tensor64 prev_mean;
  bool have_prev = false;
  double active_sum = 0;
  int active_layers = 0;
  for (const auto& layer : enc.layers) {
    auto mix_in = ref::layernorm_forward(cur, layer.ln1, static_cast<ref::LnCache<double>*>(nullptr));
    Tensor64 mix;
    if (layer.kind == ref::MixerKind::attention) {
      mix = ref::attention_forward(mix_in, layer.attn);
    } else {
      const auto& p = layer.lpa;
      const int64_t dh = p.head_dim();
      Tensor64 bias;
      if (have_prev && p.xproj.numel() > 0)
        bias = lpa::gates::cross_layer_bias(prev_mean, p.xproj);
      std::vector<hard::SegmentProgram> progs;
      const int64_t pph = p.pulses_per_head();
      for (int64_t h = 0; h < p.heads; ++h) {
        Tensor64 xh({mix_in.dim(0), dh});
        for (int64_t t = 0; t < mix_in.dim(0); ++t)
          for (int64_t c = 0; c < dh; ++c) xh.at(t, c) = mix_in.at(t, h * dh + c);
        Tensor64 bias_h;
        if (bias.numel() > 0) {
          bias_h = Tensor64({pph});
          for (int64_t pu = 0; pu < pph; ++pu) bias_h.at(pu) = bias.at(h * pph + pu);
        }
        progs.push_back(hard::compile_gates_with_bias(xh, p.head_gates[h], hard::HardGateOptions{},
                                                      bias_h.numel() ? &bias_h : nullptr));
      }
      hard::HardForwardStats stats;
      mix = hard::hard_forward(mix_in, p, progs, strategy, &stats);
      active_sum += stats.avg_active_pulses;
      ++active_layers;
      // coverage fractions feed the next LPA layer's coordination bias
      prev_mean = Tensor64({p.heads * pph});
      for (int64_t h = 0; h < p.heads; ++h)
        for (int64_t pu = 0; pu < pph; ++pu)
          prev_mean.at(h * pph + pu) =
              static_cast<double>(progs[static_cast<size_t>(h)].pulses[static_cast<size_t>(pu)].covered) /
              static_cast<double>(mix_in.dim(0));
      have_prev = true;
      if (all_programs) all_programs->push_back(std::move(progs));
    }
    for (int64_t i = 0; i < cur.numel(); ++i) cur.at(i) += mix.at(i);
    auto f_in = ref::layernorm_forward(cur, layer.ln2, static_cast<ref::LnCache<double>*>(nullptr));
    auto f = ref::ffn_forward(f_in, layer.ffn, static_cast<ref::FfnCache<double>*>(nullptr));
    for (int64_t i = 0; i < cur.numel(); ++i) cur.at(i) += f.at(i);
  }
  if (avg_active) *avg_active = active_layers ? active_sum / active_layers : 0.0;
  return cur;
}

int cmd_bench_scaling(const lpa::bench::ScalingConfig& cfg, const std::string& out, bool plot) {
  auto rows = lpa::bench::run_scaling(cfg);
  const std::string csv = lpa::bench::scaling_csv(rows);
  std::printf("%s", csv.c_str());
  write_file(fs::path(out) / "scaling.csv", csv);
  if (plot) write_file(fs::path(out) / "scaling.svg", lpa::bench::scaling_svg(rows));

  std::vector<double> ns, attn, lpa_ms;
  for (const auto& r : rows) {
    ns.push_back(static_cast<double>(r.n));
    attn.push_back(r.attn_ms);
    lpa_ms.push_back(r.lpa_ms);
  }
  if (rows.size() >= 2) {
    std::printf("log-log slope: attention %.3f, lpa %.3f\n",
                lpa::bench::loglog_slope(ns, attn), lpa::bench::loglog_slope(ns, lpa_ms));
  }
  return 0;
}

int cmd_bench_roofline(const perf::HardwareProfile& hw, int64_t T, int64_t d, int64_t heads,
                       int64_t P, int64_t P_alt, perf::Dtype dtype, const std::string& out) {
  auto a = perf::attention_cost(T, d, heads, hw, dtype);
  auto l = perf::lpa_cost(T, d, P, hw, dtype);
  auto l2 = perf::lpa_cost(T, d, P_alt, hw, dtype);

  std::ostringstream csv;
  csv << "component,attention_us,lpa_p" << P << "_us,lpa_p" << P_alt << "_us\n";
  const char* attn_names[4] = {"linear_projections", "qk", "softmax", "scores_v"};
  const char* lpa_names[4] = {"linear_projections", "gate_prediction", "elementwise",
                              "accumulation"};
  for (int i = 0; i < 4; ++i) {
    csv << attn_names[i] << "/" << lpa_names[i] << ","
        << a.component(attn_names[i]).time_s * 1e6 << ","
        << l.component(lpa_names[i]).time_s * 1e6 << ","
        << l2.component(lpa_names[i]).time_s * 1e6 << "\n";
  }
  csv << "total_per_layer," << a.total_s * 1e6 << "," << l.total_s * 1e6 << ","
      << l2.total_s * 1e6 << "\n";
  csv << "total_x12_ms," << a.total_s * 12e3 << "," << l.total_s * 12e3 << ","
      << l2.total_s * 12e3 << "\n";
  // pass counts implied by the published memory-bound entries (2110 us
  // softmax, 201 us element-wise at T=6000, d=768, 12 heads)
  if (T == 6000 && d == 768 && heads == 12) {
    csv << "implied_softmax_passes,"
        << perf::implied_passes(2110e-6, static_cast<double>(heads) * T * T *
                                             perf::HardwareProfile::bytes_per_elem(dtype),
                                hw)
        << ",,\n";
    csv << "implied_elementwise_passes,,"
        << perf::implied_passes(201e-6, static_cast<double>(T) * d * 4.0, hw) << ",\n";
  }
  std::printf("%s", csv.str().c_str());
  write_file(fs::path(out) / "roofline.csv", csv.str());

  const int64_t cross = perf::crossover_frames(d, heads, P, hw, dtype);
  if (cross > 0)
    std::printf("model crossover: lpa faster beyond ~%lld frames (%.1f s at 50 Hz)\n",
                static_cast<long long>(cross), static_cast<double>(cross) / 50.0);
  return 0;
}

int cmd_bench_memory(const std::vector<double>& durations, double frame_rate, int64_t P,
                     const std::string& out) {
  auto rows = perf::memory_table(durations, frame_rate, P, 4.0);
  std::ostringstream csv;
  csv << "duration_s,frames,attention_mb,lpa_kb,ratio\n";
  for (const auto& r : rows)
    csv << r.seconds << "," << r.frames << "," << r.attn_bytes / (1024.0 * 1024.0) << ","
        << r.lpa_bytes / 1024.0 << "," << std::llround(r.ratio) << "\n";
  std::printf("%s", csv.str().c_str());
  write_file(fs::path(out) / "memory.csv", csv.str());
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  auto teacher = obtain_teacher(cfg);
  convert::DataConfig data = cfg.data;
  data.d = cfg.d;
  auto report = convert::mse_sweep(teacher, data, cfg.sweep, cfg.shape(), cfg.seed + 2);
  const std::string csv = convert::sweep_csv(report);
  std::printf("%s", csv.c_str());
  std::printf("replacement order:");
  for (int l : report.order) std::printf(" %d", l);
  std::printf("\n");
  write_file(fs::path(cfg.out) / "sweep.csv", csv);

  json extras;
  for (const auto& l : report.layers)
    extras["amp_histograms"][std::to_string(l.layer)] = l.amp_histogram;
  extras["order"] = report.order;
  write_file(fs::path(cfg.out) / "sweep_report.json", extras.dump(2));
  return 0;
}

int cmd_convert(const RunConfig& cfg, const std::string& order_flag) {
  auto teacher = obtain_teacher(cfg);
  convert::DataConfig data = cfg.data;
  data.d = cfg.d;

  std::vector<int> order;
  if (order_flag == "mse" || order_flag == "reverse") {
    auto report = convert::mse_sweep(teacher, data, cfg.sweep, cfg.shape(), cfg.seed + 2);
    order = report.order;
    if (order_flag == "reverse") std::reverse(order.begin(), order.end());
    write_file(fs::path(cfg.out) / "sweep.csv", convert::sweep_csv(report));
  } else {
    std::stringstream ss(order_flag);
    std::string tok;
    while (std::getline(ss, tok, ',')) order.push_back(std::stoi(tok));
  }
  std::printf("replacement order:");
  for (int l : order) std::printf(" %d", l);
  std::printf("\n");

  convert::ConvertHyperparams hp = cfg.train;
  hp.shape = cfg.shape();
  auto result = convert::progressive_replace(teacher, order, hp, data, cfg.seed + 3);
  write_file(fs::path(cfg.out) / "trace.csv", convert::trace_csv(result.trace));
  lpa::io::save_encoder(result.model, (fs::path(cfg.out) / "checkpoint.json").string());
  std::printf("wrote %s\n", (fs::path(cfg.out) / "checkpoint.json").string().c_str());
  lpa::io::save_encoder(teacher, (fs::path(cfg.out) / "teacher.json").string());
  std::printf("stages done: %d, final distillation metric: %.6g%s\n", result.stages_done,
              result.final_val, result.stopped_by_budget ? " (stopped by budget)" : "");
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& input, bool hard_mode,
              const std::string& strategy, bool compare, const std::string& dump_programs,
              bool strict, const std::string& out) {
  lpa::check(fs::exists(ckpt), "missing checkpoint: " + ckpt);
  lpa::check(fs::exists(input), "missing input tensor file: " + input);
  auto enc = lpa::io::load_encoder(ckpt);
  auto x = lpa::io::load_tensor_file(input);
  lpa::check(x.rank() == 2 && x.dim(1) == enc.d,
             "input must be (n, d) with d matching the checkpoint");

  const hard::HardStrategy strat =
      strategy == "prefix" ? hard::HardStrategy::prefix : hard::HardStrategy::dense;

  if (strict) {
    for (size_t li = 0; li < enc.layers.size(); ++li) {
      if (enc.layers[li].kind != ref::MixerKind::lpa) continue;
      // evaluate the margin condition on this layer's mixing input
      Tensor64 cur = x;
      ref::EncoderCache<double> cache;
      ref::encoder_forward(x, enc, &cache);
      auto viol = hard::saturation_violations(cache.layers[li].mix_in, enc.layers[li].lpa,
                                              0.01, 0.05);
      if (!viol.empty()) {
        std::ostringstream os;
        os << "warning: layer " << li << " violates the saturation margin at " << viol.size()
           << " positions:";
        for (size_t i = 0; i < viol.size() && i < 16; ++i) os << " " << viol[i];
        if (viol.size() > 16) os << " ...";
        std::fprintf(stderr, "%s\n", os.str().c_str());
      }
    }
  }

  std::vector<std::vector<hard::SegmentProgram>> programs;
  double avg_active = 0;
  Tensor64 y;
  if (hard_mode || compare || !dump_programs.empty()) {
    y = hard_encoder_forward(x, enc, strat, &programs, &avg_active);
    if (avg_active > 0)
      std::printf("average active pulses per frame: %.3f\n", avg_active);
  }
  Tensor64 y_soft;
  if (!hard_mode || compare) y_soft = ref::encoder_forward(x, enc);

  if (compare) {
    double dev = 0;
    for (int64_t i = 0; i < y.numel(); ++i)
      dev = std::max(dev, std::abs(y.at(i) - y_soft.at(i)));
    std::printf("max abs deviation between soft and hard paths: %.6g\n", dev);
  }
  if (!dump_programs.empty()) {
    json all = json::array();
    for (const auto& layer_progs : programs)
      all.push_back(json::parse(hard::programs_to_json(layer_progs)));
    write_file(dump_programs, all.dump(2));
  }

  const Tensor64& result = hard_mode ? y : y_soft;
  lpa::io::save_tensor_file(result, (fs::path(out) / "output.json").string());
  std::printf("wrote %s\n", (fs::path(out) / "output.json").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learnable pulse accumulator: verification, benchmarks, conversion, inference"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  // verify
  auto* verify = app.add_subcommand("verify", "run the invariant/property suite");
  uint64_t verify_seed = default_seed();
  bool fault = false;
  verify->add_option("--seed", verify_seed, "base seed for the property instances");
  verify->add_flag("--self-test-fault", fault, "inject a failing property (harness check)");

  // bench
  auto* bench = app.add_subcommand("bench", "benchmarks and analytic tables");
  bench->require_subcommand(1);
  auto* scaling = bench->add_subcommand("scaling", "measured attention vs lpa forward time");
  lpa::bench::ScalingConfig scfg;
  std::string bench_out = ".";
  bool plot = false;
  scaling->add_option("--sizes", scfg.sizes, "sequence lengths");
  scaling->add_option("--d", scfg.d, "model width");
  scaling->add_option("--heads", scfg.heads, "head count");
  scaling->add_option("--iters", scfg.iters, "measured iterations (median reported)")
      ->check(CLI::Range(10, 1000));
  scaling->add_option("--warmup", scfg.warmup, "warmup iterations")->check(CLI::Range(3, 100));
  scaling->add_option("--seed", scfg.seed, "parameter seed");
  scaling->add_option("--out", bench_out, "output directory");
  scaling->add_flag("--plot", plot, "write a log-scale SVG plot");

  auto* roofline = bench->add_subcommand("roofline", "analytic per-layer cost table");
  std::string profile_path;
  int64_t rT = 6000, rd = 768, rheads = 12, rP = 12, rPalt = 36;
  std::string rdtype = "f16";
  roofline->add_option("--profile", profile_path, "hardware profile JSON (default m4-pro)");
  roofline->add_option("--T", rT, "frames");
  roofline->add_option("--d", rd, "model width");
  roofline->add_option("--heads", rheads, "head count");
  roofline->add_option("--P", rP, "pulse count");
  roofline->add_option("--P-alt", rPalt, "alternative pulse count");
  roofline->add_option("--dtype", rdtype, "f16 or f32")->check(CLI::IsMember({"f16", "f32"}));
  roofline->add_option("--out", bench_out, "output directory");

  auto* memory = bench->add_subcommand("memory", "per-layer gate/attention memory table");
  std::vector<double> durations = {10, 30, 60, 120};
  double frame_rate = 50.0;
  int64_t mP = 12;
  memory->add_option("--durations", durations, "audio durations in seconds");
  memory->add_option("--frame-rate", frame_rate, "frames per second");
  memory->add_option("--P", mP, "pulse count");
  memory->add_option("--out", bench_out, "output directory");

  // perf: both analytic tables in one shot
  auto* perf_cmd = app.add_subcommand("perf", "emit both analytic tables (roofline + memory)");
  perf_cmd->add_option("--out", bench_out, "output directory");

  // sweep / convert share the run configuration; config-file values load
  // first and explicitly passed flags override them afterwards
  uint64_t seed_flag = cfg.seed;
  std::string out_flag = cfg.out, teacher_flag;
  int64_t layers_flag = cfg.layers, d_flag = cfg.d, heads_flag = cfg.heads;
  double budget_flag = cfg.train.budget;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed_flag, "run seed");
    cmd->add_option("--out", out_flag, "output directory");
    cmd->add_option("--teacher", teacher_flag, "teacher checkpoint (trains one if absent)");
    cmd->add_option("--layers", layers_flag, "toy encoder depth");
    cmd->add_option("--d", d_flag, "toy encoder width");
    cmd->add_option("--heads", heads_flag, "toy encoder heads");
  };

  auto* sweep = app.add_subcommand("sweep", "per-layer MSE diagnostic sweep on the toy teacher");
  add_run_flags(sweep);

  auto* conv = app.add_subcommand("convert", "progressive replacement on the toy teacher");
  std::string order_flag = "mse";
  conv->add_option("--order", order_flag, "mse | reverse | comma-separated layer list");
  conv->add_option("--budget", budget_flag, "stop once the validation metric exceeds this");
  add_run_flags(conv);

  // infer
  auto* infer = app.add_subcommand("infer", "run soft or hard inference on a tensor file");
  std::string ckpt, input, dump_programs, strategy = "dense", infer_out = ".";
  bool hard_mode = false, compare = false, strict = false;
  infer->add_option("--checkpoint", ckpt, "encoder checkpoint")->required();
  infer->add_option("--input", input, "input tensor JSON file")->required();
  infer->add_flag("--hard", hard_mode, "compile gates and run the hard path");
  infer->add_option("--strategy", strategy, "hard accumulation strategy")
      ->check(CLI::IsMember({"dense", "prefix"}));
  infer->add_flag("--compare", compare, "print max abs deviation between soft and hard paths");
  infer->add_option("--dump-programs", dump_programs, "write compiled segment programs JSON");
  infer->add_flag("--strict", strict, "warn about saturation-margin violations");
  infer->add_option("--out", infer_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (!config_path.empty()) apply_config_file(&cfg, config_path);
    CLI::App* run_cmd = sweep->parsed() ? static_cast<CLI::App*>(sweep)
                                        : (conv->parsed() ? static_cast<CLI::App*>(conv) : nullptr);
    if (run_cmd) {
      if (run_cmd->count("--seed")) cfg.seed = seed_flag;
      if (run_cmd->count("--out")) cfg.out = out_flag;
      if (run_cmd->count("--teacher")) cfg.teacher_ckpt = teacher_flag;
      if (run_cmd->count("--layers")) cfg.layers = layers_flag;
      if (run_cmd->count("--d")) cfg.d = d_flag;
      if (run_cmd->count("--heads")) cfg.heads = heads_flag;
      if (run_cmd == conv && run_cmd->count("--budget")) cfg.train.budget = budget_flag;
    }
    if (verify->parsed()) return pulse_cli::run_verify(verify_seed, fault);
    if (scaling->parsed()) return cmd_bench_scaling(scfg, bench_out, plot);
    if (roofline->parsed()) {
      perf::HardwareProfile hw = perf::m4_pro();
      if (!profile_path.empty()) {
        std::ifstream f(profile_path);
        lpa::check(f.good(), "cannot open profile: " + profile_path);
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        hw = perf::profile_from_json(text);
      }
      return cmd_bench_roofline(hw, rT, rd, rheads, rP, rPalt,
                                rdtype == "f16" ? perf::Dtype::f16 : perf::Dtype::f32,
                                bench_out);
    }
    if (memory->parsed()) return cmd_bench_memory(durations, frame_rate, mP, bench_out);
    if (perf_cmd->parsed()) {
      cmd_bench_roofline(perf::m4_pro(), 6000, 768, 12, 12, 36, perf::Dtype::f16, bench_out);
      return cmd_bench_memory({10, 30, 60, 120}, 50.0, 12, bench_out);
    }
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (conv->parsed()) return cmd_convert(cfg, order_flag);
    if (infer->parsed())
      return cmd_infer(ckpt, input, hard_mode, strategy, compare, dump_programs, strict,
                       infer_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
