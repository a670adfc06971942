#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpa/mixer.hpp"
#include "lpa/rng.hpp"
#include "lpa/tensor.hpp"

namespace lpa::ref {

// Standard multi-head softmax attention, the O(n^2) comparator and the
// teacher for the conversion recipe.
template <typename T>
struct AttentionParams {
  Tensor<T> wq, wk, wv, wo;  // (d, d)
  int64_t heads = 1;
};

template <typename T>
struct AttentionCache {
  Tensor<T> q, k, v;               // (n, d)
  std::vector<Tensor<T>> probs;    // per head, (n, n)
  Tensor<T> concat;                // (n, d), pre-wo
};

template <typename T>
Tensor<T> attention_forward(const Tensor<T>& x, const AttentionParams<T>& p,
                            AttentionCache<T>* cache = nullptr);

template <typename T>
void attention_backward(const Tensor<T>& x, const AttentionParams<T>& p,
                        const AttentionCache<T>& cache, const Tensor<T>& dy,
                        AttentionParams<T>* grads, Tensor<T>* dx);

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma, beta;  // (d)
};

template <typename T>
struct LnCache {
  Tensor<T> xhat;  // (n, d)
  Tensor<T> rstd;  // (n)
};

template <typename T>
Tensor<T> layernorm_forward(const Tensor<T>& x, const LayerNormParams<T>& p,
                            LnCache<T>* cache = nullptr);

template <typename T>
void layernorm_backward(const LayerNormParams<T>& p, const LnCache<T>& cache, const Tensor<T>& dy,
                        LayerNormParams<T>* grads, Tensor<T>* dx);

template <typename T>
struct FfnParams {
  Tensor<T> w1, b1;  // (4d, d), (4d)
  Tensor<T> w2, b2;  // (d, 4d), (d)
};

template <typename T>
struct FfnCache {
  Tensor<T> in, z1, a1;
};

template <typename T>
Tensor<T> ffn_forward(const Tensor<T>& x, const FfnParams<T>& p, FfnCache<T>* cache = nullptr);

template <typename T>
void ffn_backward(const FfnParams<T>& p, const FfnCache<T>& cache, const Tensor<T>& dy,
                  FfnParams<T>* grads, Tensor<T>* dx);

enum class MixerKind { attention, lpa };

// Pre-LN residual block: x + Mix(LN1(x)), then x + FFN(LN2(x)). Exactly one
// mixing mechanism per layer.
template <typename T>
struct EncoderLayer {
  MixerKind kind = MixerKind::attention;
  AttentionParams<T> attn;
  mixer::LpaParams<T> lpa;
  LayerNormParams<T> ln1, ln2;
  FfnParams<T> ffn;
};

template <typename T>
struct ToyEncoder {
  int64_t d = 32;
  int64_t heads = 2;
  std::vector<EncoderLayer<T>> layers;
};

// Mixing-slot input/output pair of one layer: the teacher signal for the MSE
// sweep and warm-start phases.
template <typename T>
struct LayerTap {
  Tensor<T> mix_in, mix_out;
};

template <typename T>
struct EncoderLayerCache {
  Tensor<T> x_in;
  LnCache<T> ln1;
  Tensor<T> mix_in;
  AttentionCache<T> attn;
  mixer::LpaOutput<T> lpa_out;
  mixer::LpaCache<T> lpa;
  Tensor<T> prev_gate_mean;  // input to cross-layer coordination, if any
  bool had_prev_mean = false;
  Tensor<T> x_mid;
  LnCache<T> ln2;
  Tensor<T> f_in;
  FfnCache<T> ffn;
};

template <typename T>
struct EncoderCache {
  std::vector<EncoderLayerCache<T>> layers;
};

template <typename T>
Tensor<T> encoder_forward(const Tensor<T>& x, const ToyEncoder<T>& enc,
                          EncoderCache<T>* cache = nullptr,
                          std::vector<LayerTap<T>>* taps = nullptr);

template <typename T>
void encoder_backward(const ToyEncoder<T>& enc, const EncoderCache<T>& cache, const Tensor<T>& dy,
                      ToyEncoder<T>* grads, Tensor<T>* dx);

template <typename T>
AttentionParams<T> random_attention(int64_t d, int64_t heads, Rng& rng);

// Fresh random toy encoder, all layers attention.
template <typename T>
ToyEncoder<T> make_encoder(int64_t d, int64_t heads, int64_t layers, Rng& rng);

template <typename T>
ToyEncoder<T> zeros_like(const ToyEncoder<T>& enc);

// Synthetic denoising task: clean sequences are sums of random sinusoids per
// channel; inputs are the clean signal plus Gaussian noise.
template <typename T>
struct Batch {
  std::vector<Tensor<T>> noisy, clean;
};

template <typename T>
Batch<T> make_batch(Rng& rng, int64_t count, int64_t n, int64_t d, double noise = 0.3);

template <typename T, typename F>
void for_each_layer_param(EncoderLayer<T>& l, EncoderLayer<T>& g, const std::string& prefix,
                          F&& f) {
  if (l.kind == MixerKind::attention) {
    f(prefix + "attn.wq", l.attn.wq, g.attn.wq);
    f(prefix + "attn.wk", l.attn.wk, g.attn.wk);
    f(prefix + "attn.wv", l.attn.wv, g.attn.wv);
    f(prefix + "attn.wo", l.attn.wo, g.attn.wo);
  } else {
    mixer::for_each_param(l.lpa, g.lpa, [&](const std::string& name, Tensor<T>& p, Tensor<T>& gr) {
      f(prefix + "lpa." + name, p, gr);
    });
  }
  f(prefix + "ln1.gamma", l.ln1.gamma, g.ln1.gamma);
  f(prefix + "ln1.beta", l.ln1.beta, g.ln1.beta);
  f(prefix + "ln2.gamma", l.ln2.gamma, g.ln2.gamma);
  f(prefix + "ln2.beta", l.ln2.beta, g.ln2.beta);
  f(prefix + "ffn.w1", l.ffn.w1, g.ffn.w1);
  f(prefix + "ffn.b1", l.ffn.b1, g.ffn.b1);
  f(prefix + "ffn.w2", l.ffn.w2, g.ffn.w2);
  f(prefix + "ffn.b2", l.ffn.b2, g.ffn.b2);
}

template <typename T, typename F>
void for_each_param(ToyEncoder<T>& enc, ToyEncoder<T>& grads, F&& f) {
  for (size_t i = 0; i < enc.layers.size(); ++i)
    for_each_layer_param(enc.layers[i], grads.layers[i], "layer." + std::to_string(i) + ".", f);
}

}  // namespace lpa::ref
