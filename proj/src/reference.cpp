#include "lpa/reference.hpp"

#include <cmath>

namespace lpa::ref {

namespace {
constexpr double kLnEps = 1e-5;

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int64_t c0, int64_t w) {
  Tensor<T> out({x.dim(0), w});
  for (int64_t t = 0; t < x.dim(0); ++t)
    for (int64_t c = 0; c < w; ++c) out.at(t, c) = x.at(t, c0 + c);
  return out;
}

template <typename T>
void add_into_cols(Tensor<T>* dst, const Tensor<T>& src, int64_t c0) {
  for (int64_t t = 0; t < src.dim(0); ++t)
    for (int64_t c = 0; c < src.dim(1); ++c) dst->at(t, c0 + c) += src.at(t, c);
}

template <typename T>
void acc(Tensor<T>* dst, const Tensor<T>& src) {
  for (int64_t i = 0; i < src.numel(); ++i) dst->at(i) += src.at(i);
}
}  // namespace

template <typename T>
Tensor<T> attention_forward(const Tensor<T>& x, const AttentionParams<T>& p,
                            AttentionCache<T>* cache) {
  check(x.rank() == 2, "attention_forward expects (n, d) input");
  const int64_t n = x.dim(0), d = x.dim(1);
  check(n >= 1, "attention_forward needs at least one position");
  check(p.wq.dim(0) == d && p.wq.dim(1) == d, "wq must be (d, d)");
  check(p.heads >= 1 && d % p.heads == 0, "d must be divisible by the head count");
  const int64_t nh = p.heads, dh = d / nh;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Tensor<T> q = ops::matmul_nt(x, p.wq);
  Tensor<T> k = ops::matmul_nt(x, p.wk);
  Tensor<T> v = ops::matmul_nt(x, p.wv);
  Tensor<T> concat({n, d});
  std::vector<Tensor<T>> probs(static_cast<size_t>(nh));

  for (int64_t h = 0; h < nh; ++h) {
    const int64_t c0 = h * dh;
    Tensor<T> qh = slice_cols(q, c0, dh);
    Tensor<T> kh = slice_cols(k, c0, dh);
    Tensor<T> vh = slice_cols(v, c0, dh);
    Tensor<T> s = ops::matmul_nt(qh, kh);
    for (int64_t i = 0; i < s.numel(); ++i) s.at(i) *= scale;
    Tensor<T>& pr = probs[static_cast<size_t>(h)];
    pr = Tensor<T>({n, n});
    for (int64_t i = 0; i < n; ++i)
      kern::table<T>().softmax_row(s.row(i), pr.row(i), n, T(1));
    Tensor<T> oh = ops::matmul(pr, vh);
    add_into_cols(&concat, oh, c0);
  }
  Tensor<T> y = ops::matmul_nt(concat, p.wo);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
  }
  return y;
}

template <typename T>
void attention_backward(const Tensor<T>& x, const AttentionParams<T>& p,
                        const AttentionCache<T>& cache, const Tensor<T>& dy,
                        AttentionParams<T>* grads, Tensor<T>* dx) {
  const int64_t n = x.dim(0), d = x.dim(1);
  const int64_t nh = p.heads, dh = d / nh;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Tensor<T> dwo = ops::matmul_tn(dy, cache.concat);
  acc(&grads->wo, dwo);
  Tensor<T> dconcat = ops::matmul(dy, p.wo);

  Tensor<T> dq({n, d}), dk({n, d}), dv({n, d});
  for (int64_t h = 0; h < nh; ++h) {
    const int64_t c0 = h * dh;
    Tensor<T> doh = slice_cols(dconcat, c0, dh);
    const Tensor<T>& pr = cache.probs[static_cast<size_t>(h)];
    Tensor<T> qh = slice_cols(cache.q, c0, dh);
    Tensor<T> kh = slice_cols(cache.k, c0, dh);
    Tensor<T> vh = slice_cols(cache.v, c0, dh);

    Tensor<T> dpr = ops::matmul_nt(doh, vh);        // (n, n)
    Tensor<T> dvh = ops::matmul_tn(pr, doh);        // (n, dh)
    // softmax rows backward
    Tensor<T> ds({n, n});
    for (int64_t i = 0; i < n; ++i) {
      T inner = T(0);
      for (int64_t j = 0; j < n; ++j) inner += pr.at(i, j) * dpr.at(i, j);
      for (int64_t j = 0; j < n; ++j)
        ds.at(i, j) = pr.at(i, j) * (dpr.at(i, j) - inner) * scale;
    }
    Tensor<T> dqh = ops::matmul(ds, kh);
    Tensor<T> dkh = ops::matmul_tn(ds, qh);
    add_into_cols(&dq, dqh, c0);
    add_into_cols(&dk, dkh, c0);
    add_into_cols(&dv, dvh, c0);
  }
  acc(&grads->wq, ops::matmul_tn(dq, x));
  acc(&grads->wk, ops::matmul_tn(dk, x));
  acc(&grads->wv, ops::matmul_tn(dv, x));
  if (dx) {
    acc(dx, ops::matmul(dq, p.wq));
    acc(dx, ops::matmul(dk, p.wk));
    acc(dx, ops::matmul(dv, p.wv));
  }
}

template <typename T>
Tensor<T> layernorm_forward(const Tensor<T>& x, const LayerNormParams<T>& p, LnCache<T>* cache) {
  const int64_t n = x.dim(0), d = x.dim(1);
  Tensor<T> y({n, d});
  Tensor<T> xhat({n, d});
  Tensor<T> rstd({n});
  for (int64_t t = 0; t < n; ++t) {
    const T* row = x.row(t);
    T mean = T(0);
    for (int64_t c = 0; c < d; ++c) mean += row[c];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (int64_t c = 0; c < d; ++c) {
      const T dv = row[c] - mean;
      var += dv * dv;
    }
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    rstd.at(t) = rs;
    for (int64_t c = 0; c < d; ++c) {
      const T xh = (row[c] - mean) * rs;
      xhat.at(t, c) = xh;
      y.at(t, c) = p.gamma.at(c) * xh + p.beta.at(c);
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <typename T>
void layernorm_backward(const LayerNormParams<T>& p, const LnCache<T>& cache, const Tensor<T>& dy,
                        LayerNormParams<T>* grads, Tensor<T>* dx) {
  const int64_t n = dy.dim(0), d = dy.dim(1);
  for (int64_t t = 0; t < n; ++t) {
    T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
    for (int64_t c = 0; c < d; ++c) {
      const T xh = cache.xhat.at(t, c);
      const T g = dy.at(t, c);
      grads->gamma.at(c) += g * xh;
      grads->beta.at(c) += g;
      const T dxh = g * p.gamma.at(c);
      mean_dxhat += dxh;
      mean_dxhat_xhat += dxh * xh;
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    const T rs = cache.rstd.at(t);
    for (int64_t c = 0; c < d; ++c) {
      const T dxh = dy.at(t, c) * p.gamma.at(c);
      dx->at(t, c) += rs * (dxh - mean_dxhat - cache.xhat.at(t, c) * mean_dxhat_xhat);
    }
  }
}

template <typename T>
Tensor<T> ffn_forward(const Tensor<T>& x, const FfnParams<T>& p, FfnCache<T>* cache) {
  Tensor<T> z1 = ops::matmul_nt(x, p.w1);
  const int64_t hidden = p.w1.dim(0);
  for (int64_t t = 0; t < z1.dim(0); ++t)
    for (int64_t c = 0; c < hidden; ++c) z1.at(t, c) += p.b1.at(c);
  Tensor<T> a1 = ops::gelu_t(z1);
  Tensor<T> y = ops::matmul_nt(a1, p.w2);
  for (int64_t t = 0; t < y.dim(0); ++t)
    for (int64_t c = 0; c < y.dim(1); ++c) y.at(t, c) += p.b2.at(c);
  if (cache) {
    cache->in = x;
    cache->z1 = std::move(z1);
    cache->a1 = std::move(a1);
  }
  return y;
}

template <typename T>
void ffn_backward(const FfnParams<T>& p, const FfnCache<T>& cache, const Tensor<T>& dy,
                  FfnParams<T>* grads, Tensor<T>* dx) {
  const int64_t n = dy.dim(0);
  acc(&grads->w2, ops::matmul_tn(dy, cache.a1));
  for (int64_t t = 0; t < n; ++t)
    for (int64_t c = 0; c < dy.dim(1); ++c) grads->b2.at(c) += dy.at(t, c);
  Tensor<T> da1 = ops::matmul(dy, p.w2);
  Tensor<T> dz1({n, cache.z1.dim(1)});
  for (int64_t i = 0; i < dz1.numel(); ++i)
    dz1.at(i) = da1.at(i) * ops::gelu_grad(cache.z1.at(i));
  acc(&grads->w1, ops::matmul_tn(dz1, cache.in));
  for (int64_t t = 0; t < n; ++t)
    for (int64_t c = 0; c < dz1.dim(1); ++c) grads->b1.at(c) += dz1.at(t, c);
  if (dx) acc(dx, ops::matmul(dz1, p.w1));
}

template <typename T>
Tensor<T> encoder_forward(const Tensor<T>& x, const ToyEncoder<T>& enc, EncoderCache<T>* cache,
                          std::vector<LayerTap<T>>* taps) {
  Tensor<T> cur = x;
  if (cache) cache->layers.assign(enc.layers.size(), EncoderLayerCache<T>{});
  if (taps) taps->assign(enc.layers.size(), LayerTap<T>{});

  const Tensor<T>* prev_gate_mean = nullptr;
  Tensor<T> prev_mean_store;

  for (size_t li = 0; li < enc.layers.size(); ++li) {
    const EncoderLayer<T>& layer = enc.layers[li];
    EncoderLayerCache<T>* lc = cache ? &cache->layers[li] : nullptr;
    EncoderLayerCache<T> scratch;
    EncoderLayerCache<T>& c = lc ? *lc : scratch;

    c.x_in = cur;
    Tensor<T> mix_in = layernorm_forward(cur, layer.ln1, &c.ln1);
    c.mix_in = mix_in;

    Tensor<T> mix;
    if (layer.kind == MixerKind::attention) {
      mix = attention_forward(mix_in, layer.attn, &c.attn);
    } else {
      if (prev_gate_mean) {
        c.prev_gate_mean = *prev_gate_mean;
        c.had_prev_mean = true;
      }
      mixer::lpa_forward(mix_in, layer.lpa, &c.lpa_out, &c.lpa,
                         c.had_prev_mean ? &c.prev_gate_mean : nullptr);
      mix = c.lpa_out.y;
      prev_mean_store = c.lpa_out.gate_mean;
      prev_gate_mean = &prev_mean_store;
    }
    if (taps) {
      (*taps)[li].mix_in = mix_in;
      (*taps)[li].mix_out = mix;
    }

    Tensor<T> x_mid = cur;
    for (int64_t i = 0; i < x_mid.numel(); ++i) x_mid.at(i) += mix.at(i);
    c.x_mid = x_mid;

    Tensor<T> f_in = layernorm_forward(x_mid, layer.ln2, &c.ln2);
    c.f_in = f_in;
    Tensor<T> f = ffn_forward(f_in, layer.ffn, &c.ffn);
    cur = std::move(x_mid);
    for (int64_t i = 0; i < cur.numel(); ++i) cur.at(i) += f.at(i);
  }
  return cur;
}

template <typename T>
void encoder_backward(const ToyEncoder<T>& enc, const EncoderCache<T>& cache, const Tensor<T>& dy,
                      ToyEncoder<T>* grads, Tensor<T>* dx) {
  Tensor<T> dcur = dy;
  for (size_t ri = enc.layers.size(); ri-- > 0;) {
    const EncoderLayer<T>& layer = enc.layers[ri];
    const EncoderLayerCache<T>& c = cache.layers[ri];
    EncoderLayer<T>& g = grads->layers[ri];

    // out = x_mid + ffn(ln2(x_mid))
    Tensor<T> df_in = lpa::zeros_like(c.f_in);
    ffn_backward(layer.ffn, c.ffn, dcur, &g.ffn, &df_in);
    Tensor<T> dx_mid = dcur;  // residual branch
    layernorm_backward(layer.ln2, c.ln2, df_in, &g.ln2, &dx_mid);

    // x_mid = x_in + mix(ln1(x_in))
    Tensor<T> dmix_in = lpa::zeros_like(c.mix_in);
    if (layer.kind == MixerKind::attention) {
      attention_backward(c.mix_in, layer.attn, c.attn, dx_mid, &g.attn, &dmix_in);
    } else {
      mixer::lpa_backward(c.mix_in, layer.lpa, c.lpa_out, c.lpa, dx_mid, &g.lpa, &dmix_in,
                          c.had_prev_mean ? &c.prev_gate_mean : nullptr);
    }
    Tensor<T> dx_in = dx_mid;  // residual branch
    layernorm_backward(layer.ln1, c.ln1, dmix_in, &g.ln1, &dx_in);
    dcur = std::move(dx_in);
  }
  if (dx) acc(dx, dcur);
}

template <typename T>
AttentionParams<T> random_attention(int64_t d, int64_t heads, Rng& rng) {
  AttentionParams<T> p;
  p.heads = heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (Tensor<T>* w : {&p.wq, &p.wk, &p.wv, &p.wo}) {
    *w = Tensor<T>({d, d});
    rng.fill_normal(*w, 0.0, s);
  }
  return p;
}

template <typename T>
ToyEncoder<T> make_encoder(int64_t d, int64_t heads, int64_t layers, Rng& rng) {
  ToyEncoder<T> enc;
  enc.d = d;
  enc.heads = heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (int64_t i = 0; i < layers; ++i) {
    EncoderLayer<T> l;
    l.kind = MixerKind::attention;
    l.attn = random_attention<T>(d, heads, rng);
    l.ln1.gamma = Tensor<T>({d}, T(1));
    l.ln1.beta = Tensor<T>({d}, T(0));
    l.ln2.gamma = Tensor<T>({d}, T(1));
    l.ln2.beta = Tensor<T>({d}, T(0));
    l.ffn.w1 = Tensor<T>({4 * d, d});
    rng.fill_normal(l.ffn.w1, 0.0, s);
    l.ffn.b1 = Tensor<T>({4 * d}, T(0));
    l.ffn.w2 = Tensor<T>({d, 4 * d});
    rng.fill_normal(l.ffn.w2, 0.0, 0.5 / std::sqrt(static_cast<double>(d)));
    l.ffn.b2 = Tensor<T>({d}, T(0));
    enc.layers.push_back(std::move(l));
  }
  return enc;
}

template <typename T>
ToyEncoder<T> zeros_like(const ToyEncoder<T>& enc) {
  ToyEncoder<T> g;
  g.d = enc.d;
  g.heads = enc.heads;
  for (const auto& l : enc.layers) {
    EncoderLayer<T> gl;
    gl.kind = l.kind;
    if (l.kind == MixerKind::attention) {
      gl.attn.heads = l.attn.heads;
      gl.attn.wq = lpa::zeros_like(l.attn.wq);
      gl.attn.wk = lpa::zeros_like(l.attn.wk);
      gl.attn.wv = lpa::zeros_like(l.attn.wv);
      gl.attn.wo = lpa::zeros_like(l.attn.wo);
    } else {
      gl.lpa = mixer::zeros_like(l.lpa);
    }
    gl.ln1.gamma = lpa::zeros_like(l.ln1.gamma);
    gl.ln1.beta = lpa::zeros_like(l.ln1.beta);
    gl.ln2.gamma = lpa::zeros_like(l.ln2.gamma);
    gl.ln2.beta = lpa::zeros_like(l.ln2.beta);
    gl.ffn.w1 = lpa::zeros_like(l.ffn.w1);
    gl.ffn.b1 = lpa::zeros_like(l.ffn.b1);
    gl.ffn.w2 = lpa::zeros_like(l.ffn.w2);
    gl.ffn.b2 = lpa::zeros_like(l.ffn.b2);
    g.layers.push_back(std::move(gl));
  }
  return g;
}

template <typename T>
Batch<T> make_batch(Rng& rng, int64_t count, int64_t n, int64_t d, double noise) {
  Batch<T> b;
  constexpr double kTwoPi = 6.283185307179586;
  for (int64_t i = 0; i < count; ++i) {
    Tensor<T> clean({n, d});
    for (int64_t c = 0; c < d; ++c) {
      double amp[3], freq[3], phase[3];
      for (int j = 0; j < 3; ++j) {
        amp[j] = rng.uniform(0.3, 1.0);
        freq[j] = rng.uniform(1.0, 6.0);
        phase[j] = rng.uniform(0.0, 1.0);
      }
      for (int64_t t = 0; t < n; ++t) {
        double v = 0;
        for (int j = 0; j < 3; ++j)
          v += amp[j] * std::sin(kTwoPi * (freq[j] * static_cast<double>(t) / static_cast<double>(n) +
                                           phase[j]));
        clean.at(t, c) = static_cast<T>(v);
      }
    }
    Tensor<T> noisy = clean;
    for (int64_t i2 = 0; i2 < noisy.numel(); ++i2)
      noisy.at(i2) += static_cast<T>(rng.normal(0.0, noise));
    b.clean.push_back(std::move(clean));
    b.noisy.push_back(std::move(noisy));
  }
  return b;
}

#define LPA_REF_INSTANTIATE(T)                                                                   \
  template Tensor<T> attention_forward<T>(const Tensor<T>&, const AttentionParams<T>&,          \
                                          AttentionCache<T>*);                                  \
  template void attention_backward<T>(const Tensor<T>&, const AttentionParams<T>&,              \
                                      const AttentionCache<T>&, const Tensor<T>&,               \
                                      AttentionParams<T>*, Tensor<T>*);                         \
  template Tensor<T> layernorm_forward<T>(const Tensor<T>&, const LayerNormParams<T>&,          \
                                          LnCache<T>*);                                         \
  template void layernorm_backward<T>(const LayerNormParams<T>&, const LnCache<T>&,             \
                                      const Tensor<T>&, LayerNormParams<T>*, Tensor<T>*);       \
  template Tensor<T> ffn_forward<T>(const Tensor<T>&, const FfnParams<T>&, FfnCache<T>*);       \
  template void ffn_backward<T>(const FfnParams<T>&, const FfnCache<T>&, const Tensor<T>&,      \
                                FfnParams<T>*, Tensor<T>*);                                     \
  template Tensor<T> encoder_forward<T>(const Tensor<T>&, const ToyEncoder<T>&,                 \
                                        EncoderCache<T>*, std::vector<LayerTap<T>>*);           \
  template void encoder_backward<T>(const ToyEncoder<T>&, const EncoderCache<T>&,               \
                                    const Tensor<T>&, ToyEncoder<T>*, Tensor<T>*);              \
  template AttentionParams<T> random_attention<T>(int64_t, int64_t, Rng&);                      \
  template ToyEncoder<T> make_encoder<T>(int64_t, int64_t, int64_t, Rng&);                      \
  template ToyEncoder<T> zeros_like<T>(const ToyEncoder<T>&);                                   \
  template Batch<T> make_batch<T>(Rng&, int64_t, int64_t, int64_t, double);

LPA_REF_INSTANTIATE(float)
LPA_REF_INSTANTIATE(double)

}  // namespace lpa::ref
