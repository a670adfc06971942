#include "lpa/serialize.hpp"

#include <fstream>

#include "json.hpp"

namespace lpa::io {

using nlohmann::json;

std::string ParamStore::to_json() const {
  json j;
  j["format"] = "pulse-params-v1";
  j["meta"] = json::parse(meta_json);
  json t = json::object();
  for (const auto& [key, e] : tensors) {
    t[key] = {{"shape", e.shape}, {"data", e.data}};
  }
  j["tensors"] = std::move(t);
  return j.dump();
}

ParamStore ParamStore::from_json(const std::string& text) {
  json j = json::parse(text);
  check(j.value("format", "") == "pulse-params-v1", "unrecognized parameter store format");
  ParamStore s;
  s.meta_json = j.value("meta", json::object()).dump();
  for (auto& [key, val] : j.at("tensors").items()) {
    Entry e;
    e.shape = val.at("shape").get<std::vector<int64_t>>();
    e.data = val.at("data").get<std::vector<float>>();
    check(Tensor<float>::count(e.shape) == static_cast<int64_t>(e.data.size()),
          "tensor entry size mismatch for " + key);
    s.tensors[key] = std::move(e);
  }
  return s;
}

void ParamStore::save(const std::string& path) const {
  std::ofstream f(path);
  check(f.good(), "cannot open for writing: " + path);
  f << to_json();
  check(f.good(), "write failed: " + path);
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open parameter store: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void put_lpa(ParamStore* store, const std::string& prefix, const mixer::LpaParams<double>& p) {
  auto& pm = const_cast<mixer::LpaParams<double>&>(p);
  auto scratch = mixer::zeros_like(p);
  mixer::for_each_param(pm, scratch,
                        [&](const std::string& name, Tensor<double>& t, Tensor<double>&) {
                          store->put(prefix + name, t);
                        });
  Tensor<double> tau({1}, p.tau);
  store->put(prefix + "tau", tau);
}

mixer::LpaParams<double> get_lpa(const ParamStore& store, const std::string& prefix,
                                 const convert::LpaShape& shape, double tau, bool has_xproj) {
  Rng rng(0);
  mixer::LpaParams<double> p = convert::fresh_lpa(shape, tau, rng);
  if (has_xproj) {
    const int64_t ptot = shape.heads * shape.pulses_per_head();
    p.xproj = Tensor<double>({ptot, ptot});
  }
  auto scratch = mixer::zeros_like(p);
  mixer::for_each_param(p, scratch,
                        [&](const std::string& name, Tensor<double>& t, Tensor<double>&) {
                          Tensor<double> loaded = store.get<double>(prefix + name);
                          check(loaded.shape == t.shape,
                                "stored tensor shape mismatch for " + prefix + name);
                          t = std::move(loaded);
                        });
  if (store.has(prefix + "tau")) p.tau = store.get<double>(prefix + "tau").at(0);
  return p;
}

void save_encoder(const ref::ToyEncoder<double>& enc, const std::string& path) {
  ParamStore store;
  json meta;
  meta["kind"] = "toy-encoder";
  meta["d"] = enc.d;
  meta["heads"] = enc.heads;
  json layers = json::array();
  for (size_t li = 0; li < enc.layers.size(); ++li) {
    const auto& l = enc.layers[li];
    json lm;
    const std::string prefix = "layer." + std::to_string(li) + ".";
    if (l.kind == ref::MixerKind::attention) {
      lm["kind"] = "attention";
      store.put(prefix + "attn.wq", l.attn.wq);
      store.put(prefix + "attn.wk", l.attn.wk);
      store.put(prefix + "attn.wv", l.attn.wv);
      store.put(prefix + "attn.wo", l.attn.wo);
    } else {
      lm["kind"] = "lpa";
      const auto& g = l.lpa.head_gates.at(0);
      lm["pa"] = g.ap.pulses();
      lm["pp"] = g.per.pulses();
      lm["pq"] = g.pos.pulses();
      lm["K"] = g.pos.bases();
      lm["heads"] = l.lpa.heads;
      lm["tau"] = l.lpa.tau;
      lm["xproj"] = l.lpa.xproj.numel() > 0;
      put_lpa(&store, prefix + "lpa.", l.lpa);
    }
    store.put(prefix + "ln1.gamma", l.ln1.gamma);
    store.put(prefix + "ln1.beta", l.ln1.beta);
    store.put(prefix + "ln2.gamma", l.ln2.gamma);
    store.put(prefix + "ln2.beta", l.ln2.beta);
    store.put(prefix + "ffn.w1", l.ffn.w1);
    store.put(prefix + "ffn.b1", l.ffn.b1);
    store.put(prefix + "ffn.w2", l.ffn.w2);
    store.put(prefix + "ffn.b2", l.ffn.b2);
    layers.push_back(std::move(lm));
  }
  meta["layers"] = std::move(layers);
  store.meta_json = meta.dump();
  store.save(path);
}

ref::ToyEncoder<double> load_encoder(const std::string& path) {
  ParamStore store = ParamStore::load(path);
  json meta = json::parse(store.meta_json);
  check(meta.value("kind", "") == "toy-encoder", "not an encoder checkpoint: " + path);
  ref::ToyEncoder<double> enc;
  enc.d = meta.at("d").get<int64_t>();
  enc.heads = meta.at("heads").get<int64_t>();
  const auto& layers = meta.at("layers");
  for (size_t li = 0; li < layers.size(); ++li) {
    const auto& lm = layers[li];
    const std::string prefix = "layer." + std::to_string(li) + ".";
    ref::EncoderLayer<double> l;
    if (lm.at("kind") == "attention") {
      l.kind = ref::MixerKind::attention;
      l.attn.heads = enc.heads;
      l.attn.wq = store.get<double>(prefix + "attn.wq");
      l.attn.wk = store.get<double>(prefix + "attn.wk");
      l.attn.wv = store.get<double>(prefix + "attn.wv");
      l.attn.wo = store.get<double>(prefix + "attn.wo");
    } else {
      l.kind = ref::MixerKind::lpa;
      convert::LpaShape shape;
      shape.d = enc.d;
      shape.heads = lm.at("heads").get<int64_t>();
      shape.pa = lm.at("pa").get<int64_t>();
      shape.pp = lm.at("pp").get<int64_t>();
      shape.pq = lm.at("pq").get<int64_t>();
      shape.K = std::max<int64_t>(lm.at("K").get<int64_t>(), 1);
      l.lpa = get_lpa(store, prefix + "lpa.", shape, lm.at("tau").get<double>(),
                      lm.value("xproj", false));
    }
    l.ln1.gamma = store.get<double>(prefix + "ln1.gamma");
    l.ln1.beta = store.get<double>(prefix + "ln1.beta");
    l.ln2.gamma = store.get<double>(prefix + "ln2.gamma");
    l.ln2.beta = store.get<double>(prefix + "ln2.beta");
    l.ffn.w1 = store.get<double>(prefix + "ffn.w1");
    l.ffn.b1 = store.get<double>(prefix + "ffn.b1");
    l.ffn.w2 = store.get<double>(prefix + "ffn.w2");
    l.ffn.b2 = store.get<double>(prefix + "ffn.b2");
    enc.layers.push_back(std::move(l));
  }
  return enc;
}

void save_tensor_file(const Tensor<double>& t, const std::string& path) {
  json j;
  j["format"] = "pulse-tensor-v1";
  j["shape"] = t.shape;
  j["data"] = t.data;
  std::ofstream f(path);
  check(f.good(), "cannot open for writing: " + path);
  f << j.dump();
}

Tensor<double> load_tensor_file(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open tensor file: " + path);
  json j = json::parse(f);
  check(j.value("format", "") == "pulse-tensor-v1", "unrecognized tensor file format");
  Tensor<double> t(j.at("shape").get<std::vector<int64_t>>());
  auto data = j.at("data").get<std::vector<double>>();
  check(static_cast<int64_t>(data.size()) == t.numel(), "tensor file size mismatch");
  t.data = std::move(data);
  return t;
}

}  // namespace lpa::io
