#pragma once

#include <map>
#include <string>
#include <vector>

#include "lpa/conversion.hpp"
#include "lpa/reference.hpp"

namespace lpa::io {

// Flat key -> array store. Arrays are row-major and persisted as f32, so a
// round trip preserves values to f32 resolution (well within 1e-6 for
// unit-scale parameters); bit-exactness is not a goal of this format.
struct ParamStore {
  struct Entry {
    std::vector<int64_t> shape;
    std::vector<float> data;
  };
  std::map<std::string, Entry> tensors;
  std::string meta_json = "{}";

  template <typename T>
  void put(const std::string& key, const Tensor<T>& t) {
    Entry e;
    e.shape = t.shape;
    e.data.reserve(t.data.size());
    for (T v : t.data) e.data.push_back(static_cast<float>(v));
    tensors[key] = std::move(e);
  }

  template <typename T>
  Tensor<T> get(const std::string& key) const {
    auto it = tensors.find(key);
    check(it != tensors.end(), "missing tensor in parameter store: " + key);
    Tensor<T> t(it->second.shape);
    for (size_t i = 0; i < it->second.data.size(); ++i)
      t.data[i] = static_cast<T>(it->second.data[i]);
    return t;
  }

  bool has(const std::string& key) const { return tensors.count(key) > 0; }

  std::string to_json() const;
  static ParamStore from_json(const std::string& text);
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);
};

// LPA layer parameters under `prefix` (e.g. "layer.3."); pulse counts, K,
// head count, and tau travel in the store's meta block, managed by the
// encoder functions below.
void put_lpa(ParamStore* store, const std::string& prefix,
             const mixer::LpaParams<double>& p);
mixer::LpaParams<double> get_lpa(const ParamStore& store, const std::string& prefix,
                                 const convert::LpaShape& shape, double tau, bool has_xproj);

void save_encoder(const ref::ToyEncoder<double>& enc, const std::string& path);
ref::ToyEncoder<double> load_encoder(const std::string& path);

void save_tensor_file(const Tensor<double>& t, const std::string& path);
Tensor<double> load_tensor_file(const std::string& path);

}  // namespace lpa::io
