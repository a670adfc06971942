#include <cstdio>

#include "doctest.h"
#include "lpa/serialize.hpp"
#include "test_util.hpp"

using lpa::Tensor64;
namespace io = lpa::io;
namespace ref = lpa::ref;
namespace convert = lpa::convert;
using testutil::max_abs_diff;

TEST_CASE("param store round trip preserves values to 1e-6") {
  lpa::Rng rng(501);
  io::ParamStore store;
  auto t = testutil::random_tensor<double>(rng, {3, 5}, -2.0, 2.0);
  store.put("layer.0.gates.aperiodic.q", t);
  auto text = store.to_json();
  auto back = io::ParamStore::from_json(text);
  auto t2 = back.get<double>("layer.0.gates.aperiodic.q");
  CHECK(t2.shape == t.shape);
  CHECK(max_abs_diff(t2, t) < 1e-6);

  CHECK_THROWS(back.get<double>("no.such.key"));
  CHECK_THROWS(io::ParamStore::from_json("{\"format\":\"other\"}"));
}

TEST_CASE("lpa layer store round trip") {
  lpa::Rng rng(503);
  convert::LpaShape shape;
  shape.d = 8;
  shape.heads = 2;
  shape.pa = 1;
  shape.pp = 2;
  shape.pq = 1;
  shape.K = 4;
  auto p = convert::fresh_lpa(shape, 1.3, rng);
  io::ParamStore store;
  io::put_lpa(&store, "layer.2.", p);
  auto q = io::get_lpa(io::ParamStore::from_json(store.to_json()), "layer.2.", shape, 1.0, false);
  CHECK(q.tau == doctest::Approx(1.3).epsilon(1e-6));
  CHECK(max_abs_diff(q.wv, p.wv) < 1e-6);
  CHECK(max_abs_diff(q.head_gates[1].per.rho, p.head_gates[1].per.rho) < 1e-6);
  CHECK(max_abs_diff(q.head_gates[0].pos.a, p.head_gates[0].pos.a) < 1e-6);
}

TEST_CASE("encoder checkpoint round trip preserves structure and outputs") {
  lpa::Rng rng(509);
  auto enc = ref::make_encoder<double>(8, 1, 2, rng);
  // convert one layer so the checkpoint carries both kinds
  convert::LpaShape shape;
  shape.d = 8;
  shape.heads = 1;
  shape.pa = 1;
  shape.pp = 1;
  shape.pq = 1;
  shape.K = 4;
  enc.layers[1].kind = ref::MixerKind::lpa;
  enc.layers[1].lpa = convert::selective_init(enc.layers[1].attn, shape, 0.7, rng);
  enc.layers[1].lpa.xproj = Tensor64({3, 3}, 0.25);

  const std::string path = "/tmp/pulse_test_ckpt.json";
  io::save_encoder(enc, path);
  auto back = io::load_encoder(path);
  REQUIRE(back.layers.size() == 2);
  CHECK(back.layers[0].kind == ref::MixerKind::attention);
  CHECK(back.layers[1].kind == ref::MixerKind::lpa);
  CHECK(back.layers[1].lpa.xproj.numel() == 9);

  auto x = testutil::random_tensor<double>(rng, {10, 8});
  auto y1 = ref::encoder_forward(x, enc);
  auto y2 = ref::encoder_forward(x, back);
  CHECK(max_abs_diff(y1, y2) < 1e-4);  // f32 storage rounding only
  std::remove(path.c_str());

  CHECK_THROWS(io::load_encoder("/tmp/definitely_missing_pulse_ckpt.json"));
}

TEST_CASE("tensor file round trip is exact for doubles") {
  lpa::Rng rng(521);
  auto t = testutil::random_tensor<double>(rng, {6, 3}, -1.0, 1.0);
  const std::string path = "/tmp/pulse_test_tensor.json";
  io::save_tensor_file(t, path);
  auto back = io::load_tensor_file(path);
  CHECK(back.shape == t.shape);
  CHECK(max_abs_diff(back, t) == 0.0);
  std::remove(path.c_str());
}
