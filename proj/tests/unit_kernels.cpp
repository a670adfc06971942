#include <cmath>
#include <vector>

#include "doctest.h"
#include "lpa/ops.hpp"
#include "lpa/rng.hpp"
#include "test_util.hpp"

using lpa::Tensor;
using lpa::Tensor32;
using lpa::Tensor64;
namespace ops = lpa::ops;
namespace kern = lpa::kern;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("softmax basics") {
  Tensor64 x({3}, 0.0);
  auto y = ops::softmax(x, 1.0);
  for (int i = 0; i < 3; ++i) CHECK(y.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor64 z({2});
  z.at(0) = 10.0;
  z.at(1) = 0.0;
  auto yz = ops::softmax(z, 0.01);
  CHECK(std::abs(yz.at(0) - 1.0) < 1e-9);
  CHECK(std::abs(yz.at(1)) < 1e-9);

  CHECK_THROWS(ops::softmax(z, 0.0));
  CHECK_THROWS(ops::softmax(z, -1.0));
}

TEST_CASE("softmax matches naive oracle and is order preserving") {
  lpa::Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    auto x = random_tensor<double>(rng, {8}, -4.0, 4.0);
    const double tau = rng.uniform(0.2, 3.0);
    auto y = ops::softmax(x, tau);

    // naive exp/sum evaluation in f64
    double sum = 0;
    Tensor64 ref({8});
    for (int i = 0; i < 8; ++i) sum += std::exp(x.at(i) / tau);
    for (int i = 0; i < 8; ++i) ref.at(i) = std::exp(x.at(i) / tau) / sum;
    CHECK(max_abs_diff(y, ref) < 1e-12);

    double total = 0;
    for (int i = 0; i < 8; ++i) total += y.at(i);
    CHECK(std::abs(total - 1.0) < 1e-6);

    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        if (x.at(i) < x.at(j)) CHECK(y.at(i) <= y.at(j));
  }
}

TEST_CASE("softmax temperature identity") {
  lpa::Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    auto x = random_tensor<double>(rng, {13}, -3.0, 3.0);
    const double tau = rng.uniform(0.1, 5.0);
    auto a = ops::softmax(x, tau);
    Tensor64 scaled = x;
    for (auto& v : scaled.data) v /= tau;
    auto b = ops::softmax(scaled, 1.0);
    CHECK(max_abs_diff(a, b) < 1e-12);
  }
}

TEST_CASE("sigmoid symmetry") {
  lpa::Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const double x = rng.uniform(-30.0, 30.0);
    CHECK(std::abs(ops::sigmoid(x) + ops::sigmoid(-x) - 1.0) < 1e-12);
  }
}

TEST_CASE("softplus overflow safety") {
  CHECK(std::isfinite(ops::softplus(1000.0)));
  CHECK(ops::softplus(1000.0) == doctest::Approx(1000.0));
  CHECK(ops::softplus(-1000.0) == doctest::Approx(0.0));
  CHECK(ops::softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("matmul agrees with triple-loop oracle") {
  lpa::Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const int64_t m = rng.randint(1, 16), k = rng.randint(1, 16), n = rng.randint(1, 16);
    auto a = random_tensor<double>(rng, {m, k});
    auto b = random_tensor<double>(rng, {k, n});
    auto c = ops::matmul(a, b);
    Tensor64 ref({m, n});
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double acc = 0;
        for (int64_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
        ref.at(i, j) = acc;
      }
    CHECK(max_abs_diff(c, ref) < 1e-10);

    // transposed forms against the same oracle
    Tensor64 bt({n, k});
    for (int64_t j = 0; j < n; ++j)
      for (int64_t p = 0; p < k; ++p) bt.at(j, p) = b.at(p, j);
    CHECK(max_abs_diff(ops::matmul_nt(a, bt), ref) < 1e-10);
    Tensor64 at({k, m});
    for (int64_t i = 0; i < m; ++i)
      for (int64_t p = 0; p < k; ++p) at.at(p, i) = a.at(i, p);
    CHECK(max_abs_diff(ops::matmul_tn(at, b), ref) < 1e-10);
  }
}

TEST_CASE("causal dwconv identity and hand example") {
  // delta kernel at the last tap is the identity map
  lpa::Rng rng(23);
  auto x = random_tensor<double>(rng, {9, 3});
  Tensor64 k({5, 3}, 0.0);
  for (int64_t c = 0; c < 3; ++c) k.at(4, c) = 1.0;
  CHECK(max_abs_diff(ops::causal_dwconv(x, k), x) < 1e-15);

  Tensor64 x2({4, 1});
  for (int i = 0; i < 4; ++i) x2.at(i) = i + 1;
  Tensor64 k2({2, 1}, 1.0);
  auto y2 = ops::causal_dwconv(x2, k2);
  const double want[4] = {1, 3, 5, 7};
  for (int i = 0; i < 4; ++i) CHECK(y2.at(i) == doctest::Approx(want[i]));

  Tensor64 bad({2, 2}, 1.0);
  CHECK_THROWS(ops::causal_dwconv(x2, bad));
}

TEST_CASE("causal dwconv causality") {
  lpa::Rng rng(29);
  auto x = random_tensor<double>(rng, {12, 4});
  auto k = random_tensor<double>(rng, {5, 4});
  auto base = ops::causal_dwconv(x, k);
  for (int64_t t : {3, 7, 11}) {
    Tensor64 xp = x;
    xp.at(t, 1) += 1.5;
    auto out = ops::causal_dwconv(xp, k);
    for (int64_t s = 0; s < t; ++s)
      for (int64_t c = 0; c < 4; ++c) CHECK(out.at(s, c) == base.at(s, c));
    bool changed = false;
    for (int64_t s = t; s < 12; ++s)
      for (int64_t c = 0; c < 4; ++c)
        if (out.at(s, c) != base.at(s, c)) changed = true;
    CHECK(changed);
  }
}

TEST_CASE("prefix sum basics") {
  Tensor64 x({3, 1});
  x.at(0) = 1;
  x.at(1) = 2;
  x.at(2) = 3;
  auto c = ops::prefix_sum(x);
  const double want[4] = {0, 1, 3, 6};
  for (int i = 0; i < 4; ++i) CHECK(c.at(i, 0) == doctest::Approx(want[i]));
  double r;
  ops::range_sum(c, 1, 2, &r);
  CHECK(r == doctest::Approx(5.0));
}

template <typename T>
static void prefix_range_check(double tol, double scale) {
  lpa::Rng rng(31);
  auto x = random_tensor<T>(rng, {100, 8}, -scale, scale);
  auto c = ops::prefix_sum(x);
  std::vector<T> got(8);
  for (int rep = 0; rep < 1000; ++rep) {
    int64_t s = rng.randint(0, 99), e = rng.randint(0, 99);
    if (s > e) std::swap(s, e);
    ops::range_sum(c, s, e, got.data());
    for (int64_t ch = 0; ch < 8; ++ch) {
      double direct = 0;
      for (int64_t t = s; t <= e; ++t) direct += static_cast<double>(x.at(t, ch));
      CHECK(std::abs(static_cast<double>(got[static_cast<size_t>(ch)]) - direct) < tol);
    }
  }
}

TEST_CASE("prefix sum range queries match direct summation") {
  // f32 carries ~eps * partial-sum magnitude of rounding, so the absolute
  // tolerance is meaningful only at bounded data scale.
  prefix_range_check<float>(1e-6, 0.02);
  prefix_range_check<double>(1e-12, 1.0);
}

// Runtime-dispatched SIMD variants must agree with the scalar reference.
TEST_CASE("simd kernels match scalar reference") {
  if (kern::detect_isa() == kern::Isa::scalar) {
    MESSAGE("no SIMD support detected; dispatch covers scalar only");
    return;
  }
  lpa::Rng rng(101);
  const int64_t m = 37, k = 29, n = 53;
  auto a32 = random_tensor<float>(rng, {m, k});
  auto b32 = random_tensor<float>(rng, {k, n});
  auto bt32 = random_tensor<float>(rng, {n, k});
  auto c32 = random_tensor<float>(rng, {m, n});
  auto a64 = random_tensor<double>(rng, {m, k});
  auto b64 = random_tensor<double>(rng, {k, n});
  auto v32 = random_tensor<float>(rng, {1000}, -10.0, 10.0);

  auto run = [&](kern::Isa isa) {
    kern::force_isa(isa);
    struct Out {
      Tensor32 mm, mnt, mtn, ex, sg, sp, ge, sm, pf;
      Tensor64 mm64, pf64;
      float dotv;
      double dotv64;
    } o;
    o.mm = ops::matmul(a32, b32);
    o.mnt = ops::matmul_nt(a32, bt32);
    o.mtn = ops::matmul_tn(a32, c32);
    o.mm64 = ops::matmul(a64, b64);
    o.ex = lpa::zeros_like(v32);
    kern::f32().exp_v(v32.ptr(), o.ex.ptr(), v32.numel());
    o.sg = lpa::zeros_like(v32);
    kern::f32().sigmoid_v(v32.ptr(), o.sg.ptr(), v32.numel());
    o.sp = lpa::zeros_like(v32);
    kern::f32().softplus_v(v32.ptr(), o.sp.ptr(), v32.numel());
    o.ge = lpa::zeros_like(v32);
    kern::f32().gelu_v(v32.ptr(), o.ge.ptr(), v32.numel());
    o.sm = lpa::zeros_like(v32);
    kern::f32().softmax_row(v32.ptr(), o.sm.ptr(), v32.numel(), 0.5f);
    o.pf = ops::prefix_sum(b32);
    o.pf64 = ops::prefix_sum(b64);
    o.dotv = kern::f32().dot(a32.ptr(), a32.ptr(), a32.numel());
    o.dotv64 = kern::f64().dot(a64.ptr(), a64.ptr(), a64.numel());
    return o;
  };

  auto sc = run(kern::Isa::scalar);
  auto vx = run(kern::Isa::avx2);
  kern::force_isa(kern::detect_isa());

  CHECK(testutil::rel_err(vx.mm, sc.mm) < 1e-5);
  CHECK(testutil::rel_err(vx.mnt, sc.mnt) < 1e-5);
  CHECK(testutil::rel_err(vx.mtn, sc.mtn) < 1e-5);
  CHECK(testutil::rel_err(vx.mm64, sc.mm64) < 1e-12);
  // exp over [-10,10] spans e^10; compare relatively per element
  for (int64_t i = 0; i < v32.numel(); ++i)
    CHECK(testutil::rel_err_scalar(vx.ex.at(i), sc.ex.at(i)) < 1e-5);
  CHECK(max_abs_diff(vx.sg, sc.sg) < 1e-6);
  for (int64_t i = 0; i < v32.numel(); ++i)
    CHECK(std::abs(vx.sp.at(i) - sc.sp.at(i)) <
          1e-6 * std::max(1.0, std::abs(static_cast<double>(sc.sp.at(i)))));
  for (int64_t i = 0; i < v32.numel(); ++i)
    CHECK(std::abs(vx.ge.at(i) - sc.ge.at(i)) <
          1e-5 * std::max(1.0, std::abs(static_cast<double>(sc.ge.at(i)))));
  CHECK(max_abs_diff(vx.sm, sc.sm) < 1e-6);
  CHECK(testutil::rel_err(vx.pf, sc.pf) < 1e-5);
  CHECK(testutil::rel_err(vx.pf64, sc.pf64) < 1e-12);
  CHECK(testutil::rel_err_scalar(vx.dotv, sc.dotv) < 1e-5);
  CHECK(testutil::rel_err_scalar(vx.dotv64, sc.dotv64) < 1e-12);
}

TEST_CASE("isa dispatch is clamped and nameable") {
  const kern::Isa best = kern::detect_isa();
  kern::force_isa(kern::Isa::avx2);
  CHECK(kern::active_isa() == best);
  kern::force_isa(kern::Isa::scalar);
  CHECK(kern::active_isa() == kern::Isa::scalar);
  kern::force_isa(best);
  CHECK((std::string(kern::isa_name(best)) == "avx2" ||
         std::string(kern::isa_name(best)) == "scalar"));
}
