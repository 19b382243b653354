#include <cmath>

#include "dcf/errors.hpp"
#include "dcf/filtering.hpp"
#include "dcf/ops.hpp"
#include "dcf/oracles.hpp"
#include "support.hpp"

using namespace dcf;
using dcf::test::max_abs_diff;

TEST_SUITE("filtering") {

TEST_CASE("uniform softmax from zero logits") {
  KernelField k = normalize_kernels(KernelField(Tensor(Shape{1, 9, 3, 3}), 3, false));
  CHECK(k.normalized());
  for (double v : k.weights().data()) CHECK(v == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("softmax of a dominant logit") {
  Tensor logits(Shape{1, 9, 1, 1});
  logits.at(0, 0, 0, 0) = 10.0;
  KernelField k = normalize_kernels(KernelField(logits, 3, false));
  const double e10 = std::exp(10.0);
  CHECK(k.weights().at(0, 0, 0, 0) == doctest::Approx(e10 / (e10 + 8.0)).epsilon(1e-14));
  CHECK(k.weights().at(0, 0, 0, 0) == doctest::Approx(0.99963693).epsilon(1e-8));
  double s = 0.0;
  for (double v : k.weights().data()) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("softmax is shift invariant per location") {
  Rng rng(21);
  Tensor logits = verify::random_normal({1, 9, 4, 4}, rng);
  Tensor shifted = add_scalar(logits, 37.5);
  CHECK(max_abs_diff(normalize_kernels(KernelField(logits, 3, false)).weights(),
                     normalize_kernels(KernelField(shifted, 3, false)).weights()) < 1e-12);
}

TEST_CASE("identity kernels reproduce the input exactly") {
  Rng rng(22);
  Tensor f = verify::random_normal({2, 5, 7, 6}, rng);
  CHECK(max_abs_diff(apply_filter(f, KernelField::identity(2, 3, 7, 6)), f) == 0.0);
  CHECK(max_abs_diff(apply_filter(f, KernelField::identity(2, 5, 7, 6)), f) == 0.0);
}

TEST_CASE("uniform kernels preserve a constant image including borders") {
  Tensor f(Shape{1, 3, 6, 6}, 0.37);
  KernelField k = normalize_kernels(KernelField(Tensor(Shape{1, 9, 6, 6}), 3, false));
  CHECK(max_abs_diff(apply_filter(f, k), f) < 1e-15);
}

TEST_CASE("apply_filter matches the loop oracle on 1x4x6x6") {
  Rng rng(23);
  Tensor f = verify::random_normal({1, 4, 6, 6}, rng);
  KernelField k = normalize_kernels(KernelField(verify::random_normal({1, 9, 6, 6}, rng), 3, false));
  CHECK(max_abs_diff(apply_filter(f, k), oracle::apply_filter(f, k.weights(), 3)) < 1e-12);
}

TEST_CASE("filter backward identities") {
  Rng rng(24);
  Tensor f = verify::random_normal({1, 2, 5, 5}, rng);
  Tensor cot = verify::random_normal({1, 2, 5, 5}, rng);
  auto [gf, gt] = apply_filter_backward(cot, f, KernelField::identity(1, 3, 5, 5));
  CHECK(max_abs_diff(gf, cot) == 0.0);
  CHECK(gt.shape() == Shape{1, 9, 5, 5});

  KernelField k = normalize_kernels(KernelField(verify::random_normal({1, 9, 5, 5}, rng), 3, false));
  auto [zf, zt] = apply_filter_backward(Tensor(Shape{1, 2, 5, 5}), f, k);
  for (double v : zf.data()) CHECK(v == 0.0);
  for (double v : zt.data()) CHECK(v == 0.0);
}

TEST_CASE("mismatched and invalid kernel fields are rejected") {
  Tensor f(Shape{1, 2, 5, 5});
  CHECK_THROWS_AS(apply_filter(f, KernelField::identity(1, 3, 4, 5)), ShapeError);
  CHECK_THROWS_AS(apply_filter(f, KernelField::identity(2, 3, 5, 5)), ShapeError);
  CHECK_THROWS_AS(KernelField(Tensor(Shape{1, 4, 5, 5}), 2, false), ShapeError);
  CHECK_THROWS_AS(KernelField(Tensor(Shape{1, 8, 5, 5}), 3, false), ShapeError);
}

TEST_CASE("filtering suite") { dcf::test::require_suite("filtering"); }

}  // TEST_SUITE
