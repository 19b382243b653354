#include "dcf/losses.hpp"
#include "dcf/ops.hpp"
#include "dcf/oracles.hpp"
#include "support.hpp"

using namespace dcf;

TEST_SUITE("losses") {

TEST_CASE("l1 closed forms") {
  Rng rng(51);
  Tensor t = verify::random_uniform({2, 3, 8, 8}, rng, -1, 1);
  CHECK(l1_loss(t, t).item() == 0.0);
  CHECK(l1_loss(add_scalar(t, 0.5), t).item() == doctest::Approx(0.5).epsilon(1e-14));
  Tensor p = verify::random_uniform({2, 3, 8, 8}, rng, -1, 1);
  CHECK(std::fabs(l1_loss(p, t).item() - oracle::l1(p, t)) < 1e-12);
}

TEST_CASE("Gram of a constant single-channel map") {
  Tensor g = gram(Tensor(Shape{1, 1, 2, 2}, 1.0));
  CHECK(g.shape() == Shape{1, 1, 1, 1});
  CHECK(g.item() == 1.0);
}

TEST_CASE("Gram matrices are symmetric positive semidefinite") {
  Rng rng(52);
  Tensor g = gram(verify::random_normal({1, 5, 6, 6}, rng));
  for (int i = 0; i < 5; ++i) {
    CHECK(g.at(0, 0, i, i) >= 0.0);
    for (int j = 0; j < 5; ++j) CHECK(g.at(0, 0, i, j) == g.at(0, 0, j, i));
  }
  Tensor v = verify::random_normal({1, 1, 1, 5}, rng);
  double q = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) q += v.ptr()[i] * g.at(0, 0, i, j) * v.ptr()[j];
  CHECK(q >= -1e-12);
}

TEST_CASE("perceptual and style vanish at pred = target and match oracles") {
  FixedFeatureExtractor e;
  Rng rng(53);
  Tensor t = verify::random_uniform({1, 3, 32, 32}, rng, -1, 1);
  Tensor p = verify::random_uniform({1, 3, 32, 32}, rng, -1, 1);
  CHECK(perceptual_loss(t, t, e).item() == 0.0);
  CHECK(style_loss(t, t, e).item() == 0.0);
  CHECK(std::fabs(perceptual_loss(p, t, e).item() - oracle::perceptual(p, t, e)) < 1e-10);
  CHECK(std::fabs(style_loss(p, t, e).item() - oracle::style(p, t, e)) < 1e-10);
  CHECK(perceptual_loss(p, t, e).item() > 0.0);
}

TEST_CASE("extractor weights are frozen and seeded") {
  FixedFeatureExtractor a, b;
  const auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.params.size() == 4);
  for (std::size_t i = 0; i < pa.params.size(); ++i) {
    CHECK_FALSE(pa.params[i].tensor.requires_grad());
    CHECK(dcf::test::bitwise_equal(pa.params[i].tensor, pb.params[i].tensor));
  }
  CHECK(a.features(Tensor(Shape{1, 3, 32, 32})).back().shape() == Shape{1, FixedFeatureExtractor::kFeatureDim, 2, 2});
}

TEST_CASE("hinge losses at zero and saturated logits") {
  Tensor zero(Shape{2, 1, 4, 4}, 0.0);
  CHECK(hinge_discriminator_loss(zero, zero).item() == 2.0);
  CHECK(hinge_generator_loss(zero).item() == 0.0);
  CHECK(hinge_discriminator_loss(Tensor(Shape{2, 1, 4, 4}, 1.5), Tensor(Shape{2, 1, 4, 4}, -1.0)).item() == 0.0);
  Rng rng(54);
  Tensor r = verify::random_normal({2, 1, 4, 4}, rng), f = verify::random_normal({2, 1, 4, 4}, rng);
  CHECK(std::fabs(hinge_discriminator_loss(r, f).item() - oracle::hinge_discriminator(r, f)) < 1e-12);
  CHECK(std::fabs(hinge_generator_loss(f).item() - oracle::hinge_generator(f)) < 1e-12);
}

TEST_CASE("adversarial loss through a zeroed discriminator") {
  PatchDiscriminator d(3, 7);
  for (const auto& p : d.parameters().params) {
    Tensor t = p.tensor;
    std::fill(t.data().begin(), t.data().end(), 0.0);
  }
  Tensor img(Shape{1, 3, 32, 32}, 0.3);
  CHECK(adversarial_loss(d, img, img, AdversarialRole::kDiscriminator).item() == 2.0);
  CHECK(adversarial_loss(d, img, img, AdversarialRole::kGenerator).item() == 0.0);
  CHECK(d.forward(img).shape() == Shape{1, 1, 2, 2});
}

TEST_CASE("weighted total") {
  LossReport r = total_loss({0.5, 0.2, 0.3, 0.01}, LossWeights{});
  CHECK(r.total == doctest::Approx(3.05).epsilon(1e-14));
  CHECK(total_loss({}, LossWeights{}).total == 0.0);
  CHECK_THROWS_AS(total_loss({}, LossWeights{-1.0, 0.1, 0.1, 250.0}), std::invalid_argument);
}

TEST_CASE("mismatched prediction and target shapes are rejected") {
  FixedFeatureExtractor e;
  CHECK_THROWS(perceptual_loss(Tensor(Shape{1, 3, 16, 16}), Tensor(Shape{1, 3, 32, 32}), e));
  CHECK_THROWS(style_loss(Tensor(Shape{1, 3, 16, 16}), Tensor(Shape{2, 3, 16, 16}), e));
}

TEST_CASE("loss suite") { dcf::test::require_suite("losses"); }

TEST_CASE("loss gradient checks") {
  for (const auto& r : verify::run_gradient_checks("losses")) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
}

}  // TEST_SUITE
