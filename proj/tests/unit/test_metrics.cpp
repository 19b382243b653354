#include <cmath>

#include "dcf/errors.hpp"
#include "dcf/metrics.hpp"
#include "dcf/ops.hpp"
#include "dcf/oracles.hpp"
#include "support.hpp"

using namespace dcf;

namespace {

SquareMatrix random_spd(int d, Rng& rng) {
  Tensor a = verify::random_normal({1, 1, d, d}, rng);
  SquareMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += a.at(0, 0, i, k) * a.at(0, 0, j, k);
      m(i, j) = s + (i == j ? 0.1 : 0.0);
    }
  return m;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr closed forms and sentinel") {
  Rng rng(71);
  Tensor a = verify::random_uniform({1, 3, 16, 16}, rng, 0, 1);
  CHECK(psnr(a, a) == kPsnrIdentical);
  CHECK(psnr(a, add_scalar(a, 0.1)) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(a, add_scalar(a, 0.2), 2.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(a, add_scalar(a, 0.05)) > psnr(a, add_scalar(a, 0.1)));
  Tensor b = verify::random_uniform({1, 3, 16, 16}, rng, 0, 1);
  CHECK(std::fabs(psnr(a, b) - oracle::psnr(a, b, 1.0)) < 1e-10);
  CHECK_THROWS_AS(psnr(a, Tensor(Shape{1, 3, 8, 8})), ShapeError);
}

TEST_CASE("masked psnr only sees holes") {
  Tensor a(Shape{1, 3, 4, 4}, 0.0), b(Shape{1, 3, 4, 4}, 0.0);
  Tensor mask(Shape{1, 1, 4, 4}, 1.0);
  mask.at(0, 0, 1, 1) = 0.0;
  for (int c = 0; c < 3; ++c) {
    b.at(0, c, 1, 1) = 0.1;
    b.at(0, c, 3, 3) = 0.9;  // known pixel, ignored
  }
  CHECK(psnr_masked(a, b, mask) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK_THROWS_AS(psnr_masked(a, b, Tensor(Shape{1, 1, 4, 4}, 1.0)), std::invalid_argument);
}

TEST_CASE("ssim identity, symmetry and oracle") {
  Rng rng(72);
  Tensor a = verify::random_uniform({1, 3, 64, 64}, rng, 0, 1);
  Tensor b = verify::random_uniform({1, 3, 64, 64}, rng, 0, 1);
  CHECK(std::fabs(ssim(a, a) - 1.0) < 1e-12);
  CHECK(std::fabs(ssim(a, b) - ssim(b, a)) < 1e-12);
  CHECK(std::fabs(ssim(a, b) - oracle::ssim(a, b, 1.0)) < 1e-8);
  CHECK(ssim_map(a, b).shape() == Shape{1, 3, 54, 54});
  CHECK_THROWS_AS(ssim(Tensor(Shape{1, 1, 8, 8}), Tensor(Shape{1, 1, 8, 8})), ShapeError);
}

TEST_CASE("masked ssim averages windows centered on holes") {
  Rng rng(73);
  Tensor a = verify::random_uniform({1, 1, 32, 32}, rng, 0, 1);
  Tensor mask(Shape{1, 1, 32, 32}, 1.0);
  CHECK(std::isnan(ssim_masked(a, a, mask)));
  mask.at(0, 0, 16, 16) = 0.0;
  Tensor b = a.clone();
  b.at(0, 0, 16, 16) += 0.5;
  Tensor m = ssim_map(a, b);
  CHECK(ssim_masked(a, b, mask) == doctest::Approx(m.at(0, 0, 11, 11)).epsilon(1e-14));
}

TEST_CASE("symmetric eigendecomposition reconstructs the matrix") {
  Rng rng(74);
  SquareMatrix m = random_spd(8, rng);
  SymmetricEigen e = symmetric_eigen(m);
  double worst = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
      worst = std::max(worst, std::fabs(s - m(i, j)));
    }
  CHECK(worst < 1e-9);
  for (int k = 1; k < 8; ++k) CHECK(e.values[k - 1] <= e.values[k]);

  SquareMatrix r = psd_sqrt(m);
  double sq = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += r(i, k) * r(k, j);
      sq = std::max(sq, std::fabs(s - m(i, j)));
    }
  CHECK(sq < 1e-9);
}

TEST_CASE("asymmetric covariance is rejected") {
  SquareMatrix m(2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(symmetric_eigen(m), std::invalid_argument);
  GaussianStats a{{0.0, 0.0}, m, 2};
  GaussianStats b{{0.0, 0.0}, SquareMatrix(2), 2};
  CHECK_THROWS_AS(frechet_distance(a, b), std::invalid_argument);
}

TEST_CASE("frechet closed forms and oracle") {
  Rng rng(75);
  SquareMatrix s = random_spd(8, rng);
  GaussianStats a{std::vector<double>(8, 0.5), s, 10};
  CHECK(std::fabs(frechet_distance(a, a)) < 1e-8);
  GaussianStats b = a;
  b.mean[0] += 1.0;
  b.mean[3] -= 2.0;
  CHECK(frechet_distance(a, b) == doctest::Approx(5.0).epsilon(1e-9));
  GaussianStats c{std::vector<double>(8, -0.1), random_spd(8, rng), 10};
  CHECK(std::fabs(frechet_distance(a, c) - oracle::frechet(a, c)) < 1e-6);
  CHECK(std::fabs(frechet_distance(a, c) - frechet_distance(c, a)) < 1e-8);
}

TEST_CASE("feature statistics") {
  const std::vector<std::vector<double>> rows = {{1, 2}, {3, 2}, {5, 8}};
  GaussianStats g = gaussian_stats(rows);
  CHECK(g.count == 3);
  CHECK(g.mean[0] == 3.0);
  CHECK(g.mean[1] == 4.0);
  CHECK(g.covariance(0, 0) == doctest::Approx(4.0));
  CHECK(g.covariance(0, 1) == doctest::Approx(6.0));
  CHECK(g.covariance(1, 1) == doctest::Approx(12.0));

  FixedFeatureExtractor e;
  Rng rng(76);
  Tensor imgs = verify::random_uniform({3, 3, 32, 32}, rng, -1, 1);
  auto f = pooled_features(imgs, e);
  REQUIRE(f.size() == 3);
  CHECK(f[0].size() == static_cast<std::size_t>(FixedFeatureExtractor::kFeatureDim));
  CHECK(fit_feature_stats(imgs, e).covariance.dim == FixedFeatureExtractor::kFeatureDim);
}

TEST_CASE("metric suite") { dcf::test::require_suite("metrics"); }

}  // TEST_SUITE
