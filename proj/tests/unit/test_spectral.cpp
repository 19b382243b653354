#include <complex>

#include "dcf/errors.hpp"
#include "dcf/ops.hpp"
#include "dcf/spectral.hpp"
#include "support.hpp"

using namespace dcf;
using dcf::test::max_abs_diff;

TEST_SUITE("spectral") {

TEST_CASE("half width drops the Hermitian redundancy") {
  CHECK(half_width(8) == 5);
  CHECK(half_width(2) == 2);
  CHECK(rfft2(Tensor(Shape{1, 1, 8, 8})).values().shape() == Shape{1, 1, 8, 10});
  CHECK(hermitian_weight(0, 8) == 1.0);
  CHECK(hermitian_weight(1, 8) == 2.0);
  CHECK(hermitian_weight(4, 8) == 1.0);
}

TEST_CASE("zeros and impulses") {
  SpectrumTensor z = rfft2(Tensor(Shape{1, 1, 8, 8}));
  for (double v : z.values().data()) CHECK(v == 0.0);

  Tensor delta(Shape{1, 1, 8, 8});
  delta.at(0, 0, 0, 0) = 1.0;
  SpectrumTensor d = rfft2(delta);
  for (int u = 0; u < 8; ++u)
    for (int k = 0; k < 5; ++k) CHECK(std::abs(d.at(0, 0, u, k) - std::complex<double>(1.0, 0.0)) < 1e-12);

  SpectrumTensor flat = SpectrumTensor::zeros(1, 1, 8, 8);
  for (int u = 0; u < 8; ++u)
    for (int k = 0; k < 5; ++k) flat.set(0, 0, u, k, {1.0, 0.0});
  CHECK(max_abs_diff(irfft2(flat, 8, 8), delta) < 1e-12);
}

TEST_CASE("round trip on a random 16x16") {
  Rng rng(11);
  Tensor x = verify::random_normal({2, 3, 16, 16}, rng);
  CHECK(max_abs_diff(irfft2(rfft2(x), 16, 16), x) < 1e-10);
}

TEST_CASE("non-rectangular powers of two round trip") {
  Rng rng(12);
  Tensor x = verify::random_normal({1, 1, 4, 32}, rng);
  CHECK(max_abs_diff(irfft2(rfft2(x), 4, 32), x) < 1e-10);
}

TEST_CASE("non-power-of-two sizes are rejected by name") {
  try {
    rfft2(Tensor(Shape{1, 1, 6, 8}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("powers of two") != std::string::npos);
  }
  CHECK_FALSE(is_power_of_two(12));
  CHECK(is_power_of_two(1));
}

TEST_CASE("spectrum channel packing round trips") {
  Rng rng(13);
  Tensor x = verify::random_normal({1, 2, 8, 8}, rng);
  SpectrumTensor s = rfft2(x);
  Tensor packed = spectrum_to_channels(s);
  CHECK(packed.shape() == Shape{1, 4, 8, 5});
  CHECK(max_abs_diff(channels_to_spectrum(packed, 8).values(), s.values()) == 0.0);
}

TEST_CASE("zero cotangents give zero adjoints") {
  Tensor gx = rfft2_backward(SpectrumTensor::zeros(1, 1, 8, 8), 8, 8);
  for (double v : gx.data()) CHECK(v == 0.0);
  SpectrumTensor gs = irfft2_backward(Tensor(Shape{1, 1, 8, 8}));
  for (double v : gs.values().data()) CHECK(v == 0.0);
}

TEST_CASE("fft suite") { dcf::test::require_suite("fft"); }

}  // TEST_SUITE
