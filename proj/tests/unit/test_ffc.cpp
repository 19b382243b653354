#include "dcf/errors.hpp"
#include "dcf/ffc.hpp"
#include "dcf/ops.hpp"
#include "support.hpp"

using namespace dcf;
using dcf::test::max_abs_diff;

namespace {

void zero_all(const ParamList& p) {
  for (const auto& t : p.params) {
    Tensor w = t.tensor;
    std::fill(w.data().begin(), w.data().end(), 0.0);
  }
}

}  // namespace

TEST_SUITE("ffc") {

TEST_CASE("channel split") {
  FFCConfig c{256, 0.5, true};
  CHECK(c.global_channels() == 128);
  CHECK(c.local_channels() == 128);
  CHECK_THROWS_AS((FFCConfig{1, 0.5, true}.validate()), ShapeError);
  CHECK_THROWS_AS((FFCConfig{16, 1.0, true}.validate()), ShapeError);
}

TEST_CASE("Fourier unit keeps spatial shape") {
  Rng rng(31);
  FourierUnit fu(4, rng);
  for (int s : {16, 64}) {
    Tensor x = verify::random_normal({1, 4, s, s}, rng);
    CHECK(fu.forward(x, Mode::kEval).shape() == x.shape());
  }
}

TEST_CASE("spectral transform shape and LFU toggle") {
  Rng rng(32);
  SpectralTransform st(8, 8, true, rng);
  Tensor x = verify::random_normal({1, 8, 16, 16}, rng);
  Tensor with = st.forward(x, Mode::kEval);
  st.set_enable_lfu(false);
  Tensor without = st.forward(x, Mode::kEval);
  CHECK(with.shape() == x.shape());
  CHECK(without.shape() == x.shape());
  CHECK(max_abs_diff(with, without) > 0.0);
}

TEST_CASE("local Fourier unit needs a reduced width divisible by 4") {
  Rng rng(33);
  CHECK_THROWS_AS(SpectralTransform(4, 4, true, rng), ShapeError);
  CHECK_NOTHROW(SpectralTransform(4, 4, false, rng));
}

TEST_CASE("FFC layer channel bookkeeping at 256 channels") {
  Rng rng(34);
  FFCLayer layer(FFCConfig{256, 0.5, true}, rng);
  auto [yl, yg] = layer.forward(Tensor(Shape{1, 128, 8, 8}), Tensor(Shape{1, 128, 8, 8}), Mode::kEval);
  CHECK(yl.shape() == Shape{1, 128, 8, 8});
  CHECK(yg.shape() == Shape{1, 128, 8, 8});
}

TEST_CASE("FFC layer maps zero to zero with zero biases") {
  Rng rng(35);
  FFCLayer layer(FFCConfig{16, 0.5, true}, rng);
  auto [yl, yg] = layer.forward(Tensor(Shape{1, 8, 8, 8}), Tensor(Shape{1, 8, 8, 8}), Mode::kEval);
  for (double v : yl.data()) CHECK(v == 0.0);
  for (double v : yg.data()) CHECK(v == 0.0);
}

TEST_CASE("FFC residual block is the identity with a zeroed residual path") {
  Rng rng(36);
  FFCResBlock block(FFCConfig{16, 0.5, true}, rng);
  ParamList p;
  block.collect("b", p);
  zero_all(p);
  Tensor x = verify::random_normal({2, 16, 8, 8}, rng);
  CHECK(max_abs_diff(block.forward(x, Mode::kTrain), x) == 0.0);
}

TEST_CASE("FFC residual block at full width") {
  Rng rng(37);
  FFCResBlock block(FFCConfig{256, 0.5, true}, rng);
  Tensor x = verify::random_normal({1, 256, 64, 64}, rng);
  CHECK(block.forward(x, Mode::kEval).shape() == x.shape());
}

TEST_CASE("FFC gradient checks") {
  for (const char* m : {"fourier_unit", "spectral_transform", "ffc_layer", "ffc_res"}) {
    for (const auto& r : verify::run_gradient_checks(m)) {
      INFO(r.name << ": " << r.detail);
      CHECK(r.passed);
    }
  }
}

}  // TEST_SUITE
