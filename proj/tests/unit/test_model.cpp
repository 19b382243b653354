#include "dcf/errors.hpp"
#include "dcf/masks.hpp"
#include "dcf/model.hpp"
#include "support.hpp"

using namespace dcf;
using dcf::test::bitwise_equal;

namespace {

ModelConfig at(int r) {
  ModelConfig c;
  c.resolution = r;
  return c;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("same seed builds bitwise-identical parameters") {
  DCFNetwork a = DCFNetwork::build(at(32), 9);
  DCFNetwork b = DCFNetwork::build(at(32), 9);
  DCFNetwork c = DCFNetwork::build(at(32), 10);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  REQUIRE(pa.params.size() == pb.params.size());
  bool same = true, differs = false;
  for (std::size_t i = 0; i < pa.params.size(); ++i) {
    same = same && bitwise_equal(pa.params[i].tensor, pb.params[i].tensor);
    differs = differs || !bitwise_equal(pa.params[i].tensor, pc.params[i].tensor);
  }
  CHECK(same);
  CHECK(differs);
  CHECK(pa.param_count() == pc.param_count());
}

TEST_CASE("parameter count does not depend on resolution") {
  CHECK(DCFNetwork::build(at(32), 1).parameters().param_count() ==
        DCFNetwork::build(at(64), 1).parameters().param_count());
}

TEST_CASE("layer schedule at 256") {
  ModelConfig c = at(256);
  ShapeTrace expected = DCFNetwork::expected_schedule(c, 1);
  const std::pair<const char*, int> sizes[] = {{"f1", 256}, {"f2", 128}, {"f2'", 64}, {"f3", 64},  {"f3'", 64},
                                               {"f4", 64},  {"f5", 64},  {"f6", 64},  {"f7", 64},  {"f8", 128},
                                               {"f9", 256}, {"e1", 256}, {"e2", 128}, {"e2'", 64}, {"e3", 64},
                                               {"T3", 64}};
  for (auto [name, size] : sizes) {
    auto s = expected.find(name);
    INFO(name);
    REQUIRE(s.has_value());
    CHECK(s->h == size);
    CHECK(s->w == size);
  }
  CHECK(expected.find("T3")->c == 9);
  CHECK(expected.find("f9")->c == 3);
}

TEST_CASE("bad resolutions are rejected") {
  for (int r : {4, 48, 100}) CHECK_THROWS_AS(DCFNetwork::build(at(r), 1), ShapeError);
}

TEST_CASE("mask and image sizes must agree") {
  DCFNetwork net = DCFNetwork::build(at(16), 2);
  CHECK_THROWS_AS(net.forward(Tensor(Shape{1, 3, 16, 16}), Tensor(Shape{1, 1, 8, 8}, 1.0), Mode::kEval),
                  ShapeError);
}

TEST_CASE("compositing keeps known pixels and tanh bounds the output") {
  DCFNetwork net = DCFNetwork::build(at(32), 3);
  Rng rng(41);
  Tensor image = verify::random_uniform({2, 3, 32, 32}, rng, -1, 1);
  const MaskGrid grids[] = {center_mask(32, 32), irregular_mask(32, 32, 5)};
  Tensor mask = mask_tensor(grids);
  Tensor input = apply_mask(image, mask);
  ForwardResult out = net.forward(input, mask, Mode::kEval);
  CHECK(out.raw.shape() == image.shape());
  bool known_exact = true, in_range = true;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          if (mask.at(n, 0, y, x) == 1.0) known_exact = known_exact && out.composited.at(n, c, y, x) == input.at(n, c, y, x);
          in_range = in_range && std::fabs(out.raw.at(n, c, y, x)) <= 1.0;
        }
  CHECK(known_exact);
  CHECK(in_range);
  CHECK(out.kernels.weights().shape() == Shape{2, 9, 8, 8});
}

TEST_CASE("eval-mode forward is deterministic") {
  DCFNetwork a = DCFNetwork::build(at(16), 4);
  DCFNetwork b = DCFNetwork::build(at(16), 4);
  Rng rng(42);
  Tensor image = verify::random_uniform({1, 3, 16, 16}, rng, -1, 1);
  Tensor mask(Shape{1, 1, 16, 16}, 1.0);
  CHECK(bitwise_equal(a.forward(image, mask, Mode::kEval).raw, b.forward(image, mask, Mode::kEval).raw));
}

TEST_CASE("image-level filter head is optional") {
  ModelConfig c = at(16);
  c.image_filter = true;
  DCFNetwork with = DCFNetwork::build(c, 5);
  DCFNetwork without = DCFNetwork::build(at(16), 5);
  CHECK(with.parameters().param_count() > without.parameters().param_count());
  Tensor mask(Shape{1, 1, 16, 16}, 1.0);
  CHECK(with.forward(Tensor(Shape{1, 3, 16, 16}), mask, Mode::kEval).raw.shape() == Shape{1, 3, 16, 16});
}

TEST_CASE("model suite") { dcf::test::require_suite("model"); }
TEST_CASE("shape suite") { dcf::test::require_suite("shapes"); }

}  // TEST_SUITE
