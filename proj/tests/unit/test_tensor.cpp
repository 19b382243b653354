#include <vector>

#include "dcf/errors.hpp"
#include "dcf/layers.hpp"
#include "dcf/ops.hpp"
#include "dcf/oracles.hpp"
#include "support.hpp"

using namespace dcf;
using dcf::test::max_abs_diff;

TEST_SUITE("tensor") {

TEST_CASE("tensor storage and shape errors") {
  Tensor t(Shape{2, 3, 4, 5}, 1.5);
  CHECK(t.numel() == 120);
  CHECK(t.at(1, 2, 3, 4) == 1.5);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::vector<double>(3, 0.0)), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
}

TEST_CASE("check_finite rejects NaN and Inf") {
  Tensor t(Shape{1, 1, 1, 2}, 0.0);
  CHECK_NOTHROW(check_finite(t, "ok"));
  t.at(0, 0, 0, 1) = std::nan("");
  CHECK_THROWS_AS(check_finite(t, "nan"), NumericalError);
  t.at(0, 0, 0, 1) = INFINITY;
  CHECK_THROWS_AS(check_finite(t, "inf"), NumericalError);
}

TEST_CASE("conv2d 1x1 identity weights") {
  Rng rng(1);
  Tensor x = verify::random_normal({2, 3, 5, 4}, rng);
  const ConvSpec spec = ConvSpec::conv(1, 3, 3);
  Tensor w(spec.weight_shape());
  for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.0;
  CHECK(max_abs_diff(conv2d(x, spec, w, Tensor(Shape{1, 3, 1, 1}, 0.0)), x) == 0.0);
}

TEST_CASE("conv2d all-ones 3x3 on a constant field") {
  const double c = 0.7;
  Tensor x(Shape{1, 1, 6, 6}, c);
  const ConvSpec spec = ConvSpec::conv(3, 1, 1, 1, Padding::uniform(1));
  Tensor y = conv2d(x, spec, Tensor(spec.weight_shape(), 1.0), Tensor());
  for (int i = 1; i < 5; ++i)
    for (int j = 1; j < 5; ++j) CHECK(y.at(0, 0, i, j) == doctest::Approx(9 * c).epsilon(1e-14));
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(4 * c).epsilon(1e-14));
}

TEST_CASE("conv2d matches the loop oracle on 1x2x5x5") {
  Rng rng(2);
  Tensor x = verify::random_normal({1, 2, 5, 5}, rng);
  const ConvSpec spec = ConvSpec::conv(3, 2, 3, 1, Padding::uniform(1));
  Tensor w = verify::random_normal(spec.weight_shape(), rng);
  Tensor b = verify::random_normal({1, 3, 1, 1}, rng);
  CHECK(max_abs_diff(conv2d(x, spec, w, b), oracle::conv2d(x, spec, w, b)) < 1e-12);
}

TEST_CASE("conv2d shape mismatch names expected and actual dims") {
  const ConvSpec spec = ConvSpec::conv(3, 2, 3, 1, Padding::uniform(1));
  Tensor x(Shape{1, 4, 5, 5});
  try {
    conv2d(x, spec, Tensor(spec.weight_shape()), Tensor());
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('2') != std::string::npos);
    CHECK(msg.find('4') != std::string::npos);
  }
  CHECK_THROWS_AS(conv2d(Tensor(Shape{1, 2, 5, 5}), spec, Tensor(Shape{3, 2, 2, 2}), Tensor()), ShapeError);
}

TEST_CASE("conv_transpose2d output sizes of the decoder rows") {
  const ConvSpec up = ConvSpec::conv_transpose(4, 128, 64, 2, Padding::uniform(1));
  CHECK(conv_output_shape(Shape{1, 128, 64, 64}, up) == Shape{1, 64, 128, 128});
  const ConvSpec head = ConvSpec::conv_transpose(7, 64, 3, 2, Padding::uniform(3), 1);
  CHECK(conv_output_shape(Shape{1, 64, 128, 128}, head) == Shape{1, 3, 256, 256});
  CHECK(conv_output_extent(64, 4, 2, 1, 1, true, 0) == 128);
}

TEST_CASE("conv_transpose2d is the input adjoint of conv2d") {
  Rng rng(3);
  const ConvSpec fwd = ConvSpec::conv(4, 2, 3, 2, Padding::uniform(1));
  const ConvSpec adj = ConvSpec::conv_transpose(4, 3, 2, 2, Padding::uniform(1));
  Tensor w = verify::random_normal(fwd.weight_shape(), rng);
  Tensor x = verify::random_normal({1, 2, 8, 8}, rng);
  x.set_requires_grad(true);
  Tensor cot = verify::random_normal({1, 3, 4, 4}, rng);
  {
    Tape tape;
    Tape::Recording guard(tape);
    tape.backward(sum(mul(conv2d(x, fwd, w, Tensor()), cot)));
  }
  // conv weights (out, in, k, k) double as convT weights (in', out', k, k).
  Tensor via_transpose = conv_transpose2d(cot, adj, w, Tensor());
  double d = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) d = std::max(d, std::fabs(x.grad()[i] - via_transpose.ptr()[i]));
  CHECK(d < 1e-12);
}

TEST_CASE("avg_pool2 arithmetic") {
  Tensor c(Shape{1, 2, 4, 4}, -0.3);
  CHECK(max_abs_diff(avg_pool2(c), Tensor(Shape{1, 2, 2, 2}, -0.3)) < 1e-15);
  Tensor b(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(avg_pool2(b).item() == 2.5);
  CHECK_THROWS_AS(avg_pool2(Tensor(Shape{1, 1, 3, 4})), ShapeError);
}

TEST_CASE("activations, concat and eval-mode batch norm") {
  Tensor x(Shape{1, 1, 1, 2}, std::vector<double>{-1.0, 2.0});
  Tensor r = relu(x);
  CHECK(r.ptr()[0] == 0.0);
  CHECK(r.ptr()[1] == 2.0);
  Tensor lr = activation(x, Activation::kLeakyRelu);
  CHECK(lr.ptr()[0] == doctest::Approx(-0.2));
  CHECK(tanh(Tensor(Shape{1, 1, 1, 1}, 0.0)).item() == 0.0);

  CHECK(concat_channels(Tensor(Shape{1, 128, 64, 64}), Tensor(Shape{1, 128, 64, 64})).shape() ==
        Shape{1, 256, 64, 64});
  CHECK_THROWS_AS(concat_channels(Tensor(Shape{1, 2, 4, 4}), Tensor(Shape{1, 2, 8, 8})), ShapeError);

  Rng rng(4);
  Tensor y = verify::random_normal({2, 3, 4, 4}, rng);
  BatchNormParams bn = BatchNormParams::identity(3);
  CHECK(max_abs_diff(batch_norm(y, bn, Mode::kEval), y) < 1e-5 * 4);
}

TEST_CASE("batch norm train mode normalizes and updates running statistics") {
  Rng rng(5);
  Tensor x = verify::random_uniform({4, 1, 3, 3}, rng, 1.0, 3.0);
  double mean = 0.0;
  for (double v : x.data()) mean += v;
  mean /= 36.0;
  double var = 0.0;
  for (double v : x.data()) var += (v - mean) * (v - mean);
  BatchNormParams bn = BatchNormParams::identity(1);
  Tensor y = batch_norm(x, bn, Mode::kTrain);
  double ymean = 0.0;
  for (double v : y.data()) ymean += v;
  CHECK(std::fabs(ymean / 36.0) < 1e-12);
  CHECK(bn.running_mean.item() == doctest::Approx(0.1 * mean).epsilon(1e-12));
  CHECK(bn.running_var.item() == doctest::Approx(0.9 + 0.1 * var / 35.0).epsilon(1e-12));
}

TEST_CASE("tape replays adjoints in reverse order and only once") {
  Tape tape;
  std::vector<int> order;
  tape.record("a", [&] { order.push_back(1); });
  tape.record("b", [&] { order.push_back(2); });
  tape.record("c", [&] { order.push_back(3); });
  Tensor loss = Tensor::scalar(1.0);
  tape.backward(loss);
  CHECK(order == std::vector<int>{3, 2, 1});
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
  tape.reset();
  CHECK(tape.size() == 0);
  CHECK_NOTHROW(tape.backward(loss));
}

TEST_CASE("operations without a recording guard leave no tape entries") {
  Tape tape;
  Tensor x(Shape{1, 1, 2, 2}, 1.0);
  x.set_requires_grad(true);
  Tensor y = relu(x);
  CHECK(tape.size() == 0);
  {
    Tape::Recording guard(tape);
    y = relu(x);
  }
  CHECK(tape.size() == 1);
  CHECK(tape.op_name(0) == "activation");
}

TEST_CASE("finite_diff_check on sum(x^2)") {
  Tensor x(Shape{1, 1, 1, 2}, std::vector<double>{1.0, 2.0});
  auto g = verify::finite_diff_check([&] { return sum(mul(x, x)); }, {{"x", x}});
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
  CHECK(g.max_rel_error < 1e-9);
  CHECK(g.coordinates == 2);
}

TEST_CASE("finite_diff_check on conv2d 1x2x6x6") {
  Rng rng(6);
  Tensor x = verify::random_normal({1, 2, 6, 6}, rng);
  const ConvSpec spec = ConvSpec::conv(3, 2, 2, 1, Padding::uniform(1));
  Tensor w = verify::random_normal(spec.weight_shape(), rng);
  auto g = verify::finite_diff_check([&] { return verify::random_projection(conv2d(x, spec, w, Tensor()), 3); },
                                     {{"x", x}, {"w", w}});
  CHECK(g.max_rel_error < verify::kGradTolerance);
}

TEST_CASE("finite_diff_check reports a wrong gradient") {
  // The taped call and the perturbed calls see different functions.
  Tensor x(Shape{1, 1, 1, 1}, 0.5);
  int calls = 0;
  auto g = verify::finite_diff_check(
      [&] {
        ++calls;
        return calls == 1 ? sum(mul(x, x)) : scale(sum(mul(x, x)), 3.0);
      },
      {{"x", x}});
  CHECK(g.max_rel_error > 0.4);
}

TEST_CASE("he-normal init scale follows fan-in") {
  Rng rng(7);
  Tensor w(Shape{64, 64, 3, 3});
  init_he_normal(w, 64 * 9, rng);
  double s2 = 0.0;
  for (double v : w.data()) s2 += v * v;
  const double var = s2 / static_cast<double>(w.numel());
  CHECK(var == doctest::Approx(2.0 / (64 * 9)).epsilon(0.05));
}

TEST_CASE("gradient suite covers every registered module") {
  const auto modules = verify::gradient_modules();
  for (const char* m : {"conv", "conv_transpose", "batch_norm", "fourier_unit", "spectral_transform", "ffc_layer",
                        "ffc_res", "filtering", "losses", "network"}) {
    CHECK(std::find(modules.begin(), modules.end(), m) != modules.end());
  }
}

}  // TEST_SUITE
