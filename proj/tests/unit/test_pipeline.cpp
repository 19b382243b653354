#include <fstream>
#include <sstream>

#include "dcf/errors.hpp"
#include "dcf/image_io.hpp"
#include "dcf/pipeline.hpp"
#include "support.hpp"

using namespace dcf;
using dcf::test::bitwise_equal;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.resolution = 16;
  c.batch_size = 2;
  c.iterations = 3;
  c.synthetic_count = 4;
  c.ffc_blocks = 1;
  c.seed = 77;
  return c;
}

bool same_params(const ParamList& a, const ParamList& b) {
  if (a.params.size() != b.params.size() || a.buffers.size() != b.buffers.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (!bitwise_equal(a.params[i].tensor, b.params[i].tensor)) return false;
  for (std::size_t i = 0; i < a.buffers.size(); ++i)
    if (!bitwise_equal(a.buffers[i].tensor, b.buffers[i].tensor)) return false;
  return true;
}

bool same_moments(const Adam& a, const Adam& b) {
  return a.steps() == b.steps() && a.first_moments() == b.first_moments() &&
         a.second_moments() == b.second_moments();
}

bool same_report(const LossReport& a, const LossReport& b) {
  return a.l1 == b.l1 && a.adversarial == b.adversarial && a.perceptual == b.perceptual && a.style == b.style &&
         a.total == b.total;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("presets") {
  TrainConfig desk = TrainConfig::preset("desk");
  CHECK(desk.resolution == 64);
  CHECK(desk.batch_size == 4);
  CHECK(desk.iterations == 2000);
  CHECK(desk.learning_rate == 1e-4);
  TrainConfig paper = TrainConfig::preset("paper");
  CHECK(paper.batch_size == 8);
  CHECK(paper.learning_rate == 1e-4);
  CHECK(paper.iterations == 500000);
  CHECK(paper.resolution == 256);
  CHECK(paper.weights.style == 250.0);
  CHECK_THROWS_AS(TrainConfig::preset("huge"), std::invalid_argument);
}

TEST_CASE("config text parsing") {
  TrainConfig c;
  std::istringstream in(
      "# desk run\n"
      "resolution = 32\n"
      "  batch_size=2   # inline comment\n"
      "\n"
      "lambda_style = 100\n"
      "mask_mode = center\n"
      "adversarial = false\n"
      "seed = 0x10\n");
  c.apply(in, "test.cfg");
  CHECK(c.resolution == 32);
  CHECK(c.batch_size == 2);
  CHECK(c.weights.style == 100.0);
  CHECK(c.mask_mode == MaskMode::kCenter);
  CHECK_FALSE(c.adversarial);
  CHECK(c.seed == 16);

  std::istringstream bad_key("resolution = 32\nlearning_rat = 1\n");
  try {
    c.apply(bad_key, "test.cfg");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("test.cfg:2") != std::string::npos);
  }
  std::istringstream no_eq("resolution 32\n");
  CHECK_THROWS_AS(c.apply(no_eq, "x"), DataError);
  CHECK_THROWS_AS(c.set("batch_size", "two"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("adversarial", "maybe"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("mask_mode", "square"), std::invalid_argument);
}

TEST_CASE("serialized config parses back to the same entries") {
  TrainConfig a = tiny_config();
  a.curve_path = "curve.csv";
  a.weights.adversarial = 0.25;
  std::istringstream in(a.serialize());
  TrainConfig b;
  b.apply(in);
  CHECK(a.entries() == b.entries());
}

TEST_CASE("documented keys cover every entry") {
  const auto entries = TrainConfig{}.entries();
  const auto docs = TrainConfig::documented_keys();
  REQUIRE(entries.size() == docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) CHECK(entries[i].first == docs[i].first);
}

TEST_CASE("validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.checkpoint_interval = 10;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.checkpoint_path = "x.ckpt";
  CHECK_NOTHROW(c.validate());
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("Adam first step closed form") {
  Tensor p(Shape{1, 1, 1, 1}, 1.0);
  p.set_requires_grad(true);
  p.grad_mut()[0] = 2.0;
  ParamList list;
  list.add_param("p", p);
  Adam adam(1e-4, 0.9, 0.999, 1e-8);
  adam.step(list);
  // m_hat = 2, v_hat = 4.
  CHECK(p.item() == doctest::Approx(1.0 - 1e-4 * 2.0 / (2.0 + 1e-8)).epsilon(1e-15));
  CHECK(adam.first_moments()[0][0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(adam.second_moments()[0][0] == doctest::Approx(0.004).epsilon(1e-15));
  CHECK(adam.steps() == 1);
}

TEST_CASE("Adam with zero gradients") {
  Tensor p(Shape{1, 1, 1, 2}, std::vector<double>{0.5, -0.5});
  p.set_requires_grad(true);
  ParamList list;
  list.add_param("p", p);
  Adam fresh(1e-3, 0.9, 0.999, 1e-8);
  fresh.step(list);
  CHECK(p.ptr()[0] == 0.5);
  CHECK(p.ptr()[1] == -0.5);

  Adam adam(1e-3, 0.9, 0.999, 1e-8);
  p.grad_mut()[0] = 1.0;
  p.grad_mut()[1] = -3.0;
  adam.step(list);
  const auto m = adam.first_moments()[0];
  const auto v = adam.second_moments()[0];
  p.zero_grad();
  adam.step(list);
  for (int k = 0; k < 2; ++k) {
    CHECK(adam.first_moments()[0][k] == doctest::Approx(0.9 * m[k]).epsilon(1e-15));
    CHECK(adam.second_moments()[0][k] == doctest::Approx(0.999 * v[k]).epsilon(1e-15));
  }
}

TEST_CASE("gradient norm clipping") {
  Tensor a(Shape{1, 1, 1, 2}), b(Shape{1, 1, 1, 1});
  a.grad_mut()[0] = 3.0;
  a.grad_mut()[1] = 0.0;
  b.grad_mut()[0] = 4.0;
  ParamList list;
  list.add_param("a", a);
  list.add_param("b", b);
  CHECK(clip_grad_norm(list, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm(list, 10.0) == doctest::Approx(1.0));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
}

TEST_CASE("synthetic textures are deterministic and in range") {
  Dataset a = synthetic_textures(5, 16, 3), b = synthetic_textures(5, 16, 3), c = synthetic_textures(5, 16, 4);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(bitwise_equal(a.images[i], b.images[i]));
    CHECK(a.images[i].shape() == Shape{1, 3, 16, 16});
    for (double v : a.images[i].data()) REQUIRE((v >= -1.0 && v <= 1.0));
  }
  CHECK_FALSE(bitwise_equal(a.images[0], c.images[0]));
  CHECK(a.batch({0, 3}).shape() == Shape{2, 3, 16, 16});
  CHECK(a.subset(1, 2).names.front() == a.names[1]);
}

TEST_CASE("dataset loading order and errors") {
  auto dir = dcf::test::scratch_dir("dataset");
  Dataset src = synthetic_textures(3, 8, 1);
  write_image(dir / "b.png", tensor_to_image(src.images[0]));
  write_image(dir / "a.ppm", tensor_to_image(src.images[1]));
  write_image(dir / "c.png", tensor_to_image(src.images[2]));
  std::ofstream(dir / "notes.txt") << "ignored";
  Dataset d = load_dataset(dir);
  REQUIRE(d.size() == 3);
  CHECK(d.names == std::vector<std::string>{"a.ppm", "b.png", "c.png"});
  CHECK(dcf::test::max_abs_diff(d.images[1], src.images[0]) <= 1.0 / 127.5);

  Image8 odd{4, 4, 3, std::vector<std::uint8_t>(48, 9)};
  write_image(dir / "d.png", odd);
  try {
    load_dataset(dir);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("d.png") != std::string::npos);
  }
  auto empty = dcf::test::scratch_dir("dataset_empty");
  CHECK_THROWS_AS(load_dataset(empty), DataError);
  CHECK_THROWS_AS(load_dataset(empty / "missing"), DataError);
}

TEST_CASE("mean fill uses known pixels per channel") {
  Tensor img(Shape{1, 2, 2, 2}, std::vector<double>{1, 2, 3, 100, -1, -1, -1, 50});
  Tensor mask(Shape{1, 1, 2, 2}, std::vector<double>{1, 1, 1, 0});
  Tensor f = mean_fill(img, mask);
  CHECK(f.at(0, 0, 1, 1) == 2.0);
  CHECK(f.at(0, 1, 1, 1) == -1.0);
  CHECK(f.at(0, 0, 0, 0) == 1.0);
}

TEST_CASE("training is bitwise reproducible from a seed") {
  TrainConfig c = tiny_config();
  Dataset data = synthetic_textures(c.synthetic_count, c.resolution, c.seed);
  Trainer a(c, data), b(c, data);
  auto ca = a.train_loop(), cb = b.train_loop();
  REQUIRE(ca.size() == 3);
  REQUIRE(cb.size() == 3);
  for (std::size_t i = 0; i < ca.size(); ++i) CHECK(same_report(ca[i].loss, cb[i].loss));
  CHECK(same_params(a.network().parameters(), b.network().parameters()));
  CHECK(ca.back().iteration == 3);
}

TEST_CASE("a train step never touches the extractor") {
  TrainConfig c = tiny_config();
  Dataset data = synthetic_textures(c.synthetic_count, c.resolution, c.seed);
  Trainer t(c, data);
  FixedFeatureExtractor reference;
  t.train_step();
  CHECK(same_params(t.extractor().parameters(), reference.parameters()));
}

TEST_CASE("adversarial off leaves the discriminator untouched") {
  TrainConfig c = tiny_config();
  c.adversarial = false;
  Dataset data = synthetic_textures(c.synthetic_count, c.resolution, c.seed);
  Trainer t(c, data);
  PatchDiscriminator reference(3, c.seed ^ 0xD15C0000ull);
  LossReport r = t.train_step();
  CHECK(r.adversarial == 0.0);
  CHECK(same_params(t.discriminator().parameters(), reference.parameters()));
}

TEST_CASE("checkpoint round trip restores parameters, moments, iteration and RNG") {
  auto dir = dcf::test::scratch_dir("checkpoint");
  TrainConfig c = tiny_config();
  Dataset data = synthetic_textures(c.synthetic_count, c.resolution, c.seed);
  Trainer a(c, data);
  a.train_step();
  a.train_step();
  a.save_checkpoint(dir / "a.ckpt");
  CHECK_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));

  Trainer b(c, data);
  b.load_checkpoint(dir / "a.ckpt");
  CHECK(b.iteration() == 2);
  CHECK(same_params(a.network().parameters(), b.network().parameters()));
  CHECK(same_params(a.discriminator().parameters(), b.discriminator().parameters()));
  CHECK(same_moments(a.generator_optimizer(), b.generator_optimizer()));
  CHECK(same_moments(a.discriminator_optimizer(), b.discriminator_optimizer()));
  // Continuing both gives the same next step.
  CHECK(same_report(a.train_step(), b.train_step()));

  LoadedModel m = load_model(dir / "a.ckpt");
  CHECK(m.config.entries() == c.entries());
}

TEST_CASE("corrupt checkpoints are rejected") {
  auto dir = dcf::test::scratch_dir("checkpoint_bad");
  TrainConfig c = tiny_config();
  Dataset data = synthetic_textures(c.synthetic_count, c.resolution, c.seed);
  Trainer a(c, data);
  a.save_checkpoint(dir / "good.ckpt");
  std::string bytes;
  {
    std::ifstream in(dir / "good.ckpt", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::string bad_version = bytes;
  bad_version[8] = 9;
  Trainer b(c, data);
  CHECK_THROWS_AS(b.load_checkpoint(write("magic.ckpt", bad_magic)), DataError);
  CHECK_THROWS_AS(b.load_checkpoint(write("version.ckpt", bad_version)), DataError);
  CHECK_THROWS_AS(b.load_checkpoint(write("short.ckpt", bytes.substr(0, bytes.size() / 2))), DataError);
  CHECK_THROWS_AS(b.load_checkpoint(dir / "missing.ckpt"), DataError);
  CHECK_THROWS_AS(load_model(write("version2.ckpt", bad_version)), DataError);

  TrainConfig other = c;
  other.ffc_blocks = 2;
  Trainer d(other, data);
  CHECK_THROWS_AS(d.load_checkpoint(dir / "good.ckpt"), DataError);
}

TEST_CASE("loss curve CSV") {
  std::ostringstream out;
  write_curve_csv(out, {{1, {0.5, 0.1, 0.2, 0.01, 3.0}}, {2, {0.25, 0.0, 0.1, 0.0, 1.0}}});
  std::istringstream in(out.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "iteration,l1,adv,perc,style,total");
  CHECK(first.rfind("1,0.5", 0) == 0);
}

TEST_CASE("periodic checkpoints and curve files from train_loop") {
  auto dir = dcf::test::scratch_dir("loop");
  TrainConfig c = tiny_config();
  c.iterations = 4;
  c.checkpoint_interval = 2;
  c.checkpoint_path = (dir / "run.ckpt").string();
  c.curve_path = (dir / "curve.csv").string();
  Dataset data = synthetic_textures(c.synthetic_count, c.resolution, c.seed);
  Trainer t(c, data);
  int seen = 0;
  t.train_loop([&](const CurvePoint&) { ++seen; });
  CHECK(seen == 4);
  CHECK(std::filesystem::exists(c.checkpoint_path));
  std::ifstream csv(c.curve_path);
  int lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  CHECK(lines == 5);
  Trainer resumed(c, data);
  resumed.load_checkpoint(c.checkpoint_path);
  CHECK(resumed.iteration() == 4);
}

TEST_CASE("evaluation report") {
  TrainConfig c = tiny_config();
  Dataset data = synthetic_textures(3, 16, 5);
  DCFNetwork net = DCFNetwork::build(c.model(), 1);
  EvalReport r1 = evaluate(net, data, MaskMode::kIrregular, {1, 2}, 1);
  EvalReport r2 = evaluate(net, data, MaskMode::kIrregular, {1, 2}, 2);
  CHECK(r1.samples == 6);
  CHECK(r1.psnr_hole == r2.psnr_hole);
  CHECK(r1.frechet == r2.frechet);
  CHECK(r1.frechet >= 0.0);
  CHECK(std::isfinite(r1.psnr_hole_mean_fill));
  CHECK(r1.records().size() >= 7);
  CHECK_THROWS_AS(evaluate(net, data, MaskMode::kCenter, {}, 1), std::invalid_argument);
}

}  // TEST_SUITE
