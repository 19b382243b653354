#include "dcf/model.hpp"

#include "dcf/errors.hpp"
#include "dcf/spectral.hpp"

namespace dcf {

void ModelConfig::validate() const {
  if (!is_power_of_two(resolution) || resolution < 8) {
    throw ShapeError("resolution must be a power of two >= 8 (divisible by 4), got " +
                     std::to_string(resolution));
  }
  if (kernel_side < 1 || kernel_side % 2 == 0) {
    throw ShapeError("kernel side must be odd, got " + std::to_string(kernel_side));
  }
  if (out_channels < 1 || ffc_blocks < 0) throw ShapeError("invalid model config");
}

std::optional<Shape> ShapeTrace::find(const std::string& name) const {
  for (const auto& [n, s] : entries_) {
    if (n == name) return s;
  }
  return std::nullopt;
}

namespace {

// Kernel-4 stride-1 layers keep their size only with one extra row/column of
// padding on the bottom/right.
const Padding kSame4{1, 2, 1, 2};

}  // namespace

DCFNetwork DCFNetwork::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  DCFNetwork net(config);
  const auto relu = std::optional<Activation>(Activation::kRelu);
  const int taps = config.kernel_side * config.kernel_side;

  net.enc1_ = ConvBlock(ConvSpec::conv(7, 3, 64, 1, Padding::uniform(3)), true, relu, rng);
  net.enc2_ = ConvBlock(ConvSpec::conv(4, 64, 128, 2, Padding::uniform(1)), true, relu, rng);
  net.enc3_ = ConvBlock(ConvSpec::conv(4, 128, 256, 1, kSame4), true, relu, rng);
  net.bottleneck_ = ConvBlock(ConvSpec::conv(1, 256, 256), true, relu, rng);
  FFCConfig ffc{256, config.global_ratio, config.enable_lfu};
  for (int i = 0; i < config.ffc_blocks; ++i) net.ffc_.emplace_back(ffc, rng);
  net.dec1_ = ConvBlock(ConvSpec::conv_transpose(1, 256, 256), true, relu, rng);
  net.dec2_ = ConvBlock(ConvSpec::conv_transpose(4, 256, 128, 1, kSame4), true, relu, rng);
  net.dec3_ =
      ConvBlock(ConvSpec::conv_transpose(4, 128, 64, 2, Padding::uniform(1)), true, relu, rng);
  net.dec4_ = ConvBlock(
      ConvSpec::conv_transpose(7, 64, config.out_channels, 2, Padding::uniform(3), 1), false,
      Activation::kTanh, rng);

  net.pred1_ = ConvBlock(ConvSpec::conv(7, 3, 64, 1, Padding::uniform(3)), true, relu, rng);
  net.pred2_ = ConvBlock(ConvSpec::conv(4, 64, 128, 2, Padding::uniform(1)), true, relu, rng);
  // Consumes [f2', e2'], hence 256 input channels.
  net.pred3_ = ConvBlock(ConvSpec::conv(4, 256, 256, 1, kSame4), true, relu, rng);
  net.head_ = ConvBlock(ConvSpec::conv(1, 256, taps), false, std::nullopt, rng);
  if (config.image_filter) {
    net.image_head_ = ConvBlock(ConvSpec::conv(1, 64, taps), false, std::nullopt, rng);
  }

  auto mismatches = compare_schedules(expected_schedule(config, 1), net.derived_schedule(1));
  if (!mismatches.empty()) {
    throw ShapeError("layer schedule audit failed: " + mismatches.front());
  }
  return net;
}

DCFNetwork::Encoded DCFNetwork::encode(const Tensor& image, Mode mode, ShapeTrace* trace) {
  Encoded e;
  e.f1 = enc1_.forward(image, mode);
  e.f2 = enc2_.forward(e.f1, mode);
  e.f2p = avg_pool2(e.f2);
  e.f3 = enc3_.forward(e.f2p, mode);
  if (trace) {
    trace->add("f1", e.f1.shape());
    trace->add("f2", e.f2.shape());
    trace->add("f2'", e.f2p.shape());
    trace->add("f3", e.f3.shape());
  }
  return e;
}

KernelField DCFNetwork::predict_kernels(const Tensor& image, const Tensor& f2p, Mode mode,
                                        ShapeTrace* trace) {
  return predict(image, f2p, mode, trace).second;
}

std::pair<Tensor, KernelField> DCFNetwork::predict(const Tensor& image, const Tensor& f2p,
                                                   Mode mode, ShapeTrace* trace) {
  Tensor e1 = pred1_.forward(image, mode);
  Tensor e2 = pred2_.forward(e1, mode);
  Tensor e2p = avg_pool2(e2);
  Tensor e3 = pred3_.forward(concat_channels(f2p, e2p), mode);
  KernelField t3 =
      normalize_kernels(KernelField(head_.forward(e3, mode), config_.kernel_side, false));
  if (trace) {
    trace->add("e1", e1.shape());
    trace->add("e2", e2.shape());
    trace->add("e2'", e2p.shape());
    trace->add("e3", e3.shape());
    trace->add("T3", t3.weights().shape());
  }
  return {e1, t3};
}

ForwardResult DCFNetwork::forward(const Tensor& image, const Tensor& mask, Mode mode,
                                  ShapeTrace* trace) {
  const Shape& s = image.shape();
  if (s.c != 3 || s.h != config_.resolution || s.w != config_.resolution) {
    throw ShapeError("network built for (N, 3, " + std::to_string(config_.resolution) + ", " +
                     std::to_string(config_.resolution) + ") inputs, got " + s.str());
  }
  if (mask.shape() != Shape{s.n, 1, s.h, s.w}) {
    throw ShapeError("mask " + mask.shape().str() + " does not match image " + s.str());
  }
  Encoded e = encode(image, mode, trace);
  auto [e1, t3] = predict(image, e.f2p, mode, trace);
  Tensor f3p = apply_filter(e.f3, t3);
  Tensor f = bottleneck_.forward(f3p, mode);
  if (trace) {
    trace->add("f3'", f3p.shape());
    trace->add("f4", f.shape());
  }
  for (auto& block : ffc_) f = block.forward(f, mode);
  if (trace) trace->add("f5", f.shape());
  Tensor f6 = dec1_.forward(f, mode);
  Tensor f7 = dec2_.forward(f6, mode);
  Tensor f8 = dec3_.forward(f7, mode);
  Tensor raw = dec4_.forward(f8, mode);
  if (trace) {
    trace->add("f6", f6.shape());
    trace->add("f7", f7.shape());
    trace->add("f8", f8.shape());
    trace->add("f9", raw.shape());
  }
  if (config_.image_filter) {
    KernelField t_img = normalize_kernels(
        KernelField(image_head_.forward(e1, mode), config_.kernel_side, false));
    raw = apply_filter(raw, t_img);
  }
  ForwardResult out;
  out.composited = blend(image, raw, mask);
  out.raw = raw;
  out.kernels = t3;
  return out;
}

ParamList DCFNetwork::parameters() const {
  ParamList p;
  enc1_.collect("enc1", p);
  enc2_.collect("enc2", p);
  enc3_.collect("enc3", p);
  bottleneck_.collect("bottleneck", p);
  for (std::size_t i = 0; i < ffc_.size(); ++i) ffc_[i].collect("ffc" + std::to_string(i), p);
  dec1_.collect("dec1", p);
  dec2_.collect("dec2", p);
  dec3_.collect("dec3", p);
  dec4_.collect("dec4", p);
  pred1_.collect("pred1", p);
  pred2_.collect("pred2", p);
  pred3_.collect("pred3", p);
  head_.collect("head", p);
  if (config_.image_filter) image_head_.collect("image_head", p);
  return p;
}

ShapeTrace DCFNetwork::expected_schedule(const ModelConfig& config, int batch) {
  const int r = config.resolution;
  const int taps = config.kernel_side * config.kernel_side;
  ShapeTrace t;
  t.add("f1", {batch, 64, r, r});
  t.add("f2", {batch, 128, r / 2, r / 2});
  t.add("f2'", {batch, 128, r / 4, r / 4});
  t.add("f3", {batch, 256, r / 4, r / 4});
  t.add("e1", {batch, 64, r, r});
  t.add("e2", {batch, 128, r / 2, r / 2});
  t.add("e2'", {batch, 128, r / 4, r / 4});
  t.add("e3", {batch, 256, r / 4, r / 4});
  t.add("T3", {batch, taps, r / 4, r / 4});
  t.add("f3'", {batch, 256, r / 4, r / 4});
  t.add("f4", {batch, 256, r / 4, r / 4});
  t.add("f5", {batch, 256, r / 4, r / 4});
  t.add("f6", {batch, 256, r / 4, r / 4});
  t.add("f7", {batch, 128, r / 4, r / 4});
  t.add("f8", {batch, 64, r / 2, r / 2});
  t.add("f9", {batch, config.out_channels, r, r});
  return t;
}

ShapeTrace DCFNetwork::derived_schedule(int batch) const {
  const int r = config_.resolution;
  const auto pool = [](Shape s) { return Shape{s.n, s.c, s.h / 2, s.w / 2}; };
  ShapeTrace t;
  const Shape input{batch, 3, r, r};
  const Shape f1 = conv_output_shape(input, enc1_.spec());
  const Shape f2 = conv_output_shape(f1, enc2_.spec());
  const Shape f2p = pool(f2);
  const Shape f3 = conv_output_shape(f2p, enc3_.spec());
  const Shape e1 = conv_output_shape(input, pred1_.spec());
  const Shape e2 = conv_output_shape(e1, pred2_.spec());
  const Shape e2p = pool(e2);
  const Shape e3 = conv_output_shape(Shape{batch, f2p.c + e2p.c, e2p.h, e2p.w}, pred3_.spec());
  const Shape t3 = conv_output_shape(e3, head_.spec());
  const Shape f4 = conv_output_shape(f3, bottleneck_.spec());
  const Shape f6 = conv_output_shape(f4, dec1_.spec());
  const Shape f7 = conv_output_shape(f6, dec2_.spec());
  const Shape f8 = conv_output_shape(f7, dec3_.spec());
  const Shape f9 = conv_output_shape(f8, dec4_.spec());
  t.add("f1", f1);
  t.add("f2", f2);
  t.add("f2'", f2p);
  t.add("f3", f3);
  t.add("e1", e1);
  t.add("e2", e2);
  t.add("e2'", e2p);
  t.add("e3", e3);
  t.add("T3", t3);
  t.add("f3'", f3);
  t.add("f4", f4);
  t.add("f5", f4);
  t.add("f6", f6);
  t.add("f7", f7);
  t.add("f8", f8);
  t.add("f9", f9);
  return t;
}

std::vector<std::string> compare_schedules(const ShapeTrace& expected, const ShapeTrace& actual) {
  std::vector<std::string> problems;
  for (const auto& [name, shape] : expected.entries()) {
    auto got = actual.find(name);
    if (!got) {
      problems.push_back(name + ": missing");
    } else if (*got != shape) {
      problems.push_back(name + ": expected " + shape.str() + ", got " + got->str());
    }
  }
  return problems;
}

}  // namespace dcf
