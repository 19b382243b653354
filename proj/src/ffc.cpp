#include "dcf/ffc.hpp"

#include <cmath>

#include "dcf/errors.hpp"
#include "dcf/spectral.hpp"

namespace dcf {

int FFCConfig::global_channels() const {
  return static_cast<int>(std::lround(global_ratio * channels_total));
}

void FFCConfig::validate() const {
  if (!(global_ratio > 0.0 && global_ratio < 1.0)) {
    throw ShapeError("FFC global ratio must lie in (0, 1)");
  }
  if (global_channels() < 1 || local_channels() < 1) {
    throw ShapeError("FFC split of " + std::to_string(channels_total) +
                     " channels leaves an empty branch");
  }
}

FourierUnit::FourierUnit(int channels, Rng& rng)
    : channels_(channels),
      conv_(ConvSpec::conv(1, 2 * channels, 2 * channels), /*with_bias=*/false, rng),
      bn_(2 * channels) {}

Tensor FourierUnit::forward(const Tensor& x, Mode mode) {
  const Shape& s = x.shape();
  if (s.c != channels_) {
    throw ShapeError("FourierUnit expects " + std::to_string(channels_) + " channels, got " +
                     s.str());
  }
  SpectrumTensor spectrum = rfft2(x);
  Tensor y = conv_.forward(spectrum_to_channels(spectrum));
  if (use_norm_) y = bn_.forward(y, mode);
  if (use_activation_) y = relu(y);
  return irfft2(channels_to_spectrum(y, s.w), s.h, s.w);
}

void FourierUnit::collect(const std::string& prefix, ParamList& out) const {
  conv_.collect(prefix + ".conv", out);
  bn_.collect(prefix + ".bn", out);
}

SpectralTransform::SpectralTransform(int in_channels, int out_channels, bool enable_lfu,
                                     Rng& rng)
    : hidden_(out_channels / 2), enable_lfu_(enable_lfu) {
  if (hidden_ < 1) throw ShapeError("SpectralTransform needs at least 2 output channels");
  if (hidden_ % 4 != 0 && enable_lfu) {
    throw ShapeError("Local Fourier Unit needs the reduced width (" + std::to_string(hidden_) +
                     ") to be divisible by 4");
  }
  reduce_ = ConvBlock(ConvSpec::conv(1, in_channels, hidden_), true, Activation::kRelu, rng);
  global_unit_ = FourierUnit(hidden_, rng);
  if (hidden_ % 4 == 0) local_unit_ = FourierUnit(hidden_, rng);
  restore_ = ConvLayer(ConvSpec::conv(1, hidden_, out_channels), /*with_bias=*/false, rng);
}

Tensor SpectralTransform::forward(const Tensor& x, Mode mode) {
  Tensor reduced = reduce_.forward(x, mode);
  Tensor mixed = add(reduced, global_unit_.forward(reduced, mode));
  if (enable_lfu_) {
    if (local_unit_.channels() == 0) {
      throw ShapeError("Local Fourier Unit enabled on a transform built without one");
    }
    Tensor quarter = slice_channels(reduced, 0, hidden_ / 4);
    Tensor local = local_unit_.forward(quadrant_stack(quarter), mode);
    mixed = add(mixed, tile2x2(local));
  }
  return restore_.forward(mixed);
}

void SpectralTransform::collect(const std::string& prefix, ParamList& out) const {
  reduce_.collect(prefix + ".reduce", out);
  global_unit_.collect(prefix + ".fu", out);
  if (local_unit_.channels() > 0) local_unit_.collect(prefix + ".lfu", out);
  restore_.collect(prefix + ".restore", out);
}

FFCLayer::FFCLayer(const FFCConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const int cl = config_.local_channels();
  const int cg = config_.global_channels();
  const Padding same = Padding::uniform(1);
  l2l_ = ConvLayer(ConvSpec::conv(3, cl, cl, 1, same), false, rng);
  l2g_ = ConvLayer(ConvSpec::conv(3, cl, cg, 1, same), false, rng);
  g2l_ = ConvLayer(ConvSpec::conv(3, cg, cl, 1, same), false, rng);
  g2g_ = SpectralTransform(cg, cg, config_.enable_local_fourier_unit, rng);
  bn_local_ = BatchNorm2d(cl);
  bn_global_ = BatchNorm2d(cg);
}

std::pair<Tensor, Tensor> FFCLayer::forward(const Tensor& x_local, const Tensor& x_global,
                                            Mode mode) {
  Tensor y_local = add(l2l_.forward(x_local), g2l_.forward(x_global));
  Tensor y_global = add(l2g_.forward(x_local), g2g_.forward(x_global, mode));
  return {relu(bn_local_.forward(y_local, mode)), relu(bn_global_.forward(y_global, mode))};
}

void FFCLayer::collect(const std::string& prefix, ParamList& out) const {
  l2l_.collect(prefix + ".l2l", out);
  l2g_.collect(prefix + ".l2g", out);
  g2l_.collect(prefix + ".g2l", out);
  g2g_.collect(prefix + ".g2g", out);
  bn_local_.collect(prefix + ".bn_l", out);
  bn_global_.collect(prefix + ".bn_g", out);
}

FFCResBlock::FFCResBlock(const FFCConfig& config, Rng& rng)
    : config_(config), first_(config, rng), second_(config, rng) {}

Tensor FFCResBlock::forward(const Tensor& x, Mode mode) {
  if (x.shape().c != config_.channels_total) {
    throw ShapeError("FFCResBlock expects " + std::to_string(config_.channels_total) +
                     " channels, got " + x.shape().str());
  }
  const int cl = config_.local_channels();
  const int cg = config_.global_channels();
  auto [l1, g1] = first_.forward(slice_channels(x, 0, cl), slice_channels(x, cl, cg), mode);
  auto [l2, g2] = second_.forward(l1, g1, mode);
  return add(x, concat_channels(l2, g2));
}

void FFCResBlock::collect(const std::string& prefix, ParamList& out) const {
  first_.collect(prefix + ".ffc1", out);
  second_.collect(prefix + ".ffc2", out);
}

}  // namespace dcf
