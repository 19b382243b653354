#pragma once

#include <string>
#include <utility>

#include "dcf/layers.hpp"

namespace dcf {

struct FFCConfig {
  int channels_total = 256;
  double global_ratio = 0.5;
  bool enable_local_fourier_unit = true;

  int global_channels() const;
  int local_channels() const { return channels_total - global_channels(); }
  // Throws ShapeError unless both branches get at least one channel.
  void validate() const;
};

// rfft2 -> (re, im) stacked on channels -> 1x1 conv [-> BN] [-> ReLU] -> irfft2.
class FourierUnit {
 public:
  FourierUnit() = default;
  FourierUnit(int channels, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  void collect(const std::string& prefix, ParamList& out) const;

  // Test hooks: run the spectral conv without normalization / activation.
  void set_use_norm(bool on) { use_norm_ = on; }
  void set_use_activation(bool on) { use_activation_ = on; }
  ConvLayer& conv() { return conv_; }
  int channels() const { return channels_; }

 private:
  int channels_ = 0;
  ConvLayer conv_;
  BatchNorm2d bn_;
  bool use_norm_ = true;
  bool use_activation_ = true;
};

// Channel reduction (1x1 conv + BN + ReLU) to half width, a global Fourier
// Unit over every reduced channel plus a Local Fourier Unit over the first
// quarter of them (quadrant-stacked, transformed, tiled back), summed with the
// reduced map and restored by a 1x1 conv.
class SpectralTransform {
 public:
  SpectralTransform() = default;
  SpectralTransform(int in_channels, int out_channels, bool enable_lfu, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  void collect(const std::string& prefix, ParamList& out) const;

  void set_enable_lfu(bool on) { enable_lfu_ = on; }
  bool lfu_enabled() const { return enable_lfu_; }
  ConvBlock& reduce() { return reduce_; }
  FourierUnit& global_unit() { return global_unit_; }
  FourierUnit& local_unit() { return local_unit_; }
  ConvLayer& restore() { return restore_; }

 private:
  int hidden_ = 0;
  bool enable_lfu_ = true;
  ConvBlock reduce_;
  FourierUnit global_unit_;
  FourierUnit local_unit_;
  ConvLayer restore_;
};

// Two-branch layer: local->local, local->global and global->local 3x3 convs,
// global->global spectral transform; each branch output goes through BN+ReLU.
class FFCLayer {
 public:
  FFCLayer() = default;
  FFCLayer(const FFCConfig& config, Rng& rng);

  std::pair<Tensor, Tensor> forward(const Tensor& x_local, const Tensor& x_global, Mode mode);
  void collect(const std::string& prefix, ParamList& out) const;

  ConvLayer& local_to_local() { return l2l_; }
  ConvLayer& local_to_global() { return l2g_; }
  ConvLayer& global_to_local() { return g2l_; }
  SpectralTransform& global_to_global() { return g2g_; }

 private:
  FFCConfig config_;
  ConvLayer l2l_, l2g_, g2l_;
  SpectralTransform g2g_;
  BatchNorm2d bn_local_, bn_global_;
};

// Residual block of two FFC layers over a (local | global) channel split.
class FFCResBlock {
 public:
  FFCResBlock() = default;
  FFCResBlock(const FFCConfig& config, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  void collect(const std::string& prefix, ParamList& out) const;

  FFCLayer& first() { return first_; }
  FFCLayer& second() { return second_; }
  const FFCConfig& config() const { return config_; }

 private:
  FFCConfig config_;
  FFCLayer first_, second_;
};

}  // namespace dcf
