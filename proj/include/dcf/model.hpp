#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dcf/ffc.hpp"
#include "dcf/filtering.hpp"
#include "dcf/layers.hpp"

namespace dcf {

struct ModelConfig {
  int resolution = 64;
  int kernel_side = 3;
  int out_channels = 3;
  int ffc_blocks = 6;
  double global_ratio = 0.5;
  bool enable_lfu = true;
  // Extra pixel-level predictive filter on the decoded image (off by default).
  bool image_filter = false;

  // Throws ShapeError for resolutions that are not powers of two >= 8.
  void validate() const;
};

// Named intermediate shapes, in forward order.
class ShapeTrace {
 public:
  void add(std::string name, const Shape& shape) { entries_.emplace_back(std::move(name), shape); }
  const std::vector<std::pair<std::string, Shape>>& entries() const { return entries_; }
  std::optional<Shape> find(const std::string& name) const;

 private:
  std::vector<std::pair<std::string, Shape>> entries_;
};

struct ForwardResult {
  Tensor raw;          // tanh output of the decoder
  Tensor composited;   // known pixels from the input, holes from raw
  KernelField kernels; // T3
};

// Dual-path network: feature path (encoder, filter site, FFC trunk, decoder)
// and kernel-prediction path sharing f2' with it.
class DCFNetwork {
 public:
  struct Encoded {
    Tensor f1, f2, f2p, f3;
  };

  static DCFNetwork build(const ModelConfig& config, std::uint64_t seed);

  Encoded encode(const Tensor& image, Mode mode, ShapeTrace* trace = nullptr);
  KernelField predict_kernels(const Tensor& image, const Tensor& f2p, Mode mode,
                              ShapeTrace* trace = nullptr);
  // image: (N, 3, R, R) in [-1, 1] with holes already zeroed; mask: (N, 1, R, R).
  ForwardResult forward(const Tensor& image, const Tensor& mask, Mode mode,
                        ShapeTrace* trace = nullptr);

  ParamList parameters() const;
  const ModelConfig& config() const { return config_; }

  // Sizes the layer schedule must produce, scaled from the 256 x 256 layout.
  static ShapeTrace expected_schedule(const ModelConfig& config, int batch);
  // Sizes derived from each layer's ConvSpec by the shape function alone.
  ShapeTrace derived_schedule(int batch) const;

  ConvBlock& kernel_head() { return head_; }
  std::vector<FFCResBlock>& ffc_blocks() { return ffc_; }

 private:
  explicit DCFNetwork(const ModelConfig& config) : config_(config) {}
  // Predictor trunk; returns e1 alongside T3 for the optional image-level head.
  std::pair<Tensor, KernelField> predict(const Tensor& image, const Tensor& f2p, Mode mode,
                                         ShapeTrace* trace);

  ModelConfig config_;
  // Feature path.
  ConvBlock enc1_, enc2_, enc3_, bottleneck_;
  std::vector<FFCResBlock> ffc_;
  ConvBlock dec1_, dec2_, dec3_, dec4_;
  // Kernel-prediction path.
  ConvBlock pred1_, pred2_, pred3_, head_;
  ConvBlock image_head_;
};

// Mismatches between two schedules, one line each; empty when they agree.
std::vector<std::string> compare_schedules(const ShapeTrace& expected, const ShapeTrace& actual);

}  // namespace dcf
