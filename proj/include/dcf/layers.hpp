#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dcf/ops.hpp"
#include "dcf/random.hpp"

namespace dcf {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Flat view over a network's state. params receive gradients; buffers
// (normalization running statistics) are persisted but never optimized.
struct ParamList {
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> buffers;

  void add_param(std::string name, Tensor t) { params.push_back({std::move(name), std::move(t)}); }
  void add_buffer(std::string name, Tensor t) { buffers.push_back({std::move(name), std::move(t)}); }
  std::size_t param_count() const;
  void zero_grad();
  void set_requires_grad(bool on);
};

// Zero-mean normal with std sqrt(2 / fan_in).
void init_he_normal(Tensor& t, int fan_in, Rng& rng);

// Convolution or transposed convolution, chosen by spec.transpose.
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(const ConvSpec& spec, bool with_bias, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

  const ConvSpec& spec() const { return spec_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  ConvSpec spec_;
  Tensor weight_;
  Tensor bias_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels) : params_(BatchNormParams::identity(channels)) {
    params_.gamma.set_requires_grad(true);
    params_.beta.set_requires_grad(true);
  }

  Tensor forward(const Tensor& x, Mode mode) { return batch_norm(x, params_, mode); }
  void collect(const std::string& prefix, ParamList& out) const;
  BatchNormParams& params() { return params_; }

 private:
  BatchNormParams params_;
};

// conv -> optional batch norm -> optional activation.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const ConvSpec& spec, bool norm, std::optional<Activation> act, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  void collect(const std::string& prefix, ParamList& out) const;

  ConvLayer& conv() { return conv_; }
  const ConvSpec& spec() const { return conv_.spec(); }

 private:
  ConvLayer conv_;
  bool norm_ = false;
  BatchNorm2d bn_;
  std::optional<Activation> act_;
};

}  // namespace dcf
