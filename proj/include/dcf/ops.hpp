#pragma once

#include <string>

#include "dcf/tensor.hpp"

namespace dcf {

// Zero padding added on each side of the spatial axes.
struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;

  static Padding uniform(int p) { return {p, p, p, p}; }
  bool operator==(const Padding&) const = default;
};

// Geometry of a 2-D convolution or its transpose.
//
// Weights are laid out (out, in, kh, kw) for a convolution and (in, out, kh, kw)
// for a transposed convolution. A transposed convolution with a given spec is
// the input-adjoint of the convolution that maps its output back to its input,
// so both share the same padding arithmetic.
struct ConvSpec {
  int kernel_h = 1;
  int kernel_w = 1;
  int in_channels = 1;
  int out_channels = 1;
  int stride = 1;
  Padding padding;
  bool transpose = false;
  int output_padding = 0;

  static ConvSpec conv(int kernel, int in, int out, int stride = 1, Padding pad = {});
  static ConvSpec conv_transpose(int kernel, int in, int out, int stride = 1,
                                 Padding pad = {}, int output_padding = 0);

  Shape weight_shape() const;
  // Number of inputs feeding one output activation.
  int fan_in() const;
  std::string str() const;
};

int conv_output_extent(int in, int kernel, int stride, int pad_before, int pad_after,
                       bool transpose, int output_padding);
// Output shape of applying spec to an input of shape in; throws ShapeError on
// channel mismatch or an empty output.
Shape conv_output_shape(const Shape& in, const ConvSpec& spec);

// Cross-correlation with asymmetric zero padding. bias may be undefined.
Tensor conv2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
              const Tensor& bias);
// Fractionally strided convolution: the adjoint of conv2d with respect to
// its input, plus bias.
Tensor conv_transpose2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
                        const Tensor& bias);

// 2x2 mean, stride 2. Spatial dims must be even.
Tensor avg_pool2(const Tensor& x);

enum class Activation { kRelu, kLeakyRelu, kTanh };
inline constexpr double kLeakySlope = 0.2;
Tensor activation(const Tensor& x, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::kRelu); }
inline Tensor tanh(const Tensor& x) { return activation(x, Activation::kTanh); }

enum class Mode { kTrain, kEval };

// Per-channel affine normalization. Running statistics are (1, C, 1, 1)
// tensors that train mode updates in place and eval mode consumes.
struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormParams identity(int channels);
  int channels() const { return gamma.shape().c; }
};
Tensor batch_norm(const Tensor& x, BatchNormParams& params, Mode mode);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int begin, int count);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor abs(const Tensor& x);
// Single-element reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Weighted sum of single-element tensors.
Tensor weighted_sum(std::initializer_list<std::pair<double, Tensor>> terms);

// mask * a + (1 - mask) * b with a (N, 1, H, W) mask broadcast over channels.
// No gradient flows into the mask.
Tensor blend(const Tensor& a, const Tensor& b, const Tensor& mask);

// Splits each map into a 2x2 grid of quadrants stacked along channels:
// (N, C, H, W) -> (N, 4C, H/2, W/2), order [top-left, bottom-left, top-right,
// bottom-right].
Tensor quadrant_stack(const Tensor& x);
// Repeats each map in a 2x2 grid: (N, C, H, W) -> (N, C, 2H, 2W).
Tensor tile2x2(const Tensor& x);

}  // namespace dcf
