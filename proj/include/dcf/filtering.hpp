#pragma once

#include <utility>

#include "dcf/tensor.hpp"

namespace dcf {

// Per-pixel N x N filter bank of shape (batch, N*N, h, w). Tap k = i * N + j
// weights the neighbor at offset (i - N/2, j - N/2).
class KernelField {
 public:
  KernelField() = default;
  KernelField(Tensor weights, int side, bool normalized);

  const Tensor& weights() const { return weights_; }
  Tensor& weights() { return weights_; }
  int side() const { return side_; }
  int radius() const { return side_ / 2; }
  bool normalized() const { return normalized_; }

  // Uniform kernels that copy each pixel's own value.
  static KernelField identity(int batch, int side, int h, int w);

 private:
  Tensor weights_;
  int side_ = 1;
  bool normalized_ = false;
};

// Softmax over the N*N taps at every location.
KernelField normalize_kernels(const KernelField& raw);

// out[b, c, r] = sum over s in the N x N neighborhood of r of
// T[b, s - r, r] * f[b, c, s], with edge-clamped (replicate) padding.
// One kernel per pixel is shared by every channel.
Tensor apply_filter(const Tensor& f, const KernelField& kernels);

// Explicit adjoints of apply_filter for a given output cotangent.
std::pair<Tensor, Tensor> apply_filter_backward(const Tensor& cotangent, const Tensor& f,
                                                const KernelField& kernels);

}  // namespace dcf
