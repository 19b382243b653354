#pragma once

#include <complex>

#include "dcf/tensor.hpp"

namespace dcf {

// Half-plane spectrum of a real (N, C, H, W) tensor.
//
// Stored as a (N, C, H, 2 * (W/2 + 1)) tensor with real and imaginary parts
// interleaved along the last axis. Columns k = 1 .. W/2 - 1 stand in for their
// Hermitian mirrors W - k, which is why they carry double weight in energy
// sums and adjoints.
//
// Conventions: the forward transform is unnormalized and the inverse carries
// the full 1 / (H * W) factor.
class SpectrumTensor {
 public:
  SpectrumTensor() = default;
  SpectrumTensor(Tensor values, int source_width);

  const Tensor& values() const { return values_; }
  Tensor& values() { return values_; }
  int batch() const { return values_.shape().n; }
  int channels() const { return values_.shape().c; }
  int height() const { return values_.shape().h; }
  int width_half() const { return values_.shape().w / 2; }
  int source_width() const { return source_width_; }

  std::complex<double> at(int n, int c, int u, int k) const;
  void set(int n, int c, int u, int k, std::complex<double> v);

  static SpectrumTensor zeros(int n, int c, int h, int source_width);

 private:
  Tensor values_;
  int source_width_ = 0;
};

inline int half_width(int w) { return w / 2 + 1; }
bool is_power_of_two(int v);

// Multiplicity of half-spectrum column k in the full spectrum (1 or 2).
inline double hermitian_weight(int k, int width) {
  return (k == 0 || 2 * k == width) ? 1.0 : 2.0;
}

// Unnormalized real 2-D DFT over the spatial axes. H and W must be powers of two.
SpectrumTensor rfft2(const Tensor& x);
// Normalized inverse; reproduces x from rfft2(x).
Tensor irfft2(const SpectrumTensor& s, int out_h, int out_w);

// Adjoints of rfft2 / irfft2 as real-linear maps (real and imaginary parts
// treated as independent coordinates).
Tensor rfft2_backward(const SpectrumTensor& cotangent, int height, int width);
SpectrumTensor irfft2_backward(const Tensor& cotangent);

// (N, C, H, 2*Wh) interleaved spectrum <-> (N, 2C, H, Wh) with channel 2c
// holding Re and 2c + 1 holding Im of source channel c.
Tensor spectrum_to_channels(const SpectrumTensor& s);
SpectrumTensor channels_to_spectrum(const Tensor& x, int source_width);

}  // namespace dcf
