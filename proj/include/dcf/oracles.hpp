#pragma once

// Slow, direct reference implementations used to cross-check the library.
// None of these share code with the kernels they check.

#include <complex>
#include <vector>

#include "dcf/filtering.hpp"
#include "dcf/losses.hpp"
#include "dcf/metrics.hpp"
#include "dcf/ops.hpp"

namespace dcf::oracle {

// Nested-loop cross-correlation with asymmetric zero padding.
Tensor conv2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight, const Tensor& bias);
// Scatter form: every input pixel stamps its weighted kernel into the output.
Tensor conv_transpose2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
                        const Tensor& bias);
Tensor avg_pool2(const Tensor& x);
Tensor apply_filter(const Tensor& f, const Tensor& kernels, int side);
// Softmax per location over the tap axis.
Tensor softmax_taps(const Tensor& logits);

// Half-plane double-sum DFT: result[n][c][u * (W/2+1) + k].
std::vector<std::complex<double>> dft2_half(const Tensor& x, int n, int c);

double l1(const Tensor& a, const Tensor& b);
// Same stage layout as FixedFeatureExtractor, recomputed with the loop conv.
std::vector<Tensor> extractor_features(const Tensor& image, const FixedFeatureExtractor& e);
std::vector<double> gram(const Tensor& features, int n);
double perceptual(const Tensor& pred, const Tensor& target, const FixedFeatureExtractor& e);
double style(const Tensor& pred, const Tensor& target, const FixedFeatureExtractor& e);
Tensor discriminator_logits(const Tensor& image, const PatchDiscriminator& d);
double hinge_discriminator(const Tensor& real_logits, const Tensor& fake_logits);
double hinge_generator(const Tensor& fake_logits);

double psnr(const Tensor& a, const Tensor& b, double peak);
// Direct evaluation of each 11 x 11 window with a 2-D Gaussian.
double ssim(const Tensor& a, const Tensor& b, double peak);
// Tr sqrt(SA SB) from the eigenvalues of the (non-symmetric) product.
double frechet(const GaussianStats& a, const GaussianStats& b);

}  // namespace dcf::oracle
