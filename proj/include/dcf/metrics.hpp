#pragma once

#include <limits>
#include <vector>

#include "dcf/losses.hpp"
#include "dcf/tensor.hpp"

namespace dcf {

// Returned by psnr() when the inputs are identical (MSE = 0).
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);
// PSNR over hole pixels only (mask value 0), all channels. mask: (N, 1, H, W).
double psnr_masked(const Tensor& a, const Tensor& b, const Tensor& mask, double peak = 1.0);

// Local SSIM map over every position where the 11x11 Gaussian window (sigma
// 1.5) fits: shape (N, C, H - 10, W - 10). K1 = 0.01, K2 = 0.03, L = peak.
Tensor ssim_map(const Tensor& a, const Tensor& b, double peak = 1.0);
double ssim(const Tensor& a, const Tensor& b, double peak = 1.0);
// Mean of the SSIM map over windows centered on hole pixels.
double ssim_masked(const Tensor& a, const Tensor& b, const Tensor& mask, double peak = 1.0);

// Row-major dense square matrix.
struct SquareMatrix {
  int dim = 0;
  std::vector<double> values;

  SquareMatrix() = default;
  explicit SquareMatrix(int d) : dim(d), values(static_cast<std::size_t>(d) * d, 0.0) {}
  double& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * dim + j]; }
  double operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * dim + j]; }
  bool is_symmetric(double tol) const;
};

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  SquareMatrix vectors;        // column k pairs with values[k]
};

// Cyclic Jacobi rotations. Throws std::invalid_argument on asymmetric input.
SymmetricEigen symmetric_eigen(const SquareMatrix& m);
// V diag(sqrt(max(lambda, 0))) V^T.
SquareMatrix psd_sqrt(const SquareMatrix& m);

struct GaussianStats {
  std::vector<double> mean;
  SquareMatrix covariance;
  int count = 0;
};

// |muA - muB|^2 + Tr(SA + SB - 2 (SA^1/2 SB SA^1/2)^1/2).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// Sample mean and (n - 1)-normalized covariance of the rows of samples.
GaussianStats gaussian_stats(const std::vector<std::vector<double>>& samples);
// Spatially pooled deepest-stage features of each image in (N, 3, H, W).
std::vector<std::vector<double>> pooled_features(const Tensor& images,
                                                 const FixedFeatureExtractor& extractor);
GaussianStats fit_feature_stats(const Tensor& images, const FixedFeatureExtractor& extractor);

}  // namespace dcf
