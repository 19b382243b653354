#include "dcf/oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dcf::oracle {

Tensor conv2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight, const Tensor& bias) {
  const Shape& s = x.shape();
  const int oh = (s.h + spec.padding.top + spec.padding.bottom - spec.kernel_h) / spec.stride + 1;
  const int ow = (s.w + spec.padding.left + spec.padding.right - spec.kernel_w) / spec.stride + 1;
  Tensor out(Shape{s.n, spec.out_channels, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int o = 0; o < spec.out_channels; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = bias.defined() ? bias.at(0, o, 0, 0) : 0.0;
          for (int c = 0; c < s.c; ++c)
            for (int i = 0; i < spec.kernel_h; ++i)
              for (int j = 0; j < spec.kernel_w; ++j) {
                const int sy = y * spec.stride + i - spec.padding.top;
                const int sx = xx * spec.stride + j - spec.padding.left;
                if (sy < 0 || sy >= s.h || sx < 0 || sx >= s.w) continue;
                acc += weight.at(o, c, i, j) * x.at(n, c, sy, sx);
              }
          out.at(n, o, y, xx) = acc;
        }
  return out;
}

Tensor conv_transpose2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
                        const Tensor& bias) {
  const Shape& s = x.shape();
  const int oh = (s.h - 1) * spec.stride - spec.padding.top - spec.padding.bottom + spec.kernel_h +
                 spec.output_padding;
  const int ow = (s.w - 1) * spec.stride - spec.padding.left - spec.padding.right + spec.kernel_w +
                 spec.output_padding;
  Tensor out(Shape{s.n, spec.out_channels, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int xx = 0; xx < s.w; ++xx)
          for (int o = 0; o < spec.out_channels; ++o)
            for (int i = 0; i < spec.kernel_h; ++i)
              for (int j = 0; j < spec.kernel_w; ++j) {
                const int ty = y * spec.stride + i - spec.padding.top;
                const int tx = xx * spec.stride + j - spec.padding.left;
                if (ty < 0 || ty >= oh || tx < 0 || tx >= ow) continue;
                out.at(n, o, ty, tx) += x.at(n, c, y, xx) * weight.at(c, o, i, j);
              }
  if (bias.defined()) {
    for (int n = 0; n < s.n; ++n)
      for (int o = 0; o < spec.out_channels; ++o)
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx) out.at(n, o, y, xx) += bias.at(0, o, 0, 0);
  }
  return out;
}

Tensor avg_pool2(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor out(Shape{s.n, s.c, s.h / 2, s.w / 2});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h / 2; ++y)
        for (int xx = 0; xx < s.w / 2; ++xx)
          out.at(n, c, y, xx) = (x.at(n, c, 2 * y, 2 * xx) + x.at(n, c, 2 * y, 2 * xx + 1) +
                                 x.at(n, c, 2 * y + 1, 2 * xx) + x.at(n, c, 2 * y + 1, 2 * xx + 1)) /
                                4.0;
  return out;
}

Tensor apply_filter(const Tensor& f, const Tensor& kernels, int side) {
  const Shape& s = f.shape();
  const int r = side / 2;
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int xx = 0; xx < s.w; ++xx) {
          double acc = 0.0;
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
              const int sy = std::clamp(y + dy, 0, s.h - 1);
              const int sx = std::clamp(xx + dx, 0, s.w - 1);
              const int tap = (dy + r) * side + (dx + r);
              acc += kernels.at(n, tap, y, xx) * f.at(n, c, sy, sx);
            }
          out.at(n, c, y, xx) = acc;
        }
  return out;
}

Tensor softmax_taps(const Tensor& logits) {
  const Shape& s = logits.shape();
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        double denom = 0.0;
        for (int k = 0; k < s.c; ++k) denom += std::exp(logits.at(n, k, y, x));
        for (int k = 0; k < s.c; ++k) out.at(n, k, y, x) = std::exp(logits.at(n, k, y, x)) / denom;
      }
  return out;
}

std::vector<std::complex<double>> dft2_half(const Tensor& x, int n, int c) {
  const int h = x.shape().h, w = x.shape().w, wh = w / 2 + 1;
  std::vector<std::complex<double>> out(static_cast<std::size_t>(h) * wh);
  for (int u = 0; u < h; ++u)
    for (int k = 0; k < wh; ++k) {
      std::complex<double> acc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const double theta = -2.0 * std::numbers::pi *
                               (static_cast<double>(u) * y / h + static_cast<double>(k) * xx / w);
          acc += x.at(n, c, y, xx) * std::complex<double>(std::cos(theta), std::sin(theta));
        }
      out[static_cast<std::size_t>(u) * wh + k] = acc;
    }
  return out;
}

double l1(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += std::fabs(a.ptr()[i] - b.ptr()[i]);
  return acc / static_cast<double>(a.numel());
}

std::vector<Tensor> extractor_features(const Tensor& image, const FixedFeatureExtractor& e) {
  const ParamList p = e.parameters();
  std::vector<Tensor> out;
  Tensor x = image;
  for (const auto& stage : p.params) {
    const Shape ws = stage.tensor.shape();
    ConvSpec spec = ConvSpec::conv(4, ws.c, ws.n, 2, Padding::uniform(1));
    x = oracle::conv2d(x, spec, stage.tensor, Tensor());
    for (double& v : x.data()) v = v > 0 ? v : 0.0;
    out.push_back(x);
  }
  return out;
}

std::vector<double> gram(const Tensor& f, int n) {
  const Shape& s = f.shape();
  std::vector<double> g(static_cast<std::size_t>(s.c) * s.c, 0.0);
  for (int i = 0; i < s.c; ++i)
    for (int j = 0; j < s.c; ++j) {
      double acc = 0.0;
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) acc += f.at(n, i, y, x) * f.at(n, j, y, x);
      g[static_cast<std::size_t>(i) * s.c + j] = acc / (static_cast<double>(s.c) * s.h * s.w);
    }
  return g;
}

double perceptual(const Tensor& pred, const Tensor& target, const FixedFeatureExtractor& e) {
  const auto fp = extractor_features(pred, e);
  const auto ft = extractor_features(target, e);
  double total = 0.0;
  for (std::size_t s = 0; s < fp.size(); ++s) total += l1(fp[s], ft[s]);
  return total;
}

double style(const Tensor& pred, const Tensor& target, const FixedFeatureExtractor& e) {
  const auto fp = extractor_features(pred, e);
  const auto ft = extractor_features(target, e);
  double total = 0.0;
  for (std::size_t s = 0; s < fp.size(); ++s) {
    double acc = 0.0;
    std::size_t count = 0;
    for (int n = 0; n < fp[s].shape().n; ++n) {
      const auto gp = gram(fp[s], n);
      const auto gt = gram(ft[s], n);
      for (std::size_t k = 0; k < gp.size(); ++k) acc += std::fabs(gp[k] - gt[k]);
      count += gp.size();
    }
    total += acc / static_cast<double>(count);
  }
  return total;
}

Tensor discriminator_logits(const Tensor& image, const PatchDiscriminator& d) {
  const ParamList p = d.parameters();
  Tensor x = image;
  const std::size_t layers = p.params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = p.params[2 * l].tensor;
    const Tensor& b = p.params[2 * l + 1].tensor;
    x = oracle::conv2d(x, ConvSpec::conv(4, w.shape().c, w.shape().n, 2, Padding::uniform(1)), w, b);
    if (l + 1 < layers) {
      for (double& v : x.data()) v = v > 0 ? v : 0.2 * v;
    }
  }
  return x;
}

double hinge_discriminator(const Tensor& real_logits, const Tensor& fake_logits) {
  double real = 0.0, fake = 0.0;
  for (double v : real_logits.data()) real += std::max(0.0, 1.0 - v);
  for (double v : fake_logits.data()) fake += std::max(0.0, 1.0 + v);
  return real / static_cast<double>(real_logits.numel()) + fake / static_cast<double>(fake_logits.numel());
}

double hinge_generator(const Tensor& fake_logits) {
  double acc = 0.0;
  for (double v : fake_logits.data()) acc += v;
  return -acc / static_cast<double>(fake_logits.numel());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += (a.ptr()[i] - b.ptr()[i]) * (a.ptr()[i] - b.ptr()[i]);
  const double mse = acc / static_cast<double>(a.numel());
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& a, const Tensor& b, double peak) {
  constexpr int win = 11;
  const double sigma = 1.5;
  double weights[win][win];
  double total = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - 5, dj = j - 5;
      weights[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      total += weights[i][j];
    }
  for (auto& row : weights)
    for (double& v : row) v /= total;
  const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
  const Shape& s = a.shape();
  double acc = 0.0;
  std::size_t count = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y + win <= s.h; ++y)
        for (int x = 0; x + win <= s.w; ++x) {
          double mx = 0, my = 0;
          for (int i = 0; i < win; ++i)
            for (int j = 0; j < win; ++j) {
              mx += weights[i][j] * a.at(n, c, y + i, x + j);
              my += weights[i][j] * b.at(n, c, y + i, x + j);
            }
          double vx = 0, vy = 0, cov = 0;
          for (int i = 0; i < win; ++i)
            for (int j = 0; j < win; ++j) {
              const double dx = a.at(n, c, y + i, x + j) - mx;
              const double dy = b.at(n, c, y + i, x + j) - my;
              vx += weights[i][j] * dx * dx;
              vy += weights[i][j] * dy * dy;
              cov += weights[i][j] * dx * dy;
            }
          acc += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
          ++count;
        }
  return acc / static_cast<double>(count);
}

double frechet(const GaussianStats& a, const GaussianStats& b) {
  const int d = a.covariance.dim;
  Eigen::MatrixXd sa(d, d), sb(d, d);
  Eigen::VectorXd ma(d), mb(d);
  for (int i = 0; i < d; ++i) {
    ma(i) = a.mean[i];
    mb(i) = b.mean[i];
    for (int j = 0; j < d; ++j) {
      sa(i, j) = a.covariance(i, j);
      sb(i, j) = b.covariance(i, j);
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(sa * sb, /*computeEigenvectors=*/false);
  double trace_root = 0.0;
  for (int i = 0; i < d; ++i) trace_root += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * trace_root;
}

}  // namespace dcf::oracle
