#include "dcf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dcf/errors.hpp"

namespace dcf {

namespace {

void expect_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + a.shape().str() + " and " +
                     b.shape().str() + " differ");
  }
}

double psnr_from_mse(double mse, double peak) {
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable 'valid' Gaussian filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& g) {
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
  expect_same(a, b, "psnr");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a.ptr()[i] - b.ptr()[i];
    acc += d * d;
  }
  return psnr_from_mse(acc / static_cast<double>(a.numel()), peak);
}

double psnr_masked(const Tensor& a, const Tensor& b, const Tensor& mask, double peak) {
  expect_same(a, b, "psnr_masked");
  const Shape& s = a.shape();
  if (mask.shape() != Shape{s.n, 1, s.h, s.w}) throw ShapeError("psnr_masked: mask shape");
  double acc = 0.0;
  std::size_t count = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          if (mask.at(n, 0, y, x) != 0.0) continue;
          const double d = a.at(n, c, y, x) - b.at(n, c, y, x);
          acc += d * d;
          ++count;
        }
      }
    }
  }
  if (count == 0) throw std::invalid_argument("psnr_masked: mask has no holes");
  return psnr_from_mse(acc / static_cast<double>(count), peak);
}

Tensor ssim_map(const Tensor& a, const Tensor& b, double peak) {
  expect_same(a, b, "ssim");
  const Shape& s = a.shape();
  if (s.h < kWindow || s.w < kWindow) {
    throw ShapeError("ssim needs images of at least 11x11, got " + s.str());
  }
  const auto g = gaussian_window();
  const double c1 = (kK1 * peak) * (kK1 * peak);
  const double c2 = (kK2 * peak) * (kK2 * peak);
  const int oh = s.h - kWindow + 1, ow = s.w - kWindow + 1;
  Tensor out(Shape{s.n, s.c, oh, ow});
  const std::size_t plane = s.plane();
  std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        x[i] = a.ptr()[off + i];
        y[i] = b.ptr()[off + i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
      const auto mx = filter_valid(x, s.h, s.w, g);
      const auto my = filter_valid(y, s.h, s.w, g);
      const auto exx = filter_valid(xx, s.h, s.w, g);
      const auto eyy = filter_valid(yy, s.h, s.w, g);
      const auto exy = filter_valid(xy, s.h, s.w, g);
      double* o = out.ptr() + (static_cast<std::size_t>(n) * s.c + c) * oh * ow;
      for (int i = 0; i < oh * ow; ++i) {
        const double vx = exx[i] - mx[i] * mx[i];
        const double vy = eyy[i] - my[i] * my[i];
        const double cov = exy[i] - mx[i] * my[i];
        o[i] = ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      }
    }
  }
  return out;
}

double ssim(const Tensor& a, const Tensor& b, double peak) {
  Tensor m = ssim_map(a, b, peak);
  double acc = 0.0;
  for (double v : m.data()) acc += v;
  return acc / static_cast<double>(m.numel());
}

double ssim_masked(const Tensor& a, const Tensor& b, const Tensor& mask, double peak) {
  Tensor m = ssim_map(a, b, peak);
  const Shape& ms = m.shape();
  if (mask.shape() != Shape{ms.n, 1, a.shape().h, a.shape().w}) {
    throw ShapeError("ssim_masked: mask shape");
  }
  const int r = kWindow / 2;
  double acc = 0.0;
  std::size_t count = 0;
  for (int n = 0; n < ms.n; ++n) {
    for (int c = 0; c < ms.c; ++c) {
      for (int y = 0; y < ms.h; ++y) {
        for (int x = 0; x < ms.w; ++x) {
          if (mask.at(n, 0, y + r, x + r) != 0.0) continue;
          acc += m.at(n, c, y, x);
          ++count;
        }
      }
    }
  }
  if (count == 0) return std::nan("");
  return acc / static_cast<double>(count);
}

bool SquareMatrix::is_symmetric(double tol) const {
  double scale = 1.0;
  for (double v : values) scale = std::max(scale, std::fabs(v));
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      if (std::fabs((*this)(i, j) - (*this)(j, i)) > tol * scale) return false;
    }
  }
  return true;
}

SymmetricEigen symmetric_eigen(const SquareMatrix& m) {
  if (!m.is_symmetric(1e-10)) {
    throw std::invalid_argument("symmetric_eigen: matrix is not symmetric");
  }
  const int n = m.dim;
  SquareMatrix a = m;
  SquareMatrix v(n);
  for (int i = 0; i < n; ++i) v(i, i) = 1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
  }

  double norm = 0.0;
  for (double x : a.values) norm += x * x;
  const double tiny = 1e-30 * std::max(norm, 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= tiny) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) < a(y, y); });
  SymmetricEigen out;
  out.vectors = SquareMatrix(n);
  for (int k = 0; k < n; ++k) {
    out.values.push_back(a(order[k], order[k]));
    for (int i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

SquareMatrix psd_sqrt(const SquareMatrix& m) {
  const SymmetricEigen e = symmetric_eigen(m);
  const int n = m.dim;
  SquareMatrix out(n);
  for (int k = 0; k < n; ++k) {
    const double root = std::sqrt(std::max(e.values[k], 0.0));
    if (root == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double vi = e.vectors(i, k) * root;
      for (int j = 0; j < n; ++j) out(i, j) += vi * e.vectors(j, k);
    }
  }
  return out;
}

namespace {

SquareMatrix multiply(const SquareMatrix& a, const SquareMatrix& b) {
  const int n = a.dim;
  SquareMatrix out(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double aik = a(i, k);
      for (int j = 0; j < n; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

void validate_stats(const GaussianStats& s) {
  if (static_cast<int>(s.mean.size()) != s.covariance.dim) {
    throw ShapeError("Gaussian stats: mean and covariance disagree on dimension");
  }
  if (!s.covariance.is_symmetric(1e-10)) {
    throw std::invalid_argument("Gaussian stats: covariance is not symmetric");
  }
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  validate_stats(a);
  validate_stats(b);
  if (a.covariance.dim != b.covariance.dim) {
    throw ShapeError("frechet_distance: feature dimensions differ");
  }
  const int n = a.covariance.dim;
  double mean_term = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a.mean[i] - b.mean[i];
    mean_term += d * d;
  }
  const SquareMatrix root_a = psd_sqrt(a.covariance);
  SquareMatrix inner = multiply(multiply(root_a, b.covariance), root_a);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) inner(i, j) = inner(j, i) = 0.5 * (inner(i, j) + inner(j, i));
  }
  const SymmetricEigen e = symmetric_eigen(inner);
  double trace_root = 0.0;
  for (double v : e.values) trace_root += std::sqrt(std::max(v, 0.0));
  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += a.covariance(i, i) + b.covariance(i, i);
  return std::max(0.0, mean_term + trace - 2.0 * trace_root);
}

GaussianStats gaussian_stats(const std::vector<std::vector<double>>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("Gaussian stats need at least 2 samples");
  const int d = static_cast<int>(samples.front().size());
  const double count = static_cast<double>(samples.size());
  GaussianStats s;
  s.count = static_cast<int>(samples.size());
  s.mean.assign(d, 0.0);
  for (const auto& row : samples) {
    if (static_cast<int>(row.size()) != d) throw ShapeError("ragged feature samples");
    for (int i = 0; i < d; ++i) s.mean[i] += row[i];
  }
  for (double& m : s.mean) m /= count;
  s.covariance = SquareMatrix(d);
  for (const auto& row : samples) {
    for (int i = 0; i < d; ++i) {
      const double di = row[i] - s.mean[i];
      for (int j = i; j < d; ++j) s.covariance(i, j) += di * (row[j] - s.mean[j]);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      s.covariance(i, j) /= (count - 1.0);
      s.covariance(j, i) = s.covariance(i, j);
    }
  }
  return s;
}

std::vector<std::vector<double>> pooled_features(const Tensor& images,
                                                 const FixedFeatureExtractor& extractor) {
  const Tensor deepest = extractor.features(images).back();
  const Shape& s = deepest.shape();
  std::vector<std::vector<double>> rows(s.n, std::vector<double>(s.c, 0.0));
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) acc += deepest.at(n, c, y, x);
      }
      rows[n][c] = acc / static_cast<double>(s.plane());
    }
  }
  return rows;
}

GaussianStats fit_feature_stats(const Tensor& images, const FixedFeatureExtractor& extractor) {
  return gaussian_stats(pooled_features(images, extractor));
}

}  // namespace dcf
