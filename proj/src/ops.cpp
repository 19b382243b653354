#include "dcf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "dcf/errors.hpp"
#include "linalg.hpp"

namespace dcf {

using detail::ConstMatMap;
using detail::MatMap;

ConvSpec ConvSpec::conv(int kernel, int in, int out, int stride, Padding pad) {
  ConvSpec s;
  s.kernel_h = s.kernel_w = kernel;
  s.in_channels = in;
  s.out_channels = out;
  s.stride = stride;
  s.padding = pad;
  return s;
}

ConvSpec ConvSpec::conv_transpose(int kernel, int in, int out, int stride, Padding pad,
                                  int output_padding) {
  ConvSpec s = conv(kernel, in, out, stride, pad);
  s.transpose = true;
  s.output_padding = output_padding;
  return s;
}

Shape ConvSpec::weight_shape() const {
  return transpose ? Shape{in_channels, out_channels, kernel_h, kernel_w}
                   : Shape{out_channels, in_channels, kernel_h, kernel_w};
}

int ConvSpec::fan_in() const {
  if (!transpose) return in_channels * kernel_h * kernel_w;
  return std::max(1, in_channels * kernel_h * kernel_w / (stride * stride));
}

std::string ConvSpec::str() const {
  std::ostringstream os;
  os << (transpose ? "convT(" : "conv(") << kernel_h << "x" << kernel_w << ", "
     << in_channels << "->" << out_channels << ", stride " << stride << ", pad ("
     << padding.top << "," << padding.bottom << "," << padding.left << ","
     << padding.right << ")";
  if (transpose) os << ", output_padding " << output_padding;
  os << ")";
  return os.str();
}

int conv_output_extent(int in, int kernel, int stride, int pad_before, int pad_after,
                       bool transpose, int output_padding) {
  if (transpose) {
    return (in - 1) * stride - (pad_before + pad_after) + kernel + output_padding;
  }
  const int span = in + pad_before + pad_after - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

Shape conv_output_shape(const Shape& in, const ConvSpec& spec) {
  if (spec.kernel_h < 1 || spec.kernel_w < 1 || spec.stride < 1) {
    throw ShapeError("invalid kernel/stride in " + spec.str());
  }
  if (spec.output_padding < 0 || (spec.output_padding >= spec.stride && spec.output_padding > 0)) {
    throw ShapeError("output_padding must be smaller than stride in " + spec.str());
  }
  if (in.c != spec.in_channels) {
    throw ShapeError(spec.str() + ": expected " + std::to_string(spec.in_channels) +
                     " input channels, got " + std::to_string(in.c) + " (input " +
                     in.str() + ")");
  }
  const Padding& p = spec.padding;
  Shape out{in.n, spec.out_channels,
            conv_output_extent(in.h, spec.kernel_h, spec.stride, p.top, p.bottom,
                               spec.transpose, spec.output_padding),
            conv_output_extent(in.w, spec.kernel_w, spec.stride, p.left, p.right,
                               spec.transpose, spec.output_padding)};
  if (out.h < 1 || out.w < 1) {
    throw ShapeError(spec.str() + " produces an empty output from input " + in.str());
  }
  return out;
}

namespace {

void expect_shape(const Tensor& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw ShapeError(what + ": expected shape " + expected.str() + ", got " +
                     t.shape().str());
  }
}

void check_bias(const Tensor& bias, int channels, const std::string& what) {
  if (bias.defined()) expect_shape(bias, Shape{1, channels, 1, 1}, what + " bias");
}

void accumulate(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Geometry of the forward (non-transposed) convolution relating a "wide"
// image (C, H, W) to a "narrow" output grid (Ho, Wo).
struct Geometry {
  int channels, height, width;
  int out_h, out_w;
  int kh, kw, stride, pad_top, pad_left;

  int rows() const { return channels * kh * kw; }
  int cols() const { return out_h * out_w; }
  bool trivial() const {
    return kh == 1 && kw == 1 && stride == 1 && pad_top == 0 && pad_left == 0 &&
           out_h == height && out_w == width;
  }
};

void im2col(const double* image, const Geometry& g, double* col) {
  const int cols = g.cols();
  for (int c = 0; c < g.channels; ++c) {
    const double* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        double* row = col + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * cols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int y = oy * g.stride - g.pad_top + i;
          double* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (y < 0 || y >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(y) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int x = ox * g.stride - g.pad_left + j;
            dst[ox] = (x >= 0 && x < g.width) ? src[x] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add of im2col's adjoint.
void col2im(const double* col, const Geometry& g, double* image) {
  const int cols = g.cols();
  for (int c = 0; c < g.channels; ++c) {
    double* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const double* row =
            col + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * cols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int y = oy * g.stride - g.pad_top + i;
          if (y < 0 || y >= g.height) continue;
          const double* src = row + static_cast<std::size_t>(oy) * g.out_w;
          double* dst = plane + static_cast<std::size_t>(y) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int x = ox * g.stride - g.pad_left + j;
            if (x >= 0 && x < g.width) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

// col (rows x cols) for one image, or a view of the image itself for 1x1 convs.
class ColumnBuffer {
 public:
  explicit ColumnBuffer(const Geometry& g) : g_(g) {
    if (!g.trivial()) storage_.resize(static_cast<std::size_t>(g.rows()) * g.cols());
  }
  const double* gather(const double* image) {
    if (g_.trivial()) return image;
    im2col(image, g_, storage_.data());
    return storage_.data();
  }
  double* scratch() { return storage_.data(); }

 private:
  Geometry g_;
  std::vector<double> storage_;
};

void add_bias(Tensor& out, const Tensor& bias) {
  if (!bias.defined()) return;
  const Shape& s = out.shape();
  const std::size_t plane = s.plane();
  double* o = out.ptr();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double b = bias.data()[c];
      double* p = o + (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  }
}

void bias_grad(const Tensor& out, const Tensor& bias) {
  const Shape& s = out.shape();
  const std::size_t plane = s.plane();
  auto g = out.grad();
  auto gb = bias.grad_mut();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* p = g.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      gb[c] += acc;
    }
  }
}

Geometry forward_geometry(const Shape& wide, const Shape& narrow, const ConvSpec& spec) {
  return Geometry{wide.c,         wide.h,        wide.w,      narrow.h,
                  narrow.w,       spec.kernel_h, spec.kernel_w, spec.stride,
                  spec.padding.top, spec.padding.left};
}

}  // namespace

Tensor conv2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
              const Tensor& bias) {
  if (spec.transpose) throw ShapeError("conv2d given a transposed spec " + spec.str());
  const Shape out_shape = conv_output_shape(x.shape(), spec);
  expect_shape(weight, spec.weight_shape(), spec.str() + " weight");
  check_bias(bias, spec.out_channels, spec.str());

  const Shape& in = x.shape();
  const Geometry g = forward_geometry(in, out_shape, spec);
  const int rows = g.rows();
  const int cols = g.cols();
  Tensor out(out_shape);
  {
    ColumnBuffer buffer(g);
    ConstMatMap w(weight.ptr(), spec.out_channels, rows);
    for (int n = 0; n < in.n; ++n) {
      const double* col = buffer.gather(x.ptr() + n * in.c * in.plane());
      MatMap y(out.ptr() + n * out_shape.c * out_shape.plane(), spec.out_channels, cols);
      y.noalias() = w * ConstMatMap(col, rows, cols);
    }
  }
  add_bias(out, bias);
  check_finite(out, "conv2d");

  if (needs_grad({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    Tape::active()->record("conv2d", [x, weight, bias, out, g]() mutable {
      if (!out.has_grad()) return;
      const Shape& in = x.shape();
      const Shape& os = out.shape();
      const int rows = g.rows();
      const int cols = g.cols();
      ConstMatMap w(weight.ptr(), os.c, rows);
      ColumnBuffer buffer(g);
      std::vector<double> dcol(static_cast<std::size_t>(rows) * cols);
      for (int n = 0; n < in.n; ++n) {
        ConstMatMap gy(out.grad().data() + n * os.c * os.plane(), os.c, cols);
        if (weight.requires_grad()) {
          const double* col = buffer.gather(x.ptr() + n * in.c * in.plane());
          MatMap(weight.grad_mut().data(), os.c, rows).noalias() +=
              gy * ConstMatMap(col, rows, cols).transpose();
        }
        if (x.requires_grad()) {
          double* gx = x.grad_mut().data() + n * in.c * in.plane();
          if (g.trivial()) {
            MatMap(gx, rows, cols).noalias() += w.transpose() * gy;
          } else {
            MatMap(dcol.data(), rows, cols).noalias() = w.transpose() * gy;
            col2im(dcol.data(), g, gx);
          }
        }
      }
      if (bias.defined() && bias.requires_grad()) bias_grad(out, bias);
    });
  }
  return out;
}

Tensor conv_transpose2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight,
                        const Tensor& bias) {
  if (!spec.transpose) {
    throw ShapeError("conv_transpose2d given a non-transposed spec " + spec.str());
  }
  const Shape out_shape = conv_output_shape(x.shape(), spec);
  expect_shape(weight, spec.weight_shape(), spec.str() + " weight");
  check_bias(bias, spec.out_channels, spec.str());

  const Shape& in = x.shape();
  // The wide side of the underlying convolution is this op's output.
  const Geometry g = forward_geometry(out_shape, in, spec);
  const int rows = g.rows();
  const int cols = g.cols();
  Tensor out(out_shape);
  {
    std::vector<double> col(static_cast<std::size_t>(rows) * cols);
    ConstMatMap w(weight.ptr(), spec.in_channels, rows);
    for (int n = 0; n < in.n; ++n) {
      ConstMatMap xn(x.ptr() + n * in.c * in.plane(), in.c, cols);
      double* yn = out.ptr() + n * out_shape.c * out_shape.plane();
      if (g.trivial()) {
        MatMap(yn, rows, cols).noalias() = w.transpose() * xn;
      } else {
        MatMap(col.data(), rows, cols).noalias() = w.transpose() * xn;
        col2im(col.data(), g, yn);
      }
    }
  }
  add_bias(out, bias);
  check_finite(out, "conv_transpose2d");

  if (needs_grad({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    Tape::active()->record("conv_transpose2d", [x, weight, bias, out, g]() mutable {
      if (!out.has_grad()) return;
      const Shape& in = x.shape();
      const Shape& os = out.shape();
      const int rows = g.rows();
      const int cols = g.cols();
      ConstMatMap w(weight.ptr(), in.c, rows);
      ColumnBuffer buffer(g);
      for (int n = 0; n < in.n; ++n) {
        const double* gcol = buffer.gather(out.grad().data() + n * os.c * os.plane());
        ConstMatMap gc(gcol, rows, cols);
        if (x.requires_grad()) {
          MatMap(x.grad_mut().data() + n * in.c * in.plane(), in.c, cols).noalias() +=
              w * gc;
        }
        if (weight.requires_grad()) {
          MatMap(weight.grad_mut().data(), in.c, rows).noalias() +=
              ConstMatMap(x.ptr() + n * in.c * in.plane(), in.c, cols) * gc.transpose();
        }
      }
      if (bias.defined() && bias.requires_grad()) bias_grad(out, bias);
    });
  }
  return out;
}

Tensor avg_pool2(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("avg_pool2 needs even spatial dims, got " + s.str());
  }
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out(os);
  const int planes = s.n * s.c;
  for (int p = 0; p < planes; ++p) {
    const double* src = x.ptr() + p * s.plane();
    double* dst = out.ptr() + p * os.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) {
        const double* a = src + (2 * y) * s.w + 2 * xx;
        dst[y * os.w + xx] = 0.25 * (a[0] + a[1] + a[s.w] + a[s.w + 1]);
      }
    }
  }
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("avg_pool2", [x, out]() mutable {
      if (!out.has_grad()) return;
      const Shape& s = x.shape();
      const Shape& os = out.shape();
      auto gx = x.grad_mut();
      auto gy = out.grad();
      for (int p = 0; p < s.n * s.c; ++p) {
        double* dst = gx.data() + p * s.plane();
        const double* src = gy.data() + p * os.plane();
        for (int y = 0; y < os.h; ++y) {
          for (int xx = 0; xx < os.w; ++xx) {
            const double v = 0.25 * src[y * os.w + xx];
            double* a = dst + (2 * y) * s.w + 2 * xx;
            a[0] += v;
            a[1] += v;
            a[s.w] += v;
            a[s.w + 1] += v;
          }
        }
      }
    });
  }
  return out;
}

Tensor activation(const Tensor& x, Activation kind) {
  Tensor out(x.shape());
  auto in = x.data();
  auto o = out.data();
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < in.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Activation::kLeakyRelu:
      for (std::size_t i = 0; i < in.size(); ++i) {
        o[i] = in[i] > 0.0 ? in[i] : kLeakySlope * in[i];
      }
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < in.size(); ++i) o[i] = std::tanh(in[i]);
      break;
  }
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("activation", [x, out, kind]() mutable {
      if (!out.has_grad()) return;
      auto gx = x.grad_mut();
      auto gy = out.grad();
      auto in = x.data();
      auto o = out.data();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        switch (kind) {
          case Activation::kRelu:
            gx[i] += in[i] > 0.0 ? gy[i] : 0.0;
            break;
          case Activation::kLeakyRelu:
            gx[i] += in[i] > 0.0 ? gy[i] : kLeakySlope * gy[i];
            break;
          case Activation::kTanh:
            gx[i] += gy[i] * (1.0 - o[i] * o[i]);
            break;
        }
      }
    });
  }
  return out;
}

BatchNormParams BatchNormParams::identity(int channels) {
  BatchNormParams p;
  p.gamma = Tensor(Shape{1, channels, 1, 1}, 1.0);
  p.beta = Tensor(Shape{1, channels, 1, 1}, 0.0);
  p.running_mean = Tensor(Shape{1, channels, 1, 1}, 0.0);
  p.running_var = Tensor(Shape{1, channels, 1, 1}, 1.0);
  return p;
}

Tensor batch_norm(const Tensor& x, BatchNormParams& params, Mode mode) {
  const Shape& s = x.shape();
  const Shape cshape{1, s.c, 1, 1};
  expect_shape(params.gamma, cshape, "batch_norm gamma");
  expect_shape(params.beta, cshape, "batch_norm beta");
  expect_shape(params.running_mean, cshape, "batch_norm running_mean");
  expect_shape(params.running_var, cshape, "batch_norm running_var");
  const std::size_t plane = s.plane();
  const std::size_t count = static_cast<std::size_t>(s.n) * plane;
  if (mode == Mode::kTrain && count < 2) {
    throw ShapeError("batch_norm in train mode needs more than one value per channel, got " +
                     s.str());
  }

  // Per-channel mean and inverse standard deviation used for normalization.
  std::vector<double> mu(s.c), inv_std(s.c);
  for (int c = 0; c < s.c; ++c) {
    if (mode == Mode::kTrain) {
      double acc = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.ptr() + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      const double m = acc / static_cast<double>(count);
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.ptr() + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - m) * (p[i] - m);
      }
      const double var = sq / static_cast<double>(count);
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + params.eps);
      const double unbiased = sq / static_cast<double>(count - 1);
      double& rm = params.running_mean.ptr()[c];
      double& rv = params.running_var.ptr()[c];
      rm = (1.0 - params.momentum) * rm + params.momentum * m;
      rv = (1.0 - params.momentum) * rv + params.momentum * unbiased;
    } else {
      mu[c] = params.running_mean.data()[c];
      inv_std[c] = 1.0 / std::sqrt(params.running_var.data()[c] + params.eps);
    }
  }

  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
      const double g = params.gamma.data()[c] * inv_std[c];
      const double b = params.beta.data()[c] - g * mu[c];
      for (std::size_t i = 0; i < plane; ++i) out.ptr()[off + i] = g * x.ptr()[off + i] + b;
    }
  }
  check_finite(out, "batch_norm");

  Tensor gamma = params.gamma;
  Tensor beta = params.beta;
  if (needs_grad({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    Tape::active()->record("batch_norm", [x, gamma, beta, out, mu, inv_std,
                                          mode]() mutable {
      if (!out.has_grad()) return;
      const Shape& s = x.shape();
      const std::size_t plane = s.plane();
      const double count = static_cast<double>(s.n) * static_cast<double>(plane);
      auto gy = out.grad();
      for (int c = 0; c < s.c; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < s.n; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double xhat = (x.ptr()[off + i] - mu[c]) * inv_std[c];
            sum_g += gy[off + i];
            sum_gx += gy[off + i] * xhat;
          }
        }
        if (gamma.requires_grad()) gamma.grad_mut()[c] += sum_gx;
        if (beta.requires_grad()) beta.grad_mut()[c] += sum_g;
        if (!x.requires_grad()) continue;
        auto gx = x.grad_mut();
        const double g = gamma.data()[c] * inv_std[c];
        for (int n = 0; n < s.n; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            if (mode == Mode::kTrain) {
              const double xhat = (x.ptr()[off + i] - mu[c]) * inv_std[c];
              gx[off + i] += g * (gy[off + i] - sum_g / count - xhat * sum_gx / count);
            } else {
              gx[off + i] += g * gy[off + i];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: incompatible shapes " + sa.str() + " and " +
                     sb.str());
  }
  const Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor out(os);
  const std::size_t la = sa.c * sa.plane(), lb = sb.c * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.ptr() + n * la, la, out.ptr() + n * (la + lb));
    std::copy_n(b.ptr() + n * lb, lb, out.ptr() + n * (la + lb) + la);
  }
  if (needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record("concat_channels", [a, b, out, la, lb]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      for (int n = 0; n < a.shape().n; ++n) {
        if (a.requires_grad()) {
          accumulate(a.grad_mut().subspan(n * la, la), g.subspan(n * (la + lb), la));
        }
        if (b.requires_grad()) {
          accumulate(b.grad_mut().subspan(n * lb, lb), g.subspan(n * (la + lb) + la, lb));
        }
      }
    });
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  const Shape& s = x.shape();
  if (begin < 0 || count < 1 || begin + count > s.c) {
    throw ShapeError("slice_channels [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + s.str());
  }
  const Shape os{s.n, count, s.h, s.w};
  Tensor out(os);
  const std::size_t len = count * s.plane();
  const std::size_t stride = s.c * s.plane();
  const std::size_t off = begin * s.plane();
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(x.ptr() + n * stride + off, len, out.ptr() + n * len);
  }
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("slice_channels", [x, out, len, stride, off]() mutable {
      if (!out.has_grad()) return;
      for (int n = 0; n < x.shape().n; ++n) {
        accumulate(x.grad_mut().subspan(n * stride + off, len), out.grad().subspan(n * len, len));
      }
    });
  }
  return out;
}

namespace {

void expect_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  expect_same(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.ptr()[i] = a.ptr()[i] + b.ptr()[i];
  if (needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record("add", [a, b, out]() mutable {
      if (!out.has_grad()) return;
      if (a.requires_grad()) accumulate(a.grad_mut(), out.grad());
      if (b.requires_grad()) accumulate(b.grad_mut(), out.grad());
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  expect_same(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.ptr()[i] = a.ptr()[i] - b.ptr()[i];
  if (needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record("sub", [a, b, out]() mutable {
      if (!out.has_grad()) return;
      if (a.requires_grad()) accumulate(a.grad_mut(), out.grad());
      if (b.requires_grad()) {
        auto gb = b.grad_mut();
        auto g = out.grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  expect_same(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
  if (needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record("mul", [a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_mut();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b.ptr()[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_mut();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a.ptr()[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double s) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.ptr()[i] = s * x.ptr()[i];
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("scale", [x, out, s]() mutable {
      if (!out.has_grad()) return;
      auto gx = x.grad_mut();
      auto g = out.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * g[i];
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& x, double s) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.ptr()[i] = x.ptr()[i] + s;
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("add_scalar", [x, out]() mutable {
      if (!out.has_grad()) return;
      accumulate(x.grad_mut(), out.grad());
    });
  }
  return out;
}

Tensor abs(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.ptr()[i] = std::fabs(x.ptr()[i]);
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("abs", [x, out]() mutable {
      if (!out.has_grad()) return;
      auto gx = x.grad_mut();
      auto g = out.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const double v = x.ptr()[i];
        gx[i] += v > 0.0 ? g[i] : (v < 0.0 ? -g[i] : 0.0);
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("sum", [x, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      for (double& v : x.grad_mut()) v += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor weighted_sum(std::initializer_list<std::pair<double, Tensor>> terms) {
  std::vector<std::pair<double, Tensor>> items(terms);
  double acc = 0.0;
  bool track = false;
  for (const auto& [w, t] : items) {
    if (t.numel() != 1) throw ShapeError("weighted_sum terms must be scalars");
    acc += w * t.item();
    track = track || needs_grad({&t});
  }
  Tensor out = Tensor::scalar(acc);
  if (track) {
    out.set_requires_grad(true);
    Tape::active()->record("weighted_sum", [items, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      for (auto& [w, t] : items) {
        if (t.requires_grad()) t.grad_mut()[0] += w * g;
      }
    });
  }
  return out;
}

Tensor blend(const Tensor& a, const Tensor& b, const Tensor& mask) {
  expect_same(a, b, "blend");
  const Shape& s = a.shape();
  if (mask.shape() != Shape{s.n, 1, s.h, s.w}) {
    throw ShapeError("blend: mask shape " + mask.shape().str() + " does not match image " +
                     s.str());
  }
  Tensor out(s);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    const double* m = mask.ptr() + n * plane;
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out.ptr()[off + i] = m[i] * a.ptr()[off + i] + (1.0 - m[i]) * b.ptr()[off + i];
      }
    }
  }
  if (needs_grad({&a, &b})) {
    out.set_requires_grad(true);
    Tape::active()->record("blend", [a, b, mask, out]() mutable {
      if (!out.has_grad()) return;
      const Shape& s = out.shape();
      const std::size_t plane = s.plane();
      auto g = out.grad();
      for (int n = 0; n < s.n; ++n) {
        const double* m = mask.ptr() + n * plane;
        for (int c = 0; c < s.c; ++c) {
          const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            if (a.requires_grad()) a.grad_mut()[off + i] += m[i] * g[off + i];
            if (b.requires_grad()) b.grad_mut()[off + i] += (1.0 - m[i]) * g[off + i];
          }
        }
      }
    });
  }
  return out;
}

namespace {

// Index map shared by quadrant_stack (gather) and its adjoint (scatter).
template <typename F>
void for_each_quadrant_pixel(const Shape& s, F&& f) {
  const int hh = s.h / 2, hw = s.w / 2;
  const Shape os{s.n, 4 * s.c, hh, hw};
  for (int n = 0; n < s.n; ++n) {
    for (int q = 0; q < 4; ++q) {
      const int dy = (q % 2) * hh;  // 0: top, 1: bottom
      const int dx = (q / 2) * hw;  // 0: left, 1: right
      for (int c = 0; c < s.c; ++c) {
        for (int y = 0; y < hh; ++y) {
          for (int x = 0; x < hw; ++x) {
            const std::size_t src =
                ((static_cast<std::size_t>(n) * s.c + c) * s.h + y + dy) * s.w + x + dx;
            const std::size_t dst =
                ((static_cast<std::size_t>(n) * os.c + q * s.c + c) * hh + y) * hw + x;
            f(src, dst);
          }
        }
      }
    }
  }
}

}  // namespace

Tensor quadrant_stack(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("quadrant_stack needs even spatial dims, got " + s.str());
  }
  Tensor out(Shape{s.n, 4 * s.c, s.h / 2, s.w / 2});
  for_each_quadrant_pixel(s, [&](std::size_t src, std::size_t dst) {
    out.ptr()[dst] = x.ptr()[src];
  });
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("quadrant_stack", [x, out]() mutable {
      if (!out.has_grad()) return;
      auto gx = x.grad_mut();
      auto g = out.grad();
      for_each_quadrant_pixel(x.shape(), [&](std::size_t src, std::size_t dst) {
        gx[src] += g[dst];
      });
    });
  }
  return out;
}

Tensor tile2x2(const Tensor& x) {
  const Shape& s = x.shape();
  const Shape os{s.n, s.c, 2 * s.h, 2 * s.w};
  Tensor out(os);
  for (int p = 0; p < s.n * s.c; ++p) {
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) {
        out.ptr()[p * os.plane() + y * os.w + xx] =
            x.ptr()[p * s.plane() + (y % s.h) * s.w + (xx % s.w)];
      }
    }
  }
  if (needs_grad({&x})) {
    out.set_requires_grad(true);
    Tape::active()->record("tile2x2", [x, out]() mutable {
      if (!out.has_grad()) return;
      const Shape& s = x.shape();
      const Shape& os = out.shape();
      auto gx = x.grad_mut();
      auto g = out.grad();
      for (int p = 0; p < s.n * s.c; ++p) {
        for (int y = 0; y < os.h; ++y) {
          for (int xx = 0; xx < os.w; ++xx) {
            gx[p * s.plane() + (y % s.h) * s.w + (xx % s.w)] +=
                g[p * os.plane() + y * os.w + xx];
          }
        }
      }
    });
  }
  return out;
}

}  // namespace dcf
