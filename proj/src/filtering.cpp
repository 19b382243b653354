#include "dcf/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dcf/errors.hpp"

namespace dcf {

KernelField::KernelField(Tensor weights, int side, bool normalized)
    : weights_(std::move(weights)), side_(side), normalized_(normalized) {
  if (side < 1 || side % 2 == 0) {
    throw ShapeError("kernel side must be odd and >= 1, got " + std::to_string(side));
  }
  if (weights_.shape().c != side * side) {
    throw ShapeError("kernel field with side " + std::to_string(side) + " needs " +
                     std::to_string(side * side) + " taps, got " + weights_.shape().str());
  }
}

KernelField KernelField::identity(int batch, int side, int h, int w) {
  Tensor t(Shape{batch, side * side, h, w}, 0.0);
  const int center = (side * side) / 2;
  for (int n = 0; n < batch; ++n) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) t.at(n, center, y, x) = 1.0;
    }
  }
  return KernelField(std::move(t), side, true);
}

KernelField normalize_kernels(const KernelField& raw) {
  const Tensor& logits = raw.weights();
  const Shape& s = logits.shape();
  const std::size_t plane = s.plane();
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    const double* in = logits.ptr() + static_cast<std::size_t>(n) * s.c * plane;
    double* o = out.ptr() + static_cast<std::size_t>(n) * s.c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      double top = in[p];
      for (int k = 1; k < s.c; ++k) top = std::max(top, in[k * plane + p]);
      double total = 0.0;
      for (int k = 0; k < s.c; ++k) {
        o[k * plane + p] = std::exp(in[k * plane + p] - top);
        total += o[k * plane + p];
      }
      for (int k = 0; k < s.c; ++k) o[k * plane + p] /= total;
    }
  }
  check_finite(out, "normalize_kernels");
  if (needs_grad({&logits})) {
    out.set_requires_grad(true);
    Tape::active()->record("normalize_kernels", [logits, out]() mutable {
      if (!out.has_grad()) return;
      const Shape& s = out.shape();
      const std::size_t plane = s.plane();
      auto g = out.grad();
      auto gl = logits.grad_mut();
      for (int n = 0; n < s.n; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * s.c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          double dot = 0.0;
          for (int k = 0; k < s.c; ++k) {
            dot += g[base + k * plane + p] * out.ptr()[base + k * plane + p];
          }
          for (int k = 0; k < s.c; ++k) {
            const std::size_t i = base + k * plane + p;
            gl[i] += out.ptr()[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return KernelField(out, raw.side(), true);
}

namespace {

void check_filter_inputs(const Tensor& f, const KernelField& kernels) {
  const Shape& fs = f.shape();
  const Shape& ts = kernels.weights().shape();
  if (fs.n != ts.n || fs.h != ts.h || fs.w != ts.w) {
    throw ShapeError("apply_filter: features " + fs.str() + " and kernels " + ts.str() +
                     " disagree on batch or spatial size");
  }
  if (!kernels.normalized()) {
    throw std::invalid_argument("apply_filter requires a normalized kernel field");
  }
}

// Calls visit(tap, source_offset, target_offset) for every (pixel, tap) pair
// of one batch item's plane. Offsets are within an H x W plane.
template <typename F>
void for_each_tap(int h, int w, int side, F&& visit) {
  const int r = side / 2;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const int tap = i * side + j;
      for (int y = 0; y < h; ++y) {
        const int sy = std::clamp(y + i - r, 0, h - 1);
        for (int x = 0; x < w; ++x) {
          const int sx = std::clamp(x + j - r, 0, w - 1);
          visit(tap, static_cast<std::size_t>(sy) * w + sx, static_cast<std::size_t>(y) * w + x);
        }
      }
    }
  }
}

}  // namespace

Tensor apply_filter(const Tensor& f, const KernelField& kernels) {
  check_filter_inputs(f, kernels);
  const Shape& fs = f.shape();
  const Tensor& t = kernels.weights();
  const std::size_t plane = fs.plane();
  const int taps = t.shape().c;
  Tensor out(fs, 0.0);
  for (int n = 0; n < fs.n; ++n) {
    const double* tk = t.ptr() + static_cast<std::size_t>(n) * taps * plane;
    for (int c = 0; c < fs.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * fs.c + c) * plane;
      const double* src = f.ptr() + off;
      double* dst = out.ptr() + off;
      for_each_tap(fs.h, fs.w, kernels.side(), [&](int tap, std::size_t s, std::size_t r) {
        dst[r] += tk[tap * plane + r] * src[s];
      });
    }
  }
  check_finite(out, "apply_filter");

  Tensor weights = kernels.weights();
  if (needs_grad({&f, &weights})) {
    out.set_requires_grad(true);
    const int side = kernels.side();
    Tape::active()->record("apply_filter", [f, weights, out, side]() mutable {
      if (!out.has_grad()) return;
      Tensor g(out.shape(), std::vector<double>(out.grad().begin(), out.grad().end()));
      auto [gf, gt] = apply_filter_backward(g, f, KernelField(weights, side, true));
      if (f.requires_grad()) {
        auto dst = f.grad_mut();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gf.data()[i];
      }
      if (weights.requires_grad()) {
        auto dst = weights.grad_mut();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gt.data()[i];
      }
    });
  }
  return out;
}

std::pair<Tensor, Tensor> apply_filter_backward(const Tensor& cotangent, const Tensor& f,
                                                const KernelField& kernels) {
  check_filter_inputs(f, kernels);
  if (cotangent.shape() != f.shape()) {
    throw ShapeError("apply_filter_backward: cotangent " + cotangent.shape().str() +
                     " does not match features " + f.shape().str());
  }
  const Shape& fs = f.shape();
  const Tensor& t = kernels.weights();
  const std::size_t plane = fs.plane();
  const int taps = t.shape().c;
  Tensor grad_f(fs, 0.0);
  Tensor grad_t(t.shape(), 0.0);
  for (int n = 0; n < fs.n; ++n) {
    const std::size_t tbase = static_cast<std::size_t>(n) * taps * plane;
    const double* tk = t.ptr() + tbase;
    double* gt = grad_t.ptr() + tbase;
    for (int c = 0; c < fs.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * fs.c + c) * plane;
      const double* g = cotangent.ptr() + off;
      const double* src = f.ptr() + off;
      double* gf = grad_f.ptr() + off;
      for_each_tap(fs.h, fs.w, kernels.side(), [&](int tap, std::size_t s, std::size_t r) {
        gf[s] += tk[tap * plane + r] * g[r];
        gt[tap * plane + r] += g[r] * src[s];
      });
    }
  }
  return {grad_f, grad_t};
}

}  // namespace dcf
