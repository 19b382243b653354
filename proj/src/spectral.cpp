#include "dcf/spectral.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "dcf/errors.hpp"

namespace dcf {

using cd = std::complex<double>;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

SpectrumTensor::SpectrumTensor(Tensor values, int source_width)
    : values_(std::move(values)), source_width_(source_width) {
  if (values_.shape().w != 2 * half_width(source_width)) {
    throw ShapeError("spectrum of width " + std::to_string(source_width) +
                     " needs last axis " + std::to_string(2 * half_width(source_width)) +
                     ", got " + values_.shape().str());
  }
}

std::complex<double> SpectrumTensor::at(int n, int c, int u, int k) const {
  return {values_.at(n, c, u, 2 * k), values_.at(n, c, u, 2 * k + 1)};
}

void SpectrumTensor::set(int n, int c, int u, int k, std::complex<double> v) {
  values_.at(n, c, u, 2 * k) = v.real();
  values_.at(n, c, u, 2 * k + 1) = v.imag();
}

SpectrumTensor SpectrumTensor::zeros(int n, int c, int h, int source_width) {
  return SpectrumTensor(Tensor(Shape{n, c, h, 2 * half_width(source_width)}), source_width);
}

namespace {

void require_power_of_two(int h, int w, const char* op) {
  if (!is_power_of_two(h) || !is_power_of_two(w)) {
    throw ShapeError(std::string(op) + ": spatial dims must be powers of two (radix-2 FFT), got " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
}

// In-place iterative radix-2 FFT. sign = -1 forward, +1 inverse; unnormalized.
void fft_inplace(std::vector<cd>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    std::vector<cd> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      tw[k] = std::polar(1.0, ang * static_cast<double>(k));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cd u = a[i + k];
        const cd v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Forward half-plane transform of one H x W plane into out (H x Wh).
void rfft_plane(const double* x, int h, int w, cd* out) {
  const int wh = half_width(w);
  std::vector<cd> row(w), col(h);
  for (int y = 0; y < h; ++y) {
    for (int i = 0; i < w; ++i) row[i] = x[y * w + i];
    fft_inplace(row, -1);
    for (int k = 0; k < wh; ++k) out[y * wh + k] = row[k];
  }
  for (int k = 0; k < wh; ++k) {
    for (int y = 0; y < h; ++y) col[y] = out[y * wh + k];
    fft_inplace(col, -1);
    for (int u = 0; u < h; ++u) out[u * wh + k] = col[u];
  }
}

// Inverse along the height axis (sign +1, unnormalized) applied column-wise.
void inverse_columns(std::vector<cd>& plane, int h, int wh) {
  std::vector<cd> col(h);
  for (int k = 0; k < wh; ++k) {
    for (int u = 0; u < h; ++u) col[u] = plane[u * wh + k];
    fft_inplace(col, +1);
    for (int y = 0; y < h; ++y) plane[y * wh + k] = col[y];
  }
}

std::vector<cd> load_plane(const SpectrumTensor& s, int n, int c) {
  const int h = s.height(), wh = s.width_half();
  std::vector<cd> plane(static_cast<std::size_t>(h) * wh);
  for (int u = 0; u < h; ++u) {
    for (int k = 0; k < wh; ++k) plane[u * wh + k] = s.at(n, c, u, k);
  }
  return plane;
}

// Pure transforms, shared by the taped ops and the explicit adjoints.
SpectrumTensor rfft2_values(const Tensor& x) {
  const Shape& s = x.shape();
  require_power_of_two(s.h, s.w, "rfft2");
  const int wh = half_width(s.w);
  SpectrumTensor out = SpectrumTensor::zeros(s.n, s.c, s.h, s.w);
  std::vector<cd> plane(static_cast<std::size_t>(s.h) * wh);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      rfft_plane(x.ptr() + (static_cast<std::size_t>(n) * s.c + c) * s.plane(), s.h, s.w,
                 plane.data());
      for (int u = 0; u < s.h; ++u) {
        for (int k = 0; k < wh; ++k) out.set(n, c, u, k, plane[u * wh + k]);
      }
    }
  }
  return out;
}

Tensor irfft2_values(const SpectrumTensor& s, int out_h, int out_w) {
  require_power_of_two(out_h, out_w, "irfft2");
  if (s.height() != out_h || s.source_width() != out_w) {
    throw ShapeError("irfft2: spectrum of " + std::to_string(s.height()) + "x" +
                     std::to_string(s.source_width()) + " cannot produce " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const int wh = s.width_half();
  const double norm = 1.0 / (static_cast<double>(out_h) * out_w);
  Tensor out(Shape{s.batch(), s.channels(), out_h, out_w});
  std::vector<cd> row(out_w);
  for (int n = 0; n < s.batch(); ++n) {
    for (int c = 0; c < s.channels(); ++c) {
      std::vector<cd> plane = load_plane(s, n, c);
      inverse_columns(plane, out_h, wh);
      for (int y = 0; y < out_h; ++y) {
        // Rebuild the full Hermitian row; self-conjugate bins keep only Re.
        std::fill(row.begin(), row.end(), cd{});
        for (int k = 0; k < wh; ++k) {
          const cd z = plane[y * wh + k];
          if (hermitian_weight(k, out_w) == 1.0) {
            row[k] = z.real();
          } else {
            row[k] = z;
            row[out_w - k] = std::conj(z);
          }
        }
        fft_inplace(row, +1);
        for (int x = 0; x < out_w; ++x) out.at(n, c, y, x) = norm * row[x].real();
      }
    }
  }
  return out;
}

}  // namespace

Tensor rfft2_backward(const SpectrumTensor& cotangent, int height, int width) {
  require_power_of_two(height, width, "rfft2_backward");
  if (cotangent.height() != height || cotangent.source_width() != width) {
    throw ShapeError("rfft2_backward: cotangent does not match a " + std::to_string(height) +
                     "x" + std::to_string(width) + " source");
  }
  // d/dx of sum Re(conj(G) X) = Re sum_{u,k} G[u,k] exp(+i(theta_u y + theta_k x)).
  const int wh = cotangent.width_half();
  Tensor out(Shape{cotangent.batch(), cotangent.channels(), height, width});
  std::vector<cd> row(width);
  for (int n = 0; n < cotangent.batch(); ++n) {
    for (int c = 0; c < cotangent.channels(); ++c) {
      std::vector<cd> plane = load_plane(cotangent, n, c);
      inverse_columns(plane, height, wh);
      for (int y = 0; y < height; ++y) {
        std::fill(row.begin(), row.end(), cd{});
        for (int k = 0; k < wh; ++k) row[k] = plane[y * wh + k];
        fft_inplace(row, +1);
        for (int x = 0; x < width; ++x) out.at(n, c, y, x) = row[x].real();
      }
    }
  }
  return out;
}

SpectrumTensor irfft2_backward(const Tensor& cotangent) {
  const Shape& s = cotangent.shape();
  SpectrumTensor out = rfft2_values(cotangent);
  const double norm = 1.0 / (static_cast<double>(s.h) * s.w);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int u = 0; u < s.h; ++u) {
        for (int k = 0; k < out.width_half(); ++k) {
          out.set(n, c, u, k, out.at(n, c, u, k) * (norm * hermitian_weight(k, s.w)));
        }
      }
    }
  }
  return out;
}

namespace {

void accumulate(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

SpectrumTensor rfft2(const Tensor& x) {
  SpectrumTensor out = rfft2_values(x);
  check_finite(out.values(), "rfft2");
  if (needs_grad({&x})) {
    Tensor values = out.values();
    values.set_requires_grad(true);
    const int width = x.shape().w;
    Tape::active()->record("rfft2", [x, values, width]() mutable {
      if (!values.has_grad()) return;
      SpectrumTensor g(Tensor(values.shape(), std::vector<double>(values.grad().begin(),
                                                                  values.grad().end())),
                       width);
      accumulate(x.grad_mut(), rfft2_backward(g, x.shape().h, width).data());
    });
  }
  return out;
}

Tensor irfft2(const SpectrumTensor& s, int out_h, int out_w) {
  Tensor out = irfft2_values(s, out_h, out_w);
  check_finite(out, "irfft2");
  Tensor values = s.values();
  if (needs_grad({&values})) {
    out.set_requires_grad(true);
    Tape::active()->record("irfft2", [values, out]() mutable {
      if (!out.has_grad()) return;
      Tensor g(out.shape(), std::vector<double>(out.grad().begin(), out.grad().end()));
      accumulate(values.grad_mut(), irfft2_backward(g).values().data());
    });
  }
  return out;
}

Tensor spectrum_to_channels(const SpectrumTensor& s) {
  const Shape& vs = s.values().shape();
  const int wh = s.width_half();
  const Shape os{vs.n, 2 * vs.c, vs.h, wh};
  Tensor out(os);
  for (int n = 0; n < vs.n; ++n) {
    for (int c = 0; c < vs.c; ++c) {
      for (int u = 0; u < vs.h; ++u) {
        for (int k = 0; k < wh; ++k) {
          out.at(n, 2 * c, u, k) = s.values().at(n, c, u, 2 * k);
          out.at(n, 2 * c + 1, u, k) = s.values().at(n, c, u, 2 * k + 1);
        }
      }
    }
  }
  Tensor values = s.values();
  if (needs_grad({&values})) {
    out.set_requires_grad(true);
    Tape::active()->record("spectrum_to_channels", [values, out]() mutable {
      if (!out.has_grad()) return;
      const Shape& vs = values.shape();
      const Shape& os = out.shape();
      auto gv = values.grad_mut();
      auto g = out.grad();
      for (int n = 0; n < vs.n; ++n) {
        for (int c = 0; c < vs.c; ++c) {
          for (int u = 0; u < vs.h; ++u) {
            for (int k = 0; k < os.w; ++k) {
              const std::size_t v = ((static_cast<std::size_t>(n) * vs.c + c) * vs.h + u) * vs.w;
              const std::size_t re = ((static_cast<std::size_t>(n) * os.c + 2 * c) * os.h + u) * os.w + k;
              gv[v + 2 * k] += g[re];
              gv[v + 2 * k + 1] += g[re + os.plane()];
            }
          }
        }
      }
    });
  }
  return out;
}

SpectrumTensor channels_to_spectrum(const Tensor& x, int source_width) {
  const Shape& s = x.shape();
  if (s.c % 2 != 0 || s.w != half_width(source_width)) {
    throw ShapeError("channels_to_spectrum: cannot read " + s.str() +
                     " as a spectrum of width " + std::to_string(source_width));
  }
  SpectrumTensor out = SpectrumTensor::zeros(s.n, s.c / 2, s.h, source_width);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c / 2; ++c) {
      for (int u = 0; u < s.h; ++u) {
        for (int k = 0; k < s.w; ++k) {
          out.set(n, c, u, k, {x.at(n, 2 * c, u, k), x.at(n, 2 * c + 1, u, k)});
        }
      }
    }
  }
  if (needs_grad({&x})) {
    Tensor values = out.values();
    values.set_requires_grad(true);
    Tape::active()->record("channels_to_spectrum", [x, values]() mutable {
      if (!values.has_grad()) return;
      const Shape& s = x.shape();
      const Shape& vs = values.shape();
      auto gx = x.grad_mut();
      auto g = values.grad();
      for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c / 2; ++c) {
          for (int u = 0; u < s.h; ++u) {
            for (int k = 0; k < s.w; ++k) {
              const std::size_t v = ((static_cast<std::size_t>(n) * vs.c + c) * vs.h + u) * vs.w;
              const std::size_t re = ((static_cast<std::size_t>(n) * s.c + 2 * c) * s.h + u) * s.w + k;
              gx[re] += g[v + 2 * k];
              gx[re + s.plane()] += g[v + 2 * k + 1];
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace dcf
