#include <algorithm>
#include <cmath>
#include <complex>

#include "dcf/errors.hpp"
#include "dcf/masks.hpp"
#include "dcf/oracles.hpp"
#include "dcf/spectral.hpp"
#include "suites.hpp"

namespace dcf::verify {

namespace {

double spectrum_inner(const SpectrumTensor& a, const SpectrumTensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values().numel(); ++i) acc += a.values().ptr()[i] * b.values().ptr()[i];
  return acc;
}

double tensor_inner(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a.ptr()[i] * b.ptr()[i];
  return acc;
}

// A spectrum that is the half-plane of some real signal's transform, so
// irfft2 is invertible on it.
SpectrumTensor random_spectrum(Rng& rng, int n, int c, int h, int w) {
  return rfft2(random_normal({n, c, h, w}, rng));
}

}  // namespace

void fft_suite(Reporter& r) {
  Rng rng(301);
  const int sizes[] = {2, 4, 8, 16};
  double dft_err = 0.0, trip_err = 0.0, parseval_err = 0.0, lin_err = 0.0, inv_lin_err = 0.0;
  double adj_fwd = 0.0, adj_inv = 0.0;
  for (int h : sizes) {
    for (int w : sizes) {
      Tensor x = random_normal({2, 2, h, w}, rng);
      SpectrumTensor s = rfft2(x);
      for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c) {
          const auto ref = oracle::dft2_half(x, n, c);
          for (int u = 0; u < h; ++u)
            for (int k = 0; k < half_width(w); ++k)
              dft_err = std::max(dft_err, std::abs(s.at(n, c, u, k) - ref[u * half_width(w) + k]));
        }
      trip_err = std::max(trip_err, max_abs_diff(irfft2(s, h, w), x));

      for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c) {
          double energy = 0.0, spectral = 0.0;
          for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) energy += x.at(n, c, y, xx) * x.at(n, c, y, xx);
          for (int u = 0; u < h; ++u)
            for (int k = 0; k < half_width(w); ++k) spectral += hermitian_weight(k, w) * std::norm(s.at(n, c, u, k));
          parseval_err = std::max(parseval_err, std::fabs(energy - spectral / (h * w)));
        }

      const double a = 0.7, b = -1.3;
      Tensor y = random_normal(x.shape(), rng);
      Tensor combo = add(scale(x, a), scale(y, b));
      Tensor lhs = rfft2(combo).values();
      Tensor rhs = add(scale(s.values(), a), scale(rfft2(y).values(), b));
      lin_err = std::max(lin_err, max_abs_diff(lhs, rhs));
      SpectrumTensor s1 = random_spectrum(rng, 1, 1, h, w), s2 = random_spectrum(rng, 1, 1, h, w);
      Tensor inv_lhs = irfft2(SpectrumTensor(add(scale(s1.values(), a), scale(s2.values(), b)), w), h, w);
      Tensor inv_rhs = add(scale(irfft2(s1, h, w), a), scale(irfft2(s2, h, w), b));
      inv_lin_err = std::max(inv_lin_err, max_abs_diff(inv_lhs, inv_rhs));

      // <rfft2(x), g> = <x, rfft2^T g> and <irfft2(S), g> = <S, irfft2^T g>.
      SpectrumTensor g(random_normal(s.values().shape(), rng), w);
      adj_fwd = std::max(adj_fwd, std::fabs(spectrum_inner(s, g) - tensor_inner(x, rfft2_backward(g, h, w))));
      Tensor gy = random_normal(x.shape(), rng);
      SpectrumTensor sg(random_normal(s.values().shape(), rng), w);
      adj_inv = std::max(adj_inv, std::fabs(tensor_inner(irfft2(sg, h, w), gy) - spectrum_inner(sg, irfft2_backward(gy))));
    }
  }
  r.within("rfft2 vs naive DFT, sizes {2,4,8,16}^2", dft_err, 1e-8);
  r.within("irfft2(rfft2(x)) round trip", trip_err, 1e-10);
  r.within("Parseval with Hermitian weights", parseval_err, 1e-9);
  r.within("rfft2 linearity", lin_err, 1e-10);
  r.within("irfft2 linearity", inv_lin_err, 1e-10);
  r.within("rfft2 adjoint inner product", adj_fwd, 1e-9);
  r.within("irfft2 adjoint inner product", adj_inv, 1e-9);

  double delta_err = 0.0, flat_err = 0.0, zero_err = 0.0;
  for (int h : sizes) {
    for (int w : sizes) {
      Tensor delta(Shape{1, 1, h, w});
      delta.at(0, 0, 0, 0) = 1.0;
      SpectrumTensor s = rfft2(delta);
      for (int u = 0; u < h; ++u)
        for (int k = 0; k < half_width(w); ++k) delta_err = std::max(delta_err, std::abs(s.at(0, 0, u, k) - 1.0));
      SpectrumTensor flat = SpectrumTensor::zeros(1, 1, h, w);
      for (int u = 0; u < h; ++u)
        for (int k = 0; k < half_width(w); ++k) flat.set(0, 0, u, k, 1.0);
      flat_err = std::max(flat_err, max_abs_diff(irfft2(flat, h, w), delta));
      SpectrumTensor z = rfft2(Tensor(Shape{1, 1, h, w}));
      for (double v : z.values().data()) zero_err = std::max(zero_err, std::fabs(v));
    }
  }
  r.within("rfft2(delta) is 1+0i everywhere", delta_err, 1e-12);
  r.within("irfft2(flat spectrum) is a delta", flat_err, 1e-12);
  r.within("rfft2(zeros) is zero", zero_err, 0.0);

  SpectrumTensor zero_cot = SpectrumTensor::zeros(1, 1, 8, 8);
  double zero_grad = 0.0;
  const Tensor from_spectrum = rfft2_backward(zero_cot, 8, 8);
  const SpectrumTensor from_image = irfft2_backward(Tensor(Shape{1, 1, 8, 8}));
  zero_grad = std::max(max_abs_diff(from_spectrum, Tensor(from_spectrum.shape())),
                       max_abs_diff(from_image.values(), Tensor(from_image.values().shape())));
  r.within("zero cotangent gives zero gradient", zero_grad, 0.0);

  bool rejected = false;
  std::string message;
  try {
    rfft2(Tensor(Shape{1, 1, 6, 8}));
  } catch (const ShapeError& e) {
    rejected = true;
    message = e.what();
  }
  r.check("non-power-of-two size rejected", rejected && message.find("powers of two") != std::string::npos, message);
}

void filtering_suite(Reporter& r) {
  Rng rng(302);
  // Identity kernels.
  {
    Tensor f = random_normal({2, 4, 7, 5}, rng);
    r.check("identity kernel reproduces input exactly", max_abs_diff(apply_filter(f, KernelField::identity(2, 3, 7, 5)), f) == 0.0);
    auto [gf, gt] = apply_filter_backward(f, f, KernelField::identity(2, 3, 7, 5));
    r.check("identity kernel: grad_f equals cotangent exactly", max_abs_diff(gf, f) == 0.0);
  }
  // Constant preservation, borders included.
  {
    double worst = 0.0;
    for (int side : {1, 3, 5, 7}) {
      for (int trial = 0; trial < 10; ++trial) {
        const double c = random_normal({1, 1, 1, 1}, rng).item();
        Tensor f(Shape{1, 3, 6, 6}, c);
        KernelField t = normalize_kernels(KernelField(random_normal({1, side * side, 6, 6}, rng, 2.0), side, false));
        worst = std::max(worst, max_abs_diff(apply_filter(f, t), f));
      }
    }
    r.within("constant image preserved at every pixel", worst, 1e-12);
    Tensor f(Shape{1, 2, 5, 5}, 0.75);
    KernelField uniform = normalize_kernels(KernelField(Tensor(Shape{1, 9, 5, 5}), 3, false));
    r.within("uniform 1/9 kernels on a constant image", max_abs_diff(apply_filter(f, uniform), f), 1e-12);
  }
  // Locality.
  {
    bool ok = true;
    std::string detail;
    for (int side : {3, 5}) {
      const int radius = (side - 1) / 2;
      Tensor f = random_normal({1, 2, 9, 9}, rng);
      KernelField t = normalize_kernels(KernelField(random_normal({1, side * side, 9, 9}, rng), side, false));
      const Tensor base = apply_filter(f, t);
      for (auto [py, px] : {std::pair{0, 0}, std::pair{4, 4}, std::pair{8, 3}, std::pair{2, 8}}) {
        Tensor g = f.clone();
        g.at(0, 1, py, px) += 1.0;
        const Tensor moved = apply_filter(g, t);
        for (int y = 0; y < 9; ++y)
          for (int x = 0; x < 9; ++x) {
            const bool changed = moved.at(0, 1, y, x) != base.at(0, 1, y, x);
            const bool near = std::max(std::abs(y - py), std::abs(x - px)) <= radius;
            if (changed && !near) {
              ok = false;
              detail = "N=" + std::to_string(side) + " pixel (" + std::to_string(y) + "," + std::to_string(x) +
                       ") changed";
            }
            if (moved.at(0, 0, y, x) != base.at(0, 0, y, x)) ok = false;
          }
        if (moved.at(0, 1, py, px) == base.at(0, 1, py, px)) ok = false;
      }
    }
    r.check("perturbations stay within Chebyshev radius (N-1)/2", ok, detail);
  }
  // Kernel normalization.
  {
    double sum_err = 0.0, min_w = 1.0;
    for (int trial = 0; trial < 20; ++trial) {
      KernelField t = normalize_kernels(KernelField(random_normal({2, 9, 6, 6}, rng, 5.0), 3, false));
      const Tensor& w = t.weights();
      for (int n = 0; n < 2; ++n)
        for (int y = 0; y < 6; ++y)
          for (int x = 0; x < 6; ++x) {
            double s = 0.0;
            for (int k = 0; k < 9; ++k) {
              s += w.at(n, k, y, x);
              min_w = std::min(min_w, w.at(n, k, y, x));
            }
            sum_err = std::max(sum_err, std::fabs(s - 1.0));
          }
    }
    r.within("softmax kernels sum to one", sum_err, 1e-9);
    r.check("softmax kernels are non-negative", min_w >= 0.0);

    Tensor zeros(Shape{1, 9, 2, 2});
    r.within("zero logits give 1/9", max_abs_diff(normalize_kernels(KernelField(zeros, 3, false)).weights(),
                                                  Tensor(Shape{1, 9, 2, 2}, 1.0 / 9.0)),
             1e-15);
    Tensor peaked(Shape{1, 9, 1, 1});
    peaked.at(0, 0, 0, 0) = 10.0;
    const double first = normalize_kernels(KernelField(peaked, 3, false)).weights().at(0, 0, 0, 0);
    const double expected = std::exp(10.0) / (std::exp(10.0) + 8.0);
    r.within("logits (10, 0, ..., 0): first weight", std::fabs(first - expected), 1e-15);

    Tensor logits = random_normal({1, 9, 3, 3}, rng);
    Tensor shifted = add_scalar(logits, 4.25);
    r.within("softmax shift invariance",
             max_abs_diff(normalize_kernels(KernelField(logits, 3, false)).weights(),
                          normalize_kernels(KernelField(shifted, 3, false)).weights()),
             1e-12);
  }
  // Channel equivariance.
  {
    Tensor f = random_normal({1, 3, 5, 5}, rng);
    KernelField t = normalize_kernels(KernelField(random_normal({1, 9, 5, 5}, rng), 3, false));
    Tensor perm = concat_channels(slice_channels(f, 2, 1), slice_channels(f, 0, 2));
    Tensor out = apply_filter(f, t);
    Tensor expect = concat_channels(slice_channels(out, 2, 1), slice_channels(out, 0, 2));
    r.check("channel permutation commutes with apply_filter", max_abs_diff(apply_filter(perm, t), expect) == 0.0);
  }
  // Contracts.
  {
    bool mismatch = false, unnormalized = false;
    try {
      apply_filter(Tensor(Shape{1, 2, 5, 5}), KernelField::identity(1, 3, 4, 5));
    } catch (const ShapeError&) {
      mismatch = true;
    }
    try {
      apply_filter(Tensor(Shape{1, 2, 5, 5}), KernelField(Tensor(Shape{1, 9, 5, 5}), 3, false));
    } catch (const std::invalid_argument&) {
      unnormalized = true;
    }
    r.check("spatial mismatch rejected", mismatch);
    r.check("unnormalized kernels rejected", unnormalized);
    Tensor f = random_normal({1, 2, 5, 5}, rng);
    auto [gf, gt] = apply_filter_backward(Tensor(f.shape()), f, KernelField::identity(1, 3, 5, 5));
    double m = 0.0;
    for (double v : gf.data()) m = std::max(m, std::fabs(v));
    for (double v : gt.data()) m = std::max(m, std::fabs(v));
    r.check("zero cotangent gives zero gradients", m == 0.0);
  }
}

void mask_suite(Reporter& r) {
  {
    const MaskGrid m = center_mask(256, 256);
    bool ok = true;
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x) {
        const bool hole = y >= 64 && y < 192 && x >= 64 && x < 192;
        if (m.at(y, x) != (hole ? 0 : 1)) ok = false;
      }
    r.check("center mask 256x256 hole is [64,192)^2", ok);
    r.check("center mask coverage is exactly 0.25", m.coverage() == 0.25 && center_mask(64, 64).coverage() == 0.25 &&
                                                        center_mask(64, 64).hole_count() == 32 * 32);
    bool rejected = false;
    try {
      center_mask(63, 64);
    } catch (const std::invalid_argument&) {
      rejected = true;
    }
    r.check("odd center-mask size rejected", rejected);
  }
  {
    const CoverageRange range;
    double lo = 1.0, hi = 0.0;
    std::size_t outside = 0;
    bool binary = true;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      const MaskGrid m = irregular_mask(64, 64, seed);
      const double c = m.coverage();
      lo = std::min(lo, c);
      hi = std::max(hi, c);
      if (c < range.low || c > range.high) ++outside;
      if (seed % 500 == 0) {
        for (auto v : m.values()) binary = binary && (v == 0 || v == 1);
      }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "coverage range [%.4f, %.4f], %zu outside", lo, hi, outside);
    r.check("10000 irregular 64x64 masks inside [0.2, 0.4]", outside == 0, buf);
    r.check("irregular masks are binary", binary);
  }
  {
    bool same = true, differ = false;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      same = same && irregular_mask(64, 64, seed) == irregular_mask(64, 64, seed);
      differ = differ || !(irregular_mask(64, 64, seed) == irregular_mask(64, 64, seed + 1));
    }
    r.check("same seed gives a bitwise-identical mask", same);
    r.check("different seeds give different masks", differ);
    bool big = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const double c = irregular_mask(256, 256, seed).coverage();
      big = big && c >= 0.2 && c <= 0.4;
    }
    r.check("irregular 256x256 masks inside [0.2, 0.4]", big);
    bool rejected = false;
    try {
      irregular_mask(4, 6, 1);
    } catch (const std::invalid_argument&) {
      rejected = true;
    }
    r.check("degenerate size (H*W < 25) rejected", rejected);
  }
  {
    Rng rng(303);
    Tensor img = random_uniform({2, 3, 8, 8}, rng, -1, 1);
    const MaskGrid grids[] = {irregular_mask(8, 8, 1), irregular_mask(8, 8, 2)};
    Tensor mask = mask_tensor(grids);
    Tensor out = apply_mask(img, mask);
    bool exact = true;
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            exact = exact && out.at(n, c, y, x) == (grids[n].at(y, x) ? img.at(n, c, y, x) : 0.0);
    r.check("apply_mask matches per-pixel select", exact);
    r.check("apply_mask is idempotent", max_abs_diff(apply_mask(out, mask), out) == 0.0);
    r.check("all-ones mask is the identity", max_abs_diff(apply_mask(img, Tensor(Shape{2, 1, 8, 8}, 1.0)), img) == 0.0);
    double m = 0.0;
    const Tensor blank = apply_mask(img, Tensor(Shape{2, 1, 8, 8}, 0.0));
    for (double v : blank.data()) m = std::max(m, std::fabs(v));
    r.check("all-zeros mask zeroes the image", m == 0.0);
  }
}

}  // namespace dcf::verify
