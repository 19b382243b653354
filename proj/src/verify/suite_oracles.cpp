#include <algorithm>
#include <cmath>
#include <limits>

#include "dcf/oracles.hpp"
#include "dcf/spectral.hpp"
#include "suites.hpp"

namespace dcf::verify {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::fabs(a.ptr()[i] - b.ptr()[i]));
  return worst;
}

namespace {

constexpr int kCases = 100;

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void sweep(Reporter& r, const std::string& name, int cases, double tol, const std::function<double(Rng&)>& one,
           std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) worst = std::max(worst, one(rng));
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d cases, max err %.3g (tol %.0e)", cases, worst, tol);
  r.check(name, worst <= tol, buf);
}

Tensor maybe_bias(Rng& rng, int channels) {
  if (uniform(rng, 0, 1) == 0) return Tensor();
  return random_normal({1, channels, 1, 1}, rng);
}

double conv_case(Rng& rng) {
  const int k = uniform(rng, 1, 4);
  ConvSpec spec = ConvSpec::conv(k, uniform(rng, 1, 3), uniform(rng, 1, 3), uniform(rng, 1, 2),
                                 {uniform(rng, 0, 2), uniform(rng, 0, 2), uniform(rng, 0, 2), uniform(rng, 0, 2)});
  Tensor x = random_normal({uniform(rng, 1, 2), spec.in_channels, uniform(rng, k, k + 5), uniform(rng, k, k + 5)}, rng);
  Tensor w = random_normal(spec.weight_shape(), rng);
  Tensor b = maybe_bias(rng, spec.out_channels);
  return max_abs_diff(conv2d(x, spec, w, b), oracle::conv2d(x, spec, w, b));
}

double conv_transpose_case(Rng& rng) {
  while (true) {
    const int k = uniform(rng, 1, 4), stride = uniform(rng, 1, 2);
    const Padding pad{uniform(rng, 0, k - 1), uniform(rng, 0, k - 1), uniform(rng, 0, k - 1), uniform(rng, 0, k - 1)};
    ConvSpec spec = ConvSpec::conv_transpose(k, uniform(rng, 1, 3), uniform(rng, 1, 3), stride, pad,
                                             uniform(rng, 0, stride - 1));
    const int h = uniform(rng, 1, 5), w = uniform(rng, 1, 5);
    const int oh = (h - 1) * stride - pad.top - pad.bottom + k + spec.output_padding;
    const int ow = (w - 1) * stride - pad.left - pad.right + k + spec.output_padding;
    if (oh < 1 || ow < 1) continue;
    Tensor x = random_normal({uniform(rng, 1, 2), spec.in_channels, h, w}, rng);
    Tensor wt = random_normal(spec.weight_shape(), rng);
    Tensor b = maybe_bias(rng, spec.out_channels);
    return max_abs_diff(conv_transpose2d(x, spec, wt, b), oracle::conv_transpose2d(x, spec, wt, b));
  }
}

// conv_transpose2d with the conv weight equals the input-gradient of conv2d.
double adjoint_case(Rng& rng) {
  while (true) {
    const int k = uniform(rng, 1, 4), stride = uniform(rng, 1, 2);
    const Padding pad{uniform(rng, 0, k - 1), uniform(rng, 0, k - 1), uniform(rng, 0, k - 1), uniform(rng, 0, k - 1)};
    const int cin = uniform(rng, 1, 3), cout = uniform(rng, 1, 3);
    const int out_pad = uniform(rng, 0, stride - 1);
    // Input sizes the conv maps onto (oh, ow) with out_pad rows/cols to spare.
    const int oh = uniform(rng, 1, 5), ow = uniform(rng, 1, 5);
    const int h = (oh - 1) * stride + k - pad.top - pad.bottom + out_pad;
    const int w = (ow - 1) * stride + k - pad.left - pad.right + out_pad;
    if (h < 1 || w < 1 || h + pad.top + pad.bottom < k || w + pad.left + pad.right < k) continue;
    ConvSpec spec = ConvSpec::conv(k, cin, cout, stride, pad);
    Tensor x = random_normal({uniform(rng, 1, 2), cin, h, w}, rng);
    Tensor wt = random_normal(spec.weight_shape(), rng);
    x.set_requires_grad(true);
    Tape tape;
    Tape::Recording guard(tape);
    Tensor y = conv2d(x, spec, wt, Tensor());
    if (y.shape().h != oh || y.shape().w != ow) continue;
    Tensor cot = random_normal(y.shape(), rng);
    tape.backward(sum(mul(y, cot)));
    Tensor adj = conv_transpose2d(cot, ConvSpec::conv_transpose(k, cout, cin, stride, pad, out_pad), wt, Tensor());
    Tensor gx(x.shape(), std::vector<double>(x.grad().begin(), x.grad().end()));
    return max_abs_diff(adj, gx);
  }
}

double pool_case(Rng& rng) {
  Tensor x = random_normal({uniform(rng, 1, 2), uniform(rng, 1, 3), 2 * uniform(rng, 1, 5), 2 * uniform(rng, 1, 5)}, rng);
  return max_abs_diff(avg_pool2(x), oracle::avg_pool2(x));
}

double filter_case(Rng& rng) {
  const int side = 2 * uniform(rng, 0, 2) + 1;
  const int h = uniform(rng, 1, 8), w = uniform(rng, 1, 8), n = uniform(rng, 1, 2);
  Tensor f = random_normal({n, uniform(rng, 1, 4), h, w}, rng);
  KernelField t = normalize_kernels(KernelField(random_normal({n, side * side, h, w}, rng, 2.0), side, false));
  return max_abs_diff(apply_filter(f, t), oracle::apply_filter(f, t.weights(), side));
}

double softmax_case(Rng& rng) {
  const int side = 2 * uniform(rng, 0, 2) + 1;
  Tensor logits = random_normal({uniform(rng, 1, 2), side * side, uniform(rng, 1, 6), uniform(rng, 1, 6)}, rng, 3.0);
  return max_abs_diff(normalize_kernels(KernelField(logits, side, false)).weights(), oracle::softmax_taps(logits));
}

Tensor random_image(Rng& rng, int n) { return random_uniform({n, 3, 16, 16}, rng, -1, 1); }

double l1_case(Rng& rng) {
  Tensor a = random_normal({uniform(rng, 1, 2), uniform(rng, 1, 3), uniform(rng, 1, 8), uniform(rng, 1, 8)}, rng);
  Tensor b = random_normal(a.shape(), rng);
  return std::fabs(l1_loss(a, b).item() - oracle::l1(a, b));
}

const FixedFeatureExtractor& shared_extractor() {
  static const FixedFeatureExtractor e;
  return e;
}

double perceptual_case(Rng& rng) {
  const int n = uniform(rng, 1, 2);
  Tensor a = random_image(rng, n), b = random_image(rng, n);
  return std::fabs(perceptual_loss(a, b, shared_extractor()).item() - oracle::perceptual(a, b, shared_extractor()));
}

double style_case(Rng& rng) {
  const int n = uniform(rng, 1, 2);
  Tensor a = random_image(rng, n), b = random_image(rng, n);
  return std::fabs(style_loss(a, b, shared_extractor()).item() - oracle::style(a, b, shared_extractor()));
}

double hinge_case(Rng& rng) {
  const Shape s{uniform(rng, 1, 2), 1, uniform(rng, 1, 4), uniform(rng, 1, 4)};
  Tensor real = random_normal(s, rng, 2.0), fake = random_normal(s, rng, 2.0);
  return std::max(std::fabs(hinge_discriminator_loss(real, fake).item() - oracle::hinge_discriminator(real, fake)),
                  std::fabs(hinge_generator_loss(fake).item() - oracle::hinge_generator(fake)));
}

double adversarial_case(Rng& rng) {
  PatchDiscriminator disc(3, rng());
  Tensor pred = random_image(rng, 1), target = random_image(rng, 1);
  const Tensor real = oracle::discriminator_logits(target, disc);
  const Tensor fake = oracle::discriminator_logits(pred, disc);
  const double d = adversarial_loss(disc, pred, target, AdversarialRole::kDiscriminator).item();
  const double g = adversarial_loss(disc, pred, target, AdversarialRole::kGenerator).item();
  return std::max(std::fabs(d - oracle::hinge_discriminator(real, fake)), std::fabs(g - oracle::hinge_generator(fake)));
}

double total_loss_case(Rng& rng) {
  std::uniform_real_distribution<double> u(0, 2);
  LossComponents c{u(rng), u(rng) - 1.0, u(rng), u(rng) * 0.01};
  LossWeights w{u(rng), u(rng), u(rng), u(rng) * 250};
  const double expected = w.l1 * c.l1 + w.adversarial * c.adversarial + w.perceptual * c.perceptual + w.style * c.style;
  return std::fabs(total_loss(c, w).total - expected);
}

double psnr_case(Rng& rng) {
  Tensor a = random_uniform({1, 3, uniform(rng, 2, 16), uniform(rng, 2, 16)}, rng, -1, 1);
  Tensor b = random_uniform(a.shape(), rng, -1, 1);
  const double peak = uniform(rng, 0, 1) ? 1.0 : 2.0;
  return std::fabs(psnr(a, b, peak) - oracle::psnr(a, b, peak));
}

double ssim_case(Rng& rng) {
  const int h = uniform(rng, 11, 40), w = uniform(rng, 11, 40);
  Tensor a = random_uniform({1, uniform(rng, 1, 3), h, w}, rng, 0, 1);
  // Correlated pair so local SSIM values span a useful range.
  Tensor b = a.clone();
  std::normal_distribution<double> noise(0.0, 0.1);
  for (double& v : b.data()) v += noise(rng);
  return std::fabs(ssim(a, b, 1.0) - oracle::ssim(a, b, 1.0));
}

double ssim_64_case(Rng& rng) {
  Tensor a = random_uniform({1, 3, 64, 64}, rng, -1, 1), b = random_uniform({1, 3, 64, 64}, rng, -1, 1);
  return std::fabs(ssim(a, b, 2.0) - oracle::ssim(a, b, 2.0));
}

GaussianStats random_stats(Rng& rng, int d) {
  GaussianStats s;
  s.count = 10;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < d; ++i) s.mean.push_back(g(rng));
  std::vector<double> b(static_cast<std::size_t>(d) * d);
  for (double& v : b) v = g(rng);
  s.covariance = SquareMatrix(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double acc = i == j ? 0.01 : 0.0;
      for (int k = 0; k < d; ++k) acc += b[i * d + k] * b[j * d + k] / d;
      s.covariance(i, j) = acc;
    }
  return s;
}

double frechet_case(Rng& rng) {
  GaussianStats a = random_stats(rng, 8), b = random_stats(rng, 8);
  return std::fabs(frechet_distance(a, b) - oracle::frechet(a, b));
}

}  // namespace

void oracle_suite(Reporter& r) {
  sweep(r, "conv2d vs loop oracle", 120, 1e-12, conv_case, 201);
  sweep(r, "conv_transpose2d vs scatter oracle", kCases, 1e-12, conv_transpose_case, 202);
  sweep(r, "conv_transpose2d equals conv2d input adjoint", kCases, 1e-12, adjoint_case, 203);
  sweep(r, "avg_pool2 vs loop oracle", kCases, 1e-12, pool_case, 204);
  sweep(r, "apply_filter vs loop oracle", kCases, 1e-12, filter_case, 205);
  sweep(r, "normalize_kernels vs direct softmax", kCases, 1e-12, softmax_case, 206);
  sweep(r, "l1_loss vs loop oracle", kCases, 1e-12, l1_case, 207);
  sweep(r, "perceptual_loss vs direct formula", kCases, 1e-10, perceptual_case, 208);
  sweep(r, "style_loss vs direct formula", kCases, 1e-10, style_case, 209);
  sweep(r, "hinge losses vs formula", kCases, 1e-12, hinge_case, 210);
  sweep(r, "adversarial_loss vs loop discriminator", kCases, 1e-12, adversarial_case, 211);
  sweep(r, "total_loss vs weighted sum", kCases, 1e-12, total_loss_case, 212);
  sweep(r, "psnr vs direct formula", kCases, 1e-10, psnr_case, 213);
  sweep(r, "ssim vs per-window oracle", kCases, 1e-8, ssim_case, 214);
  sweep(r, "ssim vs per-window oracle at 64x64", 10, 1e-8, ssim_64_case, 215);
  sweep(r, "frechet_distance vs product-eigenvalue oracle", kCases, 1e-6, frechet_case, 216);
}

}  // namespace dcf::verify
