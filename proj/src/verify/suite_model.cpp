#include <algorithm>
#include <cmath>
#include <limits>

#include "dcf/errors.hpp"
#include "dcf/ffc.hpp"
#include "dcf/masks.hpp"
#include "dcf/metrics.hpp"
#include "dcf/model.hpp"
#include "suites.hpp"

namespace dcf::verify {

namespace {

struct TableRow {
  const char* name;
  int channels;
  int size;  // at 256 x 256 input
};

// Reference layer outputs at 256 x 256 input.
constexpr TableRow kTable[] = {
    {"f1", 64, 256},  {"f2", 128, 128}, {"f2'", 128, 64}, {"f3", 256, 64}, {"e1", 64, 256},
    {"e2", 128, 128}, {"e2'", 128, 64}, {"e3", 256, 64},  {"T3", 9, 64},   {"f3'", 256, 64},
    {"f4", 256, 64},  {"f5", 256, 64},  {"f6", 256, 64},  {"f7", 128, 64}, {"f8", 64, 128},
    {"f9", 3, 256},
};

std::string audit(const ShapeTrace& trace, int resolution) {
  for (const auto& row : kTable) {
    const int size = row.size * resolution / 256;
    const auto got = trace.find(row.name);
    const Shape want{1, row.channels, size, size};
    if (!got) return std::string(row.name) + " missing from trace";
    if (*got != want) return std::string(row.name) + ": expected " + want.str() + ", got " + got->str();
  }
  return "";
}

}  // namespace

void shape_suite(Reporter& r) {
  for (int res : {256, 32, 64, 128}) {
    ModelConfig cfg;
    cfg.resolution = res;
    DCFNetwork net = DCFNetwork::build(cfg, 7);
    ShapeTrace trace;
    Tensor image(Shape{1, 3, res, res});
    Tensor mask(Shape{1, 1, res, res}, 1.0);
    net.forward(image, mask, Mode::kEval, &trace);
    const std::string err = audit(trace, res);
    r.check("forward trace matches the layer table at R=" + std::to_string(res), err.empty(), err);
    const auto schedule = compare_schedules(DCFNetwork::expected_schedule(cfg, 1), net.derived_schedule(1));
    r.check("ConvSpec-derived schedule matches at R=" + std::to_string(res), schedule.empty(),
            schedule.empty() ? "" : schedule.front());
  }
  // The two transposed rows checked through the shape function alone.
  r.check("convT(4,128,64) stride 2 pad 1: 64 -> 128",
          conv_output_shape({1, 128, 64, 64}, ConvSpec::conv_transpose(4, 128, 64, 2, Padding::uniform(1))) ==
              Shape{1, 64, 128, 128});
  r.check("convT(7,64,3) stride 2 pad 3 out-pad 1: 128 -> 256",
          conv_output_shape({1, 64, 128, 128}, ConvSpec::conv_transpose(7, 64, 3, 2, Padding::uniform(3), 1)) ==
              Shape{1, 3, 256, 256});
  r.check("[f2', e2'] concat: 128 + 128 -> 256",
          concat_channels(Tensor(Shape{1, 128, 64, 64}), Tensor(Shape{1, 128, 64, 64})).shape() ==
              Shape{1, 256, 64, 64});
  bool rejected = true;
  for (int bad : {4, 48, 100}) {
    ModelConfig cfg;
    cfg.resolution = bad;
    try {
      DCFNetwork::build(cfg, 1);
      rejected = false;
    } catch (const ShapeError&) {
    }
  }
  r.check("resolutions that are not powers of two >= 8 rejected", rejected);
}

void model_suite(Reporter& r) {
  Rng rng(401);
  ModelConfig cfg;
  cfg.resolution = 32;
  DCFNetwork a = DCFNetwork::build(cfg, 9), b = DCFNetwork::build(cfg, 9);
  const ParamList pa = a.parameters(), pb = b.parameters();
  bool same = pa.params.size() == pb.params.size();
  for (std::size_t i = 0; same && i < pa.params.size(); ++i) {
    same = max_abs_diff(pa.params[i].tensor, pb.params[i].tensor) == 0.0;
  }
  r.check("same seed gives bitwise-identical parameters", same);
  r.check("parameter count is deterministic", pa.param_count() == pb.param_count(),
          std::to_string(pa.param_count()));

  Tensor truth = random_uniform({2, 3, 32, 32}, rng, -1, 1);
  const MaskGrid grids[] = {irregular_mask(32, 32, 3), center_mask(32, 32)};
  Tensor mask = mask_tensor(grids);
  Tensor input = apply_mask(truth, mask);
  ForwardResult out = a.forward(input, mask, Mode::kEval);
  ForwardResult again = b.forward(input, mask, Mode::kEval);
  r.check("eval forward is deterministic", max_abs_diff(out.composited, again.composited) == 0.0);
  bool known = true, range = true;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          if (grids[n].at(y, x) && out.composited.at(n, c, y, x) != input.at(n, c, y, x)) known = false;
          const double v = out.raw.at(n, c, y, x);
          if (v < -1.0 || v > 1.0) range = false;
        }
  r.check("composite equals the input at known pixels", known);
  r.check("raw output within [-1, 1]", range && out.raw.shape() == truth.shape());

  KernelField t = out.kernels;
  double sum_err = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        double s = 0.0;
        for (int k = 0; k < 9; ++k) s += t.weights().at(n, k, y, x);
        sum_err = std::max(sum_err, std::fabs(s - 1.0));
      }
  r.check("T3 shape is (B, 9, R/4, R/4)", t.weights().shape() == Shape{2, 9, 8, 8});
  r.within("T3 kernels sum to one", sum_err, 1e-9);
  double diff = 0.0;
  for (int k = 0; k < 9; ++k)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) diff = std::max(diff, std::fabs(t.weights().at(0, k, y, x) - t.weights().at(1, k, y, x)));
  r.check("distinct inputs give distinct kernel fields", diff > 0.0);

  // Fourier unit with identity spectral conv and no norm/activation.
  {
    FourierUnit fu(3, rng);
    fu.set_use_norm(false);
    fu.set_use_activation(false);
    Tensor w = fu.conv().weight();
    std::fill(w.data().begin(), w.data().end(), 0.0);
    for (int i = 0; i < 6; ++i) w.at(i, i, 0, 0) = 1.0;
    Tensor x = random_normal({1, 3, 16, 16}, rng);
    r.within("Fourier unit with identity conv is the identity", max_abs_diff(fu.forward(x, Mode::kTrain), x), 1e-10);
    Tensor x64 = random_normal({1, 3, 64, 64}, rng);
    r.check("Fourier unit keeps 16x16 and 64x64 shapes", fu.forward(x64, Mode::kEval).shape() == x64.shape());
  }
  // Global receptive field of the Fourier unit. The ReLU acts on the spectrum;
  // without it the unit is real-linear per frequency and a pixel only reaches
  // rows y and -y.
  {
    FourierUnit fu(2, rng);
    Tensor x = random_normal({1, 2, 8, 8}, rng);
    Tensor base = fu.forward(x, Mode::kEval);
    Tensor y = x.clone();
    y.at(0, 0, 3, 5) += 1.0;
    Tensor moved = fu.forward(y, Mode::kEval);
    bool every = true;
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) every = every && moved.at(0, c, i, j) != base.at(0, c, i, j);
    r.check("single-pixel change reaches every Fourier-unit output", every);
  }
  // Spectral transform and FFC contracts.
  {
    SpectralTransform st(8, 8, true, rng);
    Tensor x = random_normal({1, 8, 16, 16}, rng);
    Tensor with = st.forward(x, Mode::kEval);
    st.set_enable_lfu(false);
    Tensor without = st.forward(x, Mode::kEval);
    r.check("spectral transform preserves shape", with.shape() == x.shape() && without.shape() == x.shape());
    r.check("disabling the local Fourier unit changes the output", max_abs_diff(with, without) > 0.0);

    FFCConfig big{256, 0.5, true};
    r.check("256 channels split 128 local + 128 global", big.local_channels() == 128 && big.global_channels() == 128);
    FFCLayer layer(FFCConfig{16, 0.5, true}, rng);
    auto [yl, yg] = layer.forward(Tensor(Shape{1, 8, 8, 8}), Tensor(Shape{1, 8, 8, 8}), Mode::kTrain);
    double m = 0.0;
    for (double v : yl.data()) m = std::max(m, std::fabs(v));
    for (double v : yg.data()) m = std::max(m, std::fabs(v));
    r.check("FFC layer maps zero input to zero output", m == 0.0);

    FFCResBlock block(FFCConfig{16, 0.5, true}, rng);
    ParamList bp;
    block.collect("b", bp);
    for (const auto& p : bp.params) {
      if (p.name.ends_with(".weight") || p.name.ends_with(".bias")) {
        Tensor v = p.tensor;
        std::fill(v.data().begin(), v.data().end(), 0.0);
      }
    }
    Tensor xb = random_normal({1, 16, 8, 8}, rng);
    r.check("FFC-Res with zero weights is the identity", max_abs_diff(block.forward(xb, Mode::kTrain), xb) == 0.0);
    FFCResBlock full(FFCConfig{256, 0.5, true}, rng);
    r.check("FFC-Res keeps 1x256x64x64",
            full.forward(Tensor(Shape{1, 256, 64, 64}), Mode::kEval).shape() == Shape{1, 256, 64, 64});
  }
  // Contracts.
  {
    bool rejected = false;
    try {
      a.forward(input, Tensor(Shape{2, 1, 16, 16}, 1.0), Mode::kEval);
    } catch (const ShapeError&) {
      rejected = true;
    }
    r.check("mask/image size mismatch rejected", rejected);
  }
}

void loss_suite(Reporter& r) {
  Rng rng(501);
  const FixedFeatureExtractor extractor;
  Tensor a = random_uniform({1, 3, 16, 16}, rng, -1, 1);
  r.check("l1(x, x) = 0", l1_loss(a, a).item() == 0.0);
  r.within("l1(x + 0.5, x) = 0.5", std::fabs(l1_loss(add_scalar(a, 0.5), a).item() - 0.5), 1e-15);
  r.check("perceptual(x, x) = 0 and style(x, x) = 0",
          perceptual_loss(a, a, extractor).item() == 0.0 && style_loss(a, a, extractor).item() == 0.0);
  Tensor g = gram(Tensor(Shape{1, 1, 2, 2}, 1.0));
  r.check("Gram of constant-1 2x2 single channel is [[1]]", g.shape() == Shape{1, 1, 1, 1} && g.item() == 1.0);
  {
    Tensor feats = random_normal({1, 5, 4, 4}, rng);
    Tensor gm = gram(feats);
    SquareMatrix m(5);
    double asym = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        m(i, j) = gm.at(0, 0, i, j);
        asym = std::max(asym, std::fabs(gm.at(0, 0, i, j) - gm.at(0, 0, j, i)));
      }
    const auto e = symmetric_eigen(m);
    r.check("Gram matrices are symmetric PSD", asym == 0.0 && e.values.front() > -1e-12);
  }
  {
    Tensor zero(Shape{1, 1, 4, 4});
    r.within("hinge: D = 0 gives discriminator loss 2",
             std::fabs(hinge_discriminator_loss(zero, zero).item() - 2.0), 1e-15);
    r.check("hinge: D = 0 gives generator loss 0", hinge_generator_loss(zero).item() == 0.0);
    Tensor real = add_scalar(random_uniform({1, 1, 4, 4}, rng, 0, 1), 1.0);
    Tensor fake = add_scalar(random_uniform({1, 1, 4, 4}, rng, 0, 1), -2.0);
    r.check("hinge: satisfied margins give discriminator loss 0", hinge_discriminator_loss(real, fake).item() == 0.0);
  }
  {
    const LossReport rep = total_loss({0.5, 0.2, 0.3, 0.01}, LossWeights{});
    r.within("total_loss example: 3.05", std::fabs(rep.total - 3.05), 1e-12);
    r.check("total_loss of zeros is 0", total_loss({}, LossWeights{}).total == 0.0);
    bool rejected = false;
    try {
      LossWeights w;
      w.style = -1;
      total_loss({}, w);
    } catch (const std::invalid_argument&) {
      rejected = true;
    }
    r.check("negative loss weights rejected", rejected);
  }
  {
    const ParamList before = extractor.parameters();
    bool frozen = true;
    for (const auto& p : before.params) frozen = frozen && !p.tensor.requires_grad();
    r.check("extractor parameters never require gradients", frozen);
    PatchDiscriminator disc(3, 5);
    r.check("discriminator emits a spatial logit map", disc.forward(a).shape() == Shape{1, 1, 1, 1} &&
                                                           disc.forward(random_uniform({1, 3, 64, 64}, rng, -1, 1)).shape() ==
                                                               Shape{1, 1, 4, 4});
  }
}

void metric_suite(Reporter& r) {
  Rng rng(601);
  Tensor a = random_uniform({1, 3, 16, 16}, rng, 0, 1);
  r.check("psnr(a, a) is the identical sentinel", psnr(a, a) == kPsnrIdentical);
  r.within("psnr with uniform 0.1 offset is 20 dB", std::fabs(psnr(a, add_scalar(a, 0.1)) - 20.0), 1e-10);
  {
    Tensor b = add_scalar(a, 0.1), c = add_scalar(a, 0.2);
    r.check("psnr decreases with MSE", psnr(a, b) > psnr(a, c));
  }
  Tensor b = random_uniform(a.shape(), rng, 0, 1);
  r.within("ssim(a, a) = 1", std::fabs(ssim(a, a) - 1.0), 1e-12);
  r.within("ssim symmetric", std::fabs(ssim(a, b) - ssim(b, a)), 1e-12);
  const double s = ssim(a, b);
  r.check("ssim within [-1, 1]", s >= -1.0 && s <= 1.0);

  GaussianStats x;
  x.count = 10;
  x.mean = {0.5, -1.0, 2.0};
  x.covariance = SquareMatrix(3);
  const double cov[3][3] = {{2.0, 0.3, 0.1}, {0.3, 1.0, -0.2}, {0.1, -0.2, 0.5}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) x.covariance(i, j) = cov[i][j];
  r.within("frechet(A, A) = 0", frechet_distance(x, x), 1e-8);
  GaussianStats y = x;
  y.mean = {1.5, -1.0, 0.0};
  r.within("equal covariances: frechet = |d|^2", std::fabs(frechet_distance(x, y) - 5.0), 1e-8);
  GaussianStats z = x;
  z.covariance(0, 0) = 4.0;
  r.within("frechet symmetric", std::fabs(frechet_distance(x, z) - frechet_distance(z, x)), 1e-10);
  {
    const auto e = symmetric_eigen(x.covariance);
    double resid = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
        resid = std::max(resid, std::fabs(acc - x.covariance(i, j)));
      }
    r.within("eigendecomposition residual", resid, 1e-9);
  }
  {
    GaussianStats bad = x;
    bad.covariance(0, 1) = 0.9;
    bool rejected = false;
    try {
      frechet_distance(bad, x);
    } catch (const std::invalid_argument&) {
      rejected = true;
    }
    r.check("non-symmetric covariance rejected", rejected);
  }
}

const std::vector<Suite>& suites() {
  static const std::vector<Suite> all = {
      {"oracles", "randomized equivalence against brute-force oracles", oracle_suite},
      {"fft", "real FFT round trip, Parseval, DFT equivalence, adjoints", fft_suite},
      {"gradients", "finite-difference checks of every layer and block", gradient_suite},
      {"filtering", "predictive filtering semantics", filtering_suite},
      {"masks", "center and irregular mask protocol", mask_suite},
      {"shapes", "layer schedule audit against the architecture table", shape_suite},
      {"model", "network contracts", model_suite},
      {"losses", "loss examples and invariants", loss_suite},
      {"metrics", "PSNR, SSIM and Frechet examples", metric_suite},
  };
  return all;
}

}  // namespace dcf::verify
