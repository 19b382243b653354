#include "dcf/losses.hpp"

#include <stdexcept>

#include "dcf/errors.hpp"
#include "linalg.hpp"

namespace dcf {

using detail::ConstMatMap;
using detail::MatMap;

void LossWeights::validate() const {
  if (l1 < 0 || adversarial < 0 || perceptual < 0 || style < 0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

LossReport total_loss(const LossComponents& c, const LossWeights& w) {
  w.validate();
  LossReport r{c.l1, c.adversarial, c.perceptual, c.style, 0.0};
  r.total = w.l1 * c.l1 + w.adversarial * c.adversarial + w.perceptual * c.perceptual +
            w.style * c.style;
  return r;
}

LossComponents LossTerms::values() const {
  auto value = [](const Tensor& t) { return t.defined() ? t.item() : 0.0; };
  return {value(l1), value(adversarial), value(perceptual), value(style)};
}

Tensor reconstruction_objective(const LossTerms& terms, const LossWeights& w) {
  w.validate();
  auto term = [](const Tensor& t) { return t.defined() ? t : Tensor::scalar(0.0); };
  return weighted_sum({{w.l1, term(terms.l1)},
                       {w.adversarial, term(terms.adversarial)},
                       {w.perceptual, term(terms.perceptual)},
                       {w.style, term(terms.style)}});
}

FixedFeatureExtractor::FixedFeatureExtractor(std::uint64_t seed) {
  Rng rng(seed);
  const int widths[] = {3, 16, 32, 64, kFeatureDim};
  for (int i = 0; i < 4; ++i) {
    ConvLayer layer(ConvSpec::conv(4, widths[i], widths[i + 1], 2, Padding::uniform(1)),
                    /*with_bias=*/false, rng);
    layer.weight().set_requires_grad(false);
    stages_.push_back(std::move(layer));
  }
}

std::vector<Tensor> FixedFeatureExtractor::features(const Tensor& image) const {
  std::vector<Tensor> taps;
  Tensor x = image;
  for (const auto& stage : stages_) {
    x = relu(stage.forward(x));
    taps.push_back(x);
  }
  return taps;
}

ParamList FixedFeatureExtractor::parameters() const {
  ParamList p;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    stages_[i].collect("extractor" + std::to_string(i), p);
  }
  return p;
}

PatchDiscriminator::PatchDiscriminator(int in_channels, std::uint64_t seed) {
  Rng rng(seed);
  const int widths[] = {in_channels, 32, 64, 128, 1};
  for (int i = 0; i < 4; ++i) {
    layers_.emplace_back(ConvSpec::conv(4, widths[i], widths[i + 1], 2, Padding::uniform(1)),
                         /*with_bias=*/true, rng);
  }
}

Tensor PatchDiscriminator::forward(const Tensor& image) const {
  Tensor x = image;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(x);
    if (i + 1 < layers_.size()) x = activation(x, Activation::kLeakyRelu);
  }
  return x;
}

ParamList PatchDiscriminator::parameters() const {
  ParamList p;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect("disc" + std::to_string(i), p);
  }
  return p;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  return mean(abs(sub(pred, target)));
}

Tensor gram(const Tensor& features) {
  const Shape& s = features.shape();
  const int c = s.c;
  const int p = static_cast<int>(s.plane());
  const double norm = 1.0 / (static_cast<double>(c) * p);
  Tensor out(Shape{s.n, 1, c, c});
  for (int n = 0; n < s.n; ++n) {
    ConstMatMap f(features.ptr() + static_cast<std::size_t>(n) * c * p, c, p);
    MatMap g(out.ptr() + static_cast<std::size_t>(n) * c * c, c, c);
    g.noalias() = norm * (f * f.transpose());
    // GEMM blocking can round the two triangles differently; mirror one.
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  }
  if (needs_grad({&features})) {
    out.set_requires_grad(true);
    Tape::active()->record("gram", [features, out, c, p, norm]() mutable {
      if (!out.has_grad()) return;
      for (int n = 0; n < features.shape().n; ++n) {
        ConstMatMap g(out.grad().data() + static_cast<std::size_t>(n) * c * c, c, c);
        ConstMatMap f(features.ptr() + static_cast<std::size_t>(n) * c * p, c, p);
        MatMap(features.grad_mut().data() + static_cast<std::size_t>(n) * c * p, c, p)
            .noalias() += norm * ((g + g.transpose()) * f);
      }
    });
  }
  return out;
}

namespace {

void expect_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": prediction " + a.shape().str() +
                     " and target " + b.shape().str() + " differ");
  }
}

}  // namespace

Tensor perceptual_loss(const Tensor& pred, const Tensor& target,
                       const FixedFeatureExtractor& extractor) {
  expect_same_shape(pred, target, "perceptual_loss");
  auto fp = extractor.features(pred);
  auto ft = extractor.features(target);
  Tensor total = l1_loss(fp[0], ft[0]);
  for (std::size_t s = 1; s < fp.size(); ++s) total = add(total, l1_loss(fp[s], ft[s]));
  return total;
}

Tensor style_loss(const Tensor& pred, const Tensor& target,
                  const FixedFeatureExtractor& extractor) {
  expect_same_shape(pred, target, "style_loss");
  auto fp = extractor.features(pred);
  auto ft = extractor.features(target);
  Tensor total = l1_loss(gram(fp[0]), gram(ft[0]));
  for (std::size_t s = 1; s < fp.size(); ++s) {
    total = add(total, l1_loss(gram(fp[s]), gram(ft[s])));
  }
  return total;
}

Tensor hinge_discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits) {
  Tensor real_term = mean(relu(add_scalar(scale(real_logits, -1.0), 1.0)));
  Tensor fake_term = mean(relu(add_scalar(fake_logits, 1.0)));
  return add(real_term, fake_term);
}

Tensor hinge_generator_loss(const Tensor& fake_logits) {
  return scale(mean(fake_logits), -1.0);
}

Tensor adversarial_loss(const PatchDiscriminator& disc, const Tensor& pred, const Tensor& target,
                        AdversarialRole role) {
  expect_same_shape(pred, target, "adversarial_loss");
  if (role == AdversarialRole::kGenerator) return hinge_generator_loss(disc.forward(pred));
  return hinge_discriminator_loss(disc.forward(target), disc.forward(pred));
}

}  // namespace dcf
