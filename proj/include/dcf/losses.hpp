#pragma once

#include <cstdint>
#include <vector>

#include "dcf/layers.hpp"

namespace dcf {

struct LossWeights {
  double l1 = 1.0;
  double adversarial = 0.1;
  double perceptual = 0.1;
  double style = 250.0;

  void validate() const;
};

struct LossComponents {
  double l1 = 0.0;
  double adversarial = 0.0;
  double perceptual = 0.0;
  double style = 0.0;
};

struct LossReport {
  double l1 = 0.0;
  double adversarial = 0.0;
  double perceptual = 0.0;
  double style = 0.0;
  double total = 0.0;
};

LossReport total_loss(const LossComponents& c, const LossWeights& w);

// Differentiable counterparts of LossComponents.
struct LossTerms {
  Tensor l1;
  Tensor adversarial;
  Tensor perceptual;
  Tensor style;

  LossComponents values() const;
};
// lambda_1 l1 + lambda_a adv + lambda_p perc + lambda_s style, as a taped scalar.
Tensor reconstruction_objective(const LossTerms& terms, const LossWeights& w);

// Four stride-2 conv + ReLU stages with seeded, frozen weights; stands in for
// a pretrained perceptual backbone.
class FixedFeatureExtractor {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5EEDF00DULL;
  static constexpr int kFeatureDim = 64;

  explicit FixedFeatureExtractor(std::uint64_t seed = kDefaultSeed);

  // Activations after each stage.
  std::vector<Tensor> features(const Tensor& image) const;
  ParamList parameters() const;

 private:
  std::vector<ConvLayer> stages_;
};

// Strided conv stack producing a spatial map of real/fake logits.
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(int in_channels, std::uint64_t seed);

  Tensor forward(const Tensor& image) const;
  ParamList parameters() const;

 private:
  std::vector<ConvLayer> layers_;
};

Tensor l1_loss(const Tensor& pred, const Tensor& target);
// Per-sample channel Gram matrix F F^T / (C H W), shape (N, 1, C, C).
Tensor gram(const Tensor& features);
Tensor perceptual_loss(const Tensor& pred, const Tensor& target,
                       const FixedFeatureExtractor& extractor);
Tensor style_loss(const Tensor& pred, const Tensor& target,
                  const FixedFeatureExtractor& extractor);

enum class AdversarialRole { kGenerator, kDiscriminator };

// Hinge losses on logit maps.
Tensor hinge_discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits);
Tensor hinge_generator_loss(const Tensor& fake_logits);
Tensor adversarial_loss(const PatchDiscriminator& disc, const Tensor& pred, const Tensor& target,
                        AdversarialRole role);

}  // namespace dcf
