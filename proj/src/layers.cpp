#include "dcf/layers.hpp"

#include <cmath>

namespace dcf {

std::size_t ParamList::param_count() const {
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  return total;
}

void ParamList::zero_grad() {
  for (auto& p : params) p.tensor.zero_grad();
}

void ParamList::set_requires_grad(bool on) {
  for (auto& p : params) p.tensor.set_requires_grad(on);
}

void init_he_normal(Tensor& t, int fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : t.data()) v = dist(rng);
}

ConvLayer::ConvLayer(const ConvSpec& spec, bool with_bias, Rng& rng) : spec_(spec) {
  weight_ = Tensor(spec.weight_shape());
  init_he_normal(weight_, spec.fan_in(), rng);
  weight_.set_requires_grad(true);
  if (with_bias) {
    bias_ = Tensor(Shape{1, spec.out_channels, 1, 1}, 0.0);
    bias_.set_requires_grad(true);
  }
}

Tensor ConvLayer::forward(const Tensor& x) const {
  return spec_.transpose ? conv_transpose2d(x, spec_, weight_, bias_)
                         : conv2d(x, spec_, weight_, bias_);
}

void ConvLayer::collect(const std::string& prefix, ParamList& out) const {
  out.add_param(prefix + ".weight", weight_);
  if (bias_.defined()) out.add_param(prefix + ".bias", bias_);
}

void BatchNorm2d::collect(const std::string& prefix, ParamList& out) const {
  out.add_param(prefix + ".gamma", params_.gamma);
  out.add_param(prefix + ".beta", params_.beta);
  out.add_buffer(prefix + ".running_mean", params_.running_mean);
  out.add_buffer(prefix + ".running_var", params_.running_var);
}

ConvBlock::ConvBlock(const ConvSpec& spec, bool norm, std::optional<Activation> act,
                     Rng& rng)
    : conv_(spec, /*with_bias=*/!norm, rng), norm_(norm), act_(act) {
  if (norm_) bn_ = BatchNorm2d(spec.out_channels);
}

Tensor ConvBlock::forward(const Tensor& x, Mode mode) {
  Tensor y = conv_.forward(x);
  if (norm_) y = bn_.forward(y, mode);
  if (act_) y = activation(y, *act_);
  return y;
}

void ConvBlock::collect(const std::string& prefix, ParamList& out) const {
  conv_.collect(prefix + ".conv", out);
  if (norm_) bn_.collect(prefix + ".bn", out);
}

}  // namespace dcf
