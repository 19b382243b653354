#include <algorithm>
#include <map>

#include "dcf/ffc.hpp"
#include "dcf/filtering.hpp"
#include "dcf/losses.hpp"
#include "dcf/masks.hpp"
#include "dcf/model.hpp"
#include "dcf/spectral.hpp"
#include "suites.hpp"

namespace dcf::verify {

namespace {

void report(Reporter& r, const std::string& name, const GradCheck& g, double tol = kGradTolerance) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "max rel err %.3g over %zu coords (tol %.0e); worst %s",
                g.max_rel_error, g.coordinates, tol, g.worst.c_str());
  r.check(name, g.max_rel_error < tol, buf);
}

void conv_checks(Reporter& r) {
  Rng rng(101);
  struct Case {
    const char* name;
    ConvSpec spec;
    Shape input;
  };
  const Case cases[] = {
      {"conv2d 3x3 pad 1 on 1x2x6x6", ConvSpec::conv(3, 2, 3, 1, Padding::uniform(1)), {1, 2, 6, 6}},
      {"conv2d 4x4 stride 2 pad (1,2,0,1)", ConvSpec::conv(4, 2, 3, 2, {1, 2, 0, 1}), {2, 2, 7, 6}},
      {"conv2d 4x4 same-size pad (1,2,1,2)", ConvSpec::conv(4, 3, 2, 1, {1, 2, 1, 2}), {1, 3, 5, 5}},
      {"conv2d 1x1", ConvSpec::conv(1, 3, 2), {1, 3, 4, 4}},
  };
  for (const auto& c : cases) {
    Tensor x = random_normal(c.input, rng);
    Tensor w = random_normal(c.spec.weight_shape(), rng);
    Tensor b = random_normal({1, c.spec.out_channels, 1, 1}, rng);
    report(r, c.name, finite_diff_check([&] { return random_projection(conv2d(x, c.spec, w, b), 7); },
                                        {{"x", x}, {"weight", w}, {"bias", b}}));
  }
}

void conv_transpose_checks(Reporter& r) {
  Rng rng(102);
  struct Case {
    const char* name;
    ConvSpec spec;
    Shape input;
  };
  const Case cases[] = {
      {"conv_transpose2d 4x4 stride 2 pad 1", ConvSpec::conv_transpose(4, 3, 2, 2, Padding::uniform(1)), {1, 3, 4, 4}},
      {"conv_transpose2d 7x7 stride 2 pad 3 out-pad 1",
       ConvSpec::conv_transpose(7, 2, 2, 2, Padding::uniform(3), 1), {1, 2, 4, 4}},
      {"conv_transpose2d 4x4 same-size crop (1,2,1,2)", ConvSpec::conv_transpose(4, 2, 3, 1, {1, 2, 1, 2}), {2, 2, 5, 5}},
      {"conv_transpose2d 1x1", ConvSpec::conv_transpose(1, 3, 3), {1, 3, 4, 4}},
  };
  for (const auto& c : cases) {
    Tensor x = random_normal(c.input, rng);
    Tensor w = random_normal(c.spec.weight_shape(), rng);
    Tensor b = random_normal({1, c.spec.out_channels, 1, 1}, rng);
    report(r, c.name,
           finite_diff_check([&] { return random_projection(conv_transpose2d(x, c.spec, w, b), 8); },
                             {{"x", x}, {"weight", w}, {"bias", b}}));
  }
}

void pool_activation_checks(Reporter& r) {
  Rng rng(103);
  Tensor x = random_normal({1, 2, 6, 4}, rng);
  report(r, "avg_pool2", finite_diff_check([&] { return random_projection(avg_pool2(x), 9); }, {{"x", x}}));
  const std::pair<const char*, Activation> acts[] = {
      {"relu", Activation::kRelu}, {"leaky relu", Activation::kLeakyRelu}, {"tanh", Activation::kTanh}};
  for (const auto& [name, kind] : acts) {
    Tensor a = random_normal({1, 2, 4, 4}, rng);
    report(r, name, finite_diff_check([&, kind = kind] { return random_projection(activation(a, kind), 10); }, {{"x", a}}));
  }
}

void batch_norm_checks(Reporter& r) {
  Rng rng(104);
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    BatchNormParams p = BatchNormParams::identity(3);
    p.gamma = random_uniform({1, 3, 1, 1}, rng, 0.5, 1.5);
    p.beta = random_normal({1, 3, 1, 1}, rng);
    p.running_mean = random_normal({1, 3, 1, 1}, rng);
    p.running_var = random_uniform({1, 3, 1, 1}, rng, 0.5, 2.0);
    Tensor x = random_normal({2, 3, 4, 4}, rng);
    // Train mode refreshes the running statistics on every call; the
    // output itself only depends on the batch.
    report(r, mode == Mode::kTrain ? "batch_norm train" : "batch_norm eval",
           finite_diff_check([&] { return random_projection(batch_norm(x, p, mode), 11); },
                             {{"x", x}, {"gamma", p.gamma}, {"beta", p.beta}}));
  }
}

void plumbing_checks(Reporter& r) {
  Rng rng(105);
  Tensor a = random_normal({2, 2, 4, 4}, rng), b = random_normal({2, 3, 4, 4}, rng);
  report(r, "concat_channels",
         finite_diff_check([&] { return random_projection(concat_channels(a, b), 12); }, {{"a", a}, {"b", b}}));
  report(r, "slice_channels",
         finite_diff_check([&] { return random_projection(slice_channels(b, 1, 2), 13); }, {{"x", b}}));
  Tensor c = random_normal({2, 2, 4, 4}, rng);
  Tensor mask(Shape{2, 1, 4, 4});
  for (double& v : mask.data()) v = std::uniform_int_distribution<int>(0, 1)(rng);
  report(r, "blend", finite_diff_check([&] { return random_projection(blend(a, c, mask), 14); }, {{"a", a}, {"b", c}}));
  report(r, "quadrant_stack",
         finite_diff_check([&] { return random_projection(quadrant_stack(a), 15); }, {{"x", a}}));
  report(r, "tile2x2", finite_diff_check([&] { return random_projection(tile2x2(a), 16); }, {{"x", a}}));
  report(r, "mul/scale/add_scalar",
         finite_diff_check([&] { return random_projection(add_scalar(scale(mul(a, c), 0.7), 0.3), 17); },
                           {{"a", a}, {"b", c}}));
  report(r, "abs/mean", finite_diff_check([&] { return mean(abs(a)); }, {{"x", a}}));
}

void spectral_checks(Reporter& r) {
  Rng rng(106);
  for (Shape s : {Shape{1, 2, 8, 8}, Shape{2, 1, 4, 8}, Shape{1, 1, 16, 2}}) {
    Tensor x = random_normal(s, rng);
    report(r, "rfft2 " + s.str(),
           finite_diff_check([&] { return random_projection(spectrum_to_channels(rfft2(x)), 18); }, {{"x", x}}));
    SpectrumTensor spec(random_normal({s.n, s.c, s.h, 2 * half_width(s.w)}, rng), s.w);
    Tensor v = spec.values();
    report(r, "irfft2 " + s.str(),
           finite_diff_check([&] { return random_projection(irfft2(SpectrumTensor(v, s.w), s.h, s.w), 19); },
                             {{"spectrum", v}}));
  }
  // sum of the real parts only
  Tensor x = random_normal({1, 1, 8, 8}, rng);
  Tensor real_mask(Shape{1, 1, 8, 2 * half_width(8)});
  for (int u = 0; u < 8; ++u)
    for (int k = 0; k < half_width(8); ++k) real_mask.at(0, 0, u, 2 * k) = 1.0;
  report(r, "sum(rfft2(x).real)",
         finite_diff_check([&] { return sum(mul(rfft2(x).values(), real_mask)); }, {{"x", x}}));
}

void fourier_unit_checks(Reporter& r) {
  Rng rng(107);
  FourierUnit fu(4, rng);
  Tensor x = random_normal({1, 4, 8, 8}, rng);
  ParamList p;
  fu.collect("fu", p);
  auto inputs = inputs_from(p);
  inputs.push_back({"x", x});
  report(r, "fourier_unit 1x4x8x8",
         finite_diff_check([&] { return random_projection(fu.forward(x, Mode::kTrain), 20); }, inputs));
}

void spectral_transform_checks(Reporter& r) {
  for (bool lfu : {true, false}) {
    Rng rng(108);
    SpectralTransform st(8, 8, lfu, rng);
    Tensor x = random_normal({1, 8, 8, 8}, rng);
    ParamList p;
    st.collect("st", p);
    auto inputs = inputs_from(p);
    inputs.push_back({"x", x});
    report(r, std::string("spectral_transform 1x8x8x8") + (lfu ? "" : " without LFU"),
           finite_diff_check([&] { return random_projection(st.forward(x, Mode::kTrain), 21); }, inputs));
  }
}

void ffc_layer_checks(Reporter& r) {
  Rng rng(109);
  FFCConfig cfg{16, 0.5, true};
  FFCLayer layer(cfg, rng);
  Tensor xl = random_normal({1, 8, 8, 8}, rng), xg = random_normal({1, 8, 8, 8}, rng);
  ParamList p;
  layer.collect("ffc", p);
  auto inputs = inputs_from(p);
  inputs.push_back({"x_local", xl});
  inputs.push_back({"x_global", xg});
  report(r, "ffc_layer 8+8 channels 8x8", finite_diff_check([&] {
           auto [yl, yg] = layer.forward(xl, xg, Mode::kTrain);
           return add(random_projection(yl, 22), random_projection(yg, 23));
         }, inputs));
}

void ffc_res_checks(Reporter& r) {
  Rng rng(110);
  FFCResBlock block(FFCConfig{16, 0.5, true}, rng);
  Tensor x = random_normal({2, 16, 8, 8}, rng);
  ParamList p;
  block.collect("res", p);
  auto inputs = inputs_from(p);
  inputs.push_back({"x", x});
  report(r, "ffc_res_block 2x16x8x8",
         finite_diff_check([&] { return random_projection(block.forward(x, Mode::kTrain), 24); }, inputs));
}

void filtering_checks(Reporter& r) {
  Rng rng(111);
  for (int side : {3, 5}) {
    Tensor f = random_normal({1, 2, 5, 5}, rng);
    Tensor logits = random_normal({1, side * side, 5, 5}, rng);
    report(r, "apply_filter(normalize_kernels) N=" + std::to_string(side),
           finite_diff_check([&] {
             return random_projection(apply_filter(f, normalize_kernels(KernelField(logits, side, false))), 25);
           }, {{"f", f}, {"logits", logits}}));
  }
  // The explicit adjoint against central differences of <cot, apply_filter(f, T)>.
  Tensor f = random_normal({1, 2, 5, 5}, rng);
  KernelField t = normalize_kernels(KernelField(random_normal({1, 9, 5, 5}, rng), 3, false));
  Tensor w = t.weights().detach();
  Tensor cot = random_normal(f.shape(), rng);
  auto [grad_f, grad_t] = apply_filter_backward(cot, f, KernelField(w, 3, true));
  auto objective = [&] {
    Tensor out = apply_filter(f, KernelField(w, 3, true));
    double acc = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) acc += out.ptr()[i] * cot.ptr()[i];
    return acc;
  };
  const double h = 1e-5;
  double worst = 0.0;
  for (auto [src, grad] : {std::pair{f, grad_f}, std::pair{w, grad_t}}) {
    Tensor x = src;
    double scale = 0.0;
    for (double g : grad.data()) scale = std::max(scale, std::fabs(g));
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double saved = x.ptr()[i];
      x.ptr()[i] = saved + h;
      const double plus = objective();
      x.ptr()[i] = saved - h;
      const double minus = objective();
      x.ptr()[i] = saved;
      const double fd = (plus - minus) / (2 * h), ad = grad.ptr()[i];
      worst = std::max(worst, grad_rel_error(ad, fd, grad_floor(scale)));
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max rel err %.3g (tol %.0e)", worst, kGradTolerance);
  r.check("apply_filter_backward 1x2x5x5", worst < kGradTolerance, buf);
}

void loss_checks(Reporter& r) {
  Rng rng(112);
  const FixedFeatureExtractor extractor;
  PatchDiscriminator disc(3, 113);
  Tensor pred = random_uniform({1, 3, 16, 16}, rng, -1, 1);
  Tensor target = random_uniform({1, 3, 16, 16}, rng, -1, 1);
  report(r, "l1_loss", finite_diff_check([&] { return l1_loss(pred, target); }, {{"pred", pred}}));
  report(r, "perceptual_loss",
         finite_diff_check([&] { return perceptual_loss(pred, target, extractor); }, {{"pred", pred}}));
  report(r, "style_loss", finite_diff_check([&] { return style_loss(pred, target, extractor); }, {{"pred", pred}}));
  Tensor feats = random_normal({2, 3, 4, 4}, rng);
  report(r, "gram", finite_diff_check([&] { return random_projection(gram(feats), 26); }, {{"features", feats}}));

  auto disc_inputs = inputs_from(disc.parameters());
  auto gen_inputs = disc_inputs;
  gen_inputs.push_back({"pred", pred});
  report(r, "adversarial_loss generator",
         finite_diff_check([&] { return adversarial_loss(disc, pred, target, AdversarialRole::kGenerator); },
                           gen_inputs, 1e-5, 48, 1));
  report(r, "adversarial_loss discriminator",
         finite_diff_check([&] { return adversarial_loss(disc, pred, target, AdversarialRole::kDiscriminator); },
                           gen_inputs, 1e-5, 48, 2));
  Tensor real_logits = random_normal({2, 1, 3, 3}, rng), fake_logits = random_normal({2, 1, 3, 3}, rng);
  report(r, "hinge losses", finite_diff_check([&] {
           return add(hinge_discriminator_loss(real_logits, fake_logits), hinge_generator_loss(fake_logits));
         }, {{"real", real_logits}, {"fake", fake_logits}}));
  report(r, "reconstruction objective", finite_diff_check([&] {
           LossTerms t;
           t.l1 = l1_loss(pred, target);
           t.adversarial = adversarial_loss(disc, pred, target, AdversarialRole::kGenerator);
           t.perceptual = perceptual_loss(pred, target, extractor);
           t.style = style_loss(pred, target, extractor);
           return reconstruction_objective(t, LossWeights{});
         }, {{"pred", pred}}));
}

void network_checks(Reporter& r) {
  ModelConfig cfg;
  cfg.resolution = 16;
  DCFNetwork net = DCFNetwork::build(cfg, 114);
  Rng rng(115);
  Tensor image = random_uniform({1, 3, 16, 16}, rng, -1, 1);
  Tensor mask(Shape{1, 1, 16, 16}, 1.0);
  for (int y = 4; y < 12; ++y)
    for (int x = 4; x < 12; ++x) mask.at(0, 0, y, x) = 0.0;
  Tensor input = apply_mask(image, mask);

  // Eight coordinates drawn uniformly over all parameter entries.
  const ParamList params = net.parameters();
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  std::uniform_int_distribution<std::size_t> pick(0, params.param_count() - 1);
  while (picks.size() < 8) {
    std::size_t flat = pick(rng);
    for (std::size_t i = 0; i < params.params.size(); ++i) {
      const std::size_t n = params.params[i].tensor.numel();
      if (flat < n) {
        picks.emplace_back(i, flat);
        break;
      }
      flat -= n;
    }
  }
  auto loss = [&] { return random_projection(net.forward(input, mask, Mode::kTrain).raw, 27); };
  {
    Tape tape;
    Tape::Recording guard(tape);
    for (const auto& p : params.params) Tensor(p.tensor).zero_grad();
    tape.backward(loss());
  }
  const double h = 1e-5;
  double worst = 0.0;
  std::string where;
  for (auto [i, k] : picks) {
    Tensor t = params.params[i].tensor;
    const double ad = t.grad().empty() ? 0.0 : t.grad()[k];
    const double saved = t.ptr()[k];
    t.ptr()[k] = saved + h;
    const double plus = loss().item();
    t.ptr()[k] = saved - h;
    const double minus = loss().item();
    t.ptr()[k] = saved;
    const double fd = (plus - minus) / (2 * h);
    const double err = grad_rel_error(ad, fd, 1e-8);
    if (where.empty() || err > worst) {
      worst = err;
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s[%zu] ad=%.10g fd=%.10g", params.params[i].name.c_str(), k, ad, fd);
      where = buf;
    }
  }
  GradCheck g{worst, picks.size(), where};
  report(r, "full network R=16, 8 parameters", g, kNetworkGradTolerance);
}

const std::map<std::string, void (*)(Reporter&)>& registry() {
  static const std::map<std::string, void (*)(Reporter&)> modules = {
      {"conv", conv_checks},
      {"conv_transpose", conv_transpose_checks},
      {"pool_activation", pool_activation_checks},
      {"batch_norm", batch_norm_checks},
      {"plumbing", plumbing_checks},
      {"spectral", spectral_checks},
      {"fourier_unit", fourier_unit_checks},
      {"spectral_transform", spectral_transform_checks},
      {"ffc_layer", ffc_layer_checks},
      {"ffc_res", ffc_res_checks},
      {"filtering", filtering_checks},
      {"losses", loss_checks},
      {"network", network_checks},
  };
  return modules;
}

}  // namespace

std::vector<std::string> gradient_modules() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

std::vector<CheckResult> run_gradient_checks(const std::string& module) {
  Reporter r("gradients");
  if (module == "all") {
    for (const auto& [name, fn] : registry()) fn(r);
  } else {
    auto it = registry().find(module);
    if (it == registry().end()) throw std::invalid_argument("unknown gradient module '" + module + "'");
    it->second(r);
  }
  return r.results();
}

void gradient_suite(Reporter& r) {
  for (const auto& [name, fn] : registry()) fn(r);
}

}  // namespace dcf::verify
