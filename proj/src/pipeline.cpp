#include "dcf/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dcf/errors.hpp"
#include "dcf/image_io.hpp"

namespace dcf {

std::string to_string(MaskMode mode) {
  return mode == MaskMode::kCenter ? "center" : "irregular";
}

MaskMode parse_mask_mode(const std::string& text) {
  if (text == "center") return MaskMode::kCenter;
  if (text == "irregular") return MaskMode::kIrregular;
  throw std::invalid_argument("mask mode must be 'center' or 'irregular', got '" + text + "'");
}

// ---------------------------------------------------------------- config

TrainConfig TrainConfig::preset(const std::string& name) {
  TrainConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.resolution = 256;
    c.batch_size = 8;
    c.iterations = 500000;
    c.checkpoint_interval = 10000;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw std::invalid_argument(key + ": expected true/false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "resolution") resolution = parse_int(key, value);
  else if (key == "batch_size") batch_size = parse_int(key, value);
  else if (key == "iterations") iterations = parse_int(key, value);
  else if (key == "learning_rate") learning_rate = parse_double(key, value);
  else if (key == "beta1") beta1 = parse_double(key, value);
  else if (key == "beta2") beta2 = parse_double(key, value);
  else if (key == "epsilon") epsilon = parse_double(key, value);
  else if (key == "seed") {
    try {
      std::size_t used = 0;
      seed = std::stoull(value, &used, 0);
      if (used != value.size()) throw std::invalid_argument("");
    } catch (const std::logic_error&) {
      throw std::invalid_argument("seed: expected an unsigned integer, got '" + value + "'");
    }
  }
  else if (key == "lambda_l1") weights.l1 = parse_double(key, value);
  else if (key == "lambda_adv") weights.adversarial = parse_double(key, value);
  else if (key == "lambda_perc") weights.perceptual = parse_double(key, value);
  else if (key == "lambda_style") weights.style = parse_double(key, value);
  else if (key == "mask_mode") mask_mode = parse_mask_mode(value);
  else if (key == "adversarial") adversarial = parse_bool(key, value);
  else if (key == "grad_clip") grad_clip = parse_double(key, value);
  else if (key == "checkpoint_interval") checkpoint_interval = parse_int(key, value);
  else if (key == "checkpoint_path") checkpoint_path = value;
  else if (key == "curve_path") curve_path = value;
  else if (key == "data_dir") data_dir = value;
  else if (key == "synthetic_count") synthetic_count = parse_int(key, value);
  else if (key == "ffc_blocks") ffc_blocks = parse_int(key, value);
  else if (key == "enable_lfu") enable_lfu = parse_bool(key, value);
  else if (key == "image_filter") image_filter = parse_bool(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

void TrainConfig::apply(std::istream& in, const std::string& source) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(source + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw DataError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void TrainConfig::validate() const {
  model().validate();
  weights.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
  if (grad_clip < 0) throw std::invalid_argument("grad_clip must be >= 0");
  if (checkpoint_interval < 0) throw std::invalid_argument("checkpoint_interval must be >= 0");
  if (checkpoint_interval > 0 && checkpoint_path.empty()) {
    throw std::invalid_argument("checkpoint_interval needs checkpoint_path");
  }
  if (data_dir.empty() && synthetic_count < 1) {
    throw std::invalid_argument("synthetic_count must be >= 1 without data_dir");
  }
}

ModelConfig TrainConfig::model() const {
  ModelConfig m;
  m.resolution = resolution;
  m.ffc_blocks = ffc_blocks;
  m.enable_lfu = enable_lfu;
  m.image_filter = image_filter;
  return m;
}

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"resolution", std::to_string(resolution)},
      {"batch_size", std::to_string(batch_size)},
      {"iterations", std::to_string(iterations)},
      {"learning_rate", format_double(learning_rate)},
      {"beta1", format_double(beta1)},
      {"beta2", format_double(beta2)},
      {"epsilon", format_double(epsilon)},
      {"seed", std::to_string(seed)},
      {"lambda_l1", format_double(weights.l1)},
      {"lambda_adv", format_double(weights.adversarial)},
      {"lambda_perc", format_double(weights.perceptual)},
      {"lambda_style", format_double(weights.style)},
      {"mask_mode", to_string(mask_mode)},
      {"adversarial", b(adversarial)},
      {"grad_clip", format_double(grad_clip)},
      {"checkpoint_interval", std::to_string(checkpoint_interval)},
      {"checkpoint_path", checkpoint_path},
      {"curve_path", curve_path},
      {"data_dir", data_dir},
      {"synthetic_count", std::to_string(synthetic_count)},
      {"ffc_blocks", std::to_string(ffc_blocks)},
      {"enable_lfu", b(enable_lfu)},
      {"image_filter", b(image_filter)},
  };
}

std::string TrainConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::pair<std::string, std::string>> TrainConfig::documented_keys() {
  return {
      {"resolution", "square training resolution, power of two >= 8"},
      {"batch_size", "images per step"},
      {"iterations", "total generator steps"},
      {"learning_rate", "Adam step size (both networks)"},
      {"beta1", "Adam first-moment decay"},
      {"beta2", "Adam second-moment decay"},
      {"epsilon", "Adam denominator offset"},
      {"seed", "seed for initialisation, batches and masks"},
      {"lambda_l1", "weight of the L1 term"},
      {"lambda_adv", "weight of the adversarial term"},
      {"lambda_perc", "weight of the perceptual term"},
      {"lambda_style", "weight of the style term"},
      {"mask_mode", "center | irregular"},
      {"adversarial", "train a patch discriminator and use the hinge term"},
      {"grad_clip", "global gradient-norm clip, 0 = off"},
      {"checkpoint_interval", "steps between checkpoints, 0 = only at the end"},
      {"checkpoint_path", "checkpoint file written during and after training"},
      {"curve_path", "CSV loss curve (iteration,l1,adv,perc,style,total)"},
      {"data_dir", "directory of PNG/PPM images; empty = generated textures"},
      {"synthetic_count", "number of generated textures when data_dir is empty"},
      {"ffc_blocks", "number of FFC residual blocks"},
      {"enable_lfu", "use the local Fourier unit in spectral transforms"},
      {"image_filter", "extra pixel-level predictive filter on the output"},
  };
}

TrainConfig load_train_config(const std::filesystem::path& path, const std::string& preset) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open config");
  TrainConfig c = TrainConfig::preset(preset);
  c.apply(in, path.string());
  return c;
}

// ---------------------------------------------------------------- data

Tensor Dataset::batch(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  const Shape one = images.at(indices.front()).shape();
  Tensor out(Shape{static_cast<int>(indices.size()), one.c, one.h, one.w});
  const std::size_t per = one.numel();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& src = images.at(indices[i]);
    std::copy(src.ptr(), src.ptr() + per, out.ptr() + i * per);
  }
  return out;
}

Dataset Dataset::subset(std::size_t begin, std::size_t count) const {
  if (begin + count > size()) throw std::out_of_range("dataset subset out of range");
  Dataset d;
  d.names.assign(names.begin() + begin, names.begin() + begin + count);
  d.images.assign(images.begin() + begin, images.begin() + begin + count);
  return d;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") files.push_back(entry.path());
  }
  if (files.empty()) throw DataError(dir.string() + ": no PNG/PPM/PGM images");
  std::sort(files.begin(), files.end());
  Dataset d;
  for (const auto& f : files) {
    Tensor t = image_to_tensor(read_image(f));
    if (!d.images.empty() && t.shape() != d.images.front().shape()) {
      throw DataError(f.string() + ": size " + std::to_string(t.shape().w) + "x" +
                      std::to_string(t.shape().h) + " differs from " +
                      std::to_string(d.images.front().shape().w) + "x" +
                      std::to_string(d.images.front().shape().h));
    }
    d.names.push_back(f.filename().string());
    d.images.push_back(std::move(t));
  }
  return d;
}

Dataset synthetic_textures(int count, int resolution, std::uint64_t seed) {
  if (count < 1 || resolution < 1) throw std::invalid_argument("synthetic_textures: bad size");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> color(-1.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  Dataset d;
  for (int i = 0; i < count; ++i) {
    Tensor t(Shape{1, 3, resolution, resolution});
    double base[3], amp[3][3];
    for (double& b : base) b = 0.5 * color(rng);
    const int components = 2;
    double freq[2], angle[2], phase[2];
    for (int k = 0; k < components; ++k) {
      freq[k] = 1.0 + std::floor(unit(rng) * 6.0);
      angle[k] = unit(rng) * std::numbers::pi;
      phase[k] = unit(rng) * two_pi;
      for (int c = 0; c < 3; ++c) amp[k][c] = 0.4 * color(rng);
    }
    const int period = 4 << static_cast<int>(unit(rng) * 3.0);  // 4, 8 or 16 px
    for (int c = 0; c < 3; ++c) amp[2][c] = 0.25 * color(rng);
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) {
        const double u = static_cast<double>(x) / resolution, v = static_cast<double>(y) / resolution;
        double wave[2];
        for (int k = 0; k < components; ++k) {
          const double along = u * std::cos(angle[k]) + v * std::sin(angle[k]);
          wave[k] = std::sin(two_pi * freq[k] * along + phase[k]);
        }
        const double checker = ((x / period + y / period) % 2) ? 1.0 : -1.0;
        for (int c = 0; c < 3; ++c) {
          const double value = base[c] + amp[0][c] * wave[0] + amp[1][c] * wave[1] + amp[2][c] * checker;
          t.at(0, c, y, x) = std::clamp(value, -1.0, 1.0);
        }
      }
    }
    d.names.push_back("texture" + std::to_string(i));
    d.images.push_back(std::move(t));
  }
  return d;
}

// ---------------------------------------------------------------- optimisation

void Adam::step(const ParamList& params) {
  if (m_.empty()) {
    for (const auto& p : params.params) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (m_.size() != params.params.size()) throw std::logic_error("Adam: parameter list changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.params.size(); ++i) {
    Tensor p = params.params[i].tensor;
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != p.numel()) throw std::logic_error("Adam: parameter size changed");
    const auto g = p.grad();
    double* x = p.ptr();
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * gk * gk;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      x[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& p : params.params) {
      if (!p.tensor.has_grad()) continue;
      for (double& g : p.tensor.grad_mut()) g *= s;
    }
  }
  return norm;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "iteration,l1,adv,perc,style,total\n";
  out.precision(17);
  for (const auto& p : curve) {
    out << p.iteration << ',' << p.loss.l1 << ',' << p.loss.adversarial << ',' << p.loss.perceptual
        << ',' << p.loss.style << ',' << p.loss.total << '\n';
  }
}

// ---------------------------------------------------------------- training

namespace {

// Seeds for the auxiliary networks are derived from the run seed so one
// number fixes the whole run.
constexpr std::uint64_t kDiscriminatorSalt = 0xD15C0000ULL;
constexpr std::uint64_t kBatchSalt = 0xBA7C0000ULL;

}  // namespace

Trainer::Trainer(const TrainConfig& config, const Dataset& data)
    : config_(config),
      data_(&data),
      net_(DCFNetwork::build(config.model(), config.seed)),
      disc_(3, config.seed ^ kDiscriminatorSalt),
      adam_g_(config.learning_rate, config.beta1, config.beta2, config.epsilon),
      adam_d_(config.learning_rate, config.beta1, config.beta2, config.epsilon),
      rng_(config.seed ^ kBatchSalt) {
  config_.validate();
  if (data.size() == 0) throw DataError("training set is empty");
  const Shape s = data.images.front().shape();
  if (s.h != config.resolution || s.w != config.resolution) {
    throw DataError("training images are " + std::to_string(s.w) + "x" + std::to_string(s.h) +
                    " but resolution is " + std::to_string(config.resolution));
  }
}

LossReport Trainer::train_step() {
  std::uniform_int_distribution<std::size_t> pick(0, data_->size() - 1);
  std::vector<std::size_t> idx(config_.batch_size);
  for (auto& i : idx) i = pick(rng_);
  std::vector<MaskGrid> masks;
  for (int b = 0; b < config_.batch_size; ++b) {
    if (config_.mask_mode == MaskMode::kCenter) {
      masks.push_back(center_mask(config_.resolution, config_.resolution));
    } else {
      masks.push_back(irregular_mask(config_.resolution, config_.resolution, rng_()));
    }
  }
  return train_step(data_->batch(idx), mask_tensor(masks));
}

LossReport Trainer::train_step(const Tensor& images, const Tensor& masks) {
  ParamList gen = net_.parameters();
  ParamList disc = disc_.parameters();
  const Tensor input = apply_mask(images, masks);

  Tape tape;
  Tape::Recording guard(tape);
  ForwardResult out = net_.forward(input, masks, Mode::kTrain);
  LossTerms terms;
  terms.l1 = l1_loss(out.raw, images);
  terms.perceptual = perceptual_loss(out.raw, images, extractor_);
  terms.style = style_loss(out.raw, images, extractor_);

  if (config_.adversarial) {
    {
      Tape d_tape;
      Tape::Recording d_guard(d_tape);
      disc.zero_grad();
      Tensor d_loss = adversarial_loss(disc_, out.raw.detach(), images, AdversarialRole::kDiscriminator);
      d_tape.backward(d_loss);
      if (config_.grad_clip > 0) clip_grad_norm(disc, config_.grad_clip);
      adam_d_.step(disc);
    }
    terms.adversarial = adversarial_loss(disc_, out.raw, images, AdversarialRole::kGenerator);
  }

  Tensor objective = reconstruction_objective(terms, config_.weights);
  check_finite(objective, "training objective");
  gen.zero_grad();
  tape.backward(objective);
  disc.zero_grad();
  if (config_.grad_clip > 0) clip_grad_norm(gen, config_.grad_clip);
  adam_g_.step(gen);
  ++iteration_;
  return total_loss(terms.values(), config_.weights);
}

std::vector<CurvePoint> Trainer::train_loop(const std::function<void(const CurvePoint&)>& on_step) {
  std::vector<CurvePoint> curve;
  while (iteration_ < config_.iterations) {
    CurvePoint p;
    p.loss = train_step();
    p.iteration = iteration_;
    curve.push_back(p);
    if (on_step) on_step(p);
    if (config_.checkpoint_interval > 0 && iteration_ % config_.checkpoint_interval == 0) {
      save_checkpoint(config_.checkpoint_path);
    }
  }
  if (!config_.checkpoint_path.empty()) save_checkpoint(config_.checkpoint_path);
  if (!config_.curve_path.empty()) {
    std::ofstream csv(config_.curve_path);
    if (!csv) throw DataError(config_.curve_path + ": cannot write loss curve");
    write_curve_csv(csv, curve);
  }
  return curve;
}

// ---------------------------------------------------------------- evaluation

std::vector<std::pair<std::string, double>> EvalReport::records() const {
  return {{"psnr_hole", psnr_hole},
          {"psnr_full", psnr_full},
          {"ssim_hole", ssim_hole},
          {"ssim_full", ssim_full},
          {"frechet", frechet},
          {"psnr_hole_gray_fill", psnr_hole_gray_fill},
          {"psnr_hole_mean_fill", psnr_hole_mean_fill},
          {"samples", static_cast<double>(samples)}};
}

Tensor mean_fill(const Tensor& image, const Tensor& mask) {
  const Shape& s = image.shape();
  Tensor out = image.clone();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      std::size_t known = 0;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          if (mask.at(n, 0, y, x) != 0.0) {
            acc += image.at(n, c, y, x);
            ++known;
          }
        }
      }
      const double fill = known ? acc / static_cast<double>(known) : 0.0;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          if (mask.at(n, 0, y, x) == 0.0) out.at(n, c, y, x) = fill;
        }
      }
    }
  }
  return out;
}

int worker_threads(int fallback) {
  if (const char* env = std::getenv("DCF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1, fallback);
}

namespace {

struct SampleScores {
  double psnr_hole = 0, psnr_full = 0, ssim_hole = 0, ssim_full = 0, gray = 0, mean = 0;
  std::vector<double> output_features, truth_features;
};

double capped(double psnr_value) { return std::min(psnr_value, kPsnrCap); }

constexpr double kPeak = 2.0;

}  // namespace

EvalReport evaluate(DCFNetwork& net, const Dataset& data, MaskMode mode,
                    const std::vector<std::uint64_t>& seeds, int threads) {
  if (data.size() == 0) throw DataError("evaluation set is empty");
  if (seeds.empty()) throw std::invalid_argument("evaluate: need at least one mask seed");
  const FixedFeatureExtractor extractor;
  const std::size_t total = data.size() * seeds.size();
  std::vector<SampleScores> scores(total);

  auto run = [&](std::size_t k) {
    const Tensor& truth = data.images[k / seeds.size()];
    const int h = truth.shape().h, w = truth.shape().w;
    const MaskGrid grid = mode == MaskMode::kCenter ? center_mask(h, w)
                                                    : irregular_mask(h, w, seeds[k % seeds.size()]);
    const Tensor mask = mask_tensor(std::span<const MaskGrid>(&grid, 1));
    const Tensor input = apply_mask(truth, mask);
    const Tensor out = net.forward(input, mask, Mode::kEval).composited;
    SampleScores& s = scores[k];
    s.psnr_hole = capped(psnr_masked(out, truth, mask, kPeak));
    s.psnr_full = capped(psnr(out, truth, kPeak));
    s.ssim_hole = ssim_masked(out, truth, mask, kPeak);
    s.ssim_full = ssim(out, truth, kPeak);
    s.gray = capped(psnr_masked(input, truth, mask, kPeak));
    s.mean = capped(psnr_masked(mean_fill(truth, mask), truth, mask, kPeak));
    s.output_features = pooled_features(out, extractor).front();
    s.truth_features = pooled_features(truth, extractor).front();
  };

  const int workers = std::clamp<int>(threads, 1, static_cast<int>(total));
  if (workers == 1) {
    for (std::size_t k = 0; k < total; ++k) run(k);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t]() {
        try {
          for (std::size_t k = t; k < total; k += workers) run(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Reduce in sample order so the result does not depend on the thread count.
  EvalReport r;
  r.samples = static_cast<int>(total);
  std::vector<std::vector<double>> out_feats, truth_feats;
  std::size_t ssim_hole_count = 0;
  for (const auto& s : scores) {
    r.psnr_hole += s.psnr_hole;
    r.psnr_full += s.psnr_full;
    if (!std::isnan(s.ssim_hole)) {
      r.ssim_hole += s.ssim_hole;
      ++ssim_hole_count;
    }
    r.ssim_full += s.ssim_full;
    r.psnr_hole_gray_fill += s.gray;
    r.psnr_hole_mean_fill += s.mean;
    out_feats.push_back(s.output_features);
    truth_feats.push_back(s.truth_features);
  }
  const double n = static_cast<double>(total);
  r.psnr_hole /= n;
  r.psnr_full /= n;
  r.ssim_hole = ssim_hole_count ? r.ssim_hole / static_cast<double>(ssim_hole_count) : std::nan("");
  r.ssim_full /= n;
  r.psnr_hole_gray_fill /= n;
  r.psnr_hole_mean_fill /= n;
  if (total >= 2) {
    r.frechet = frechet_distance(gaussian_stats(out_feats), gaussian_stats(truth_feats));
  }
  return r;
}

}  // namespace dcf
