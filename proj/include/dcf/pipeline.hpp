#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dcf/losses.hpp"
#include "dcf/masks.hpp"
#include "dcf/metrics.hpp"
#include "dcf/model.hpp"

namespace dcf {

enum class MaskMode { kCenter, kIrregular };

std::string to_string(MaskMode mode);
MaskMode parse_mask_mode(const std::string& text);

struct TrainConfig {
  int resolution = 64;
  int batch_size = 4;
  int iterations = 2000;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  LossWeights weights;
  MaskMode mask_mode = MaskMode::kIrregular;
  bool adversarial = true;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  // 0 disables periodic checkpoints.
  int checkpoint_interval = 0;
  std::string checkpoint_path;
  std::string curve_path;
  // Image directory; empty means generated textures.
  std::string data_dir;
  int synthetic_count = 32;
  // Architecture knobs.
  int ffc_blocks = 6;
  bool enable_lfu = true;
  bool image_filter = false;

  static TrainConfig preset(const std::string& name);  // "desk" or "paper"
  // Overrides fields from "key = value" lines; '#' starts a comment.
  void apply(std::istream& in, const std::string& source = "config");
  void set(const std::string& key, const std::string& value);
  void validate() const;

  ModelConfig model() const;
  // Every key with its current value, in a stable order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string serialize() const;
  // Key names with one-line descriptions, for --help.
  static std::vector<std::pair<std::string, std::string>> documented_keys();
};

TrainConfig load_train_config(const std::filesystem::path& path, const std::string& preset = "desk");

// Images in [-1, 1], each (1, 3, H, W), all the same size.
struct Dataset {
  std::vector<std::string> names;
  std::vector<Tensor> images;

  std::size_t size() const { return images.size(); }
  // Stack the given entries into one (k, 3, H, W) batch.
  Tensor batch(const std::vector<std::size_t>& indices) const;
  Dataset subset(std::size_t begin, std::size_t count) const;
};

// Reads every .png/.ppm/.pgm file, sorted by filename.
Dataset load_dataset(const std::filesystem::path& dir);

// Deterministic procedural textures: sums of oriented sinusoids and
// checkerboards with random colors.
Dataset synthetic_textures(int count, int resolution, std::uint64_t seed);

// Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Updates every param in place from its gradient (missing gradient = 0).
  void step(const ParamList& params);
  std::int64_t steps() const { return t_; }

  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const ParamList& params, double max_norm);

struct CurvePoint {
  std::int64_t iteration = 0;
  LossReport loss;
};

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

class Trainer {
 public:
  Trainer(const TrainConfig& config, const Dataset& data);

  // One generator update (preceded by a discriminator update when the
  // adversarial term is on) on a randomly drawn batch.
  LossReport train_step();
  // Same, on caller-provided images and masks.
  LossReport train_step(const Tensor& images, const Tensor& masks);
  // Runs until config.iterations steps have been taken in total.
  std::vector<CurvePoint> train_loop(const std::function<void(const CurvePoint&)>& on_step = {});

  void save_checkpoint(const std::filesystem::path& path) const;
  // Restores parameters, buffers, optimizer state, iteration and RNG.
  // The stored architecture must match this trainer's.
  void load_checkpoint(const std::filesystem::path& path);

  DCFNetwork& network() { return net_; }
  PatchDiscriminator& discriminator() { return disc_; }
  const FixedFeatureExtractor& extractor() const { return extractor_; }
  const TrainConfig& config() const { return config_; }
  Adam& generator_optimizer() { return adam_g_; }
  Adam& discriminator_optimizer() { return adam_d_; }
  std::int64_t iteration() const { return iteration_; }
  Rng& rng() { return rng_; }

 private:
  TrainConfig config_;
  const Dataset* data_;
  DCFNetwork net_;
  PatchDiscriminator disc_;
  FixedFeatureExtractor extractor_;
  Adam adam_g_, adam_d_;
  Rng rng_;
  std::int64_t iteration_ = 0;
};

// Network (and the config it was trained with) restored from a checkpoint.
struct LoadedModel {
  TrainConfig config;
  DCFNetwork network;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

struct EvalReport {
  double psnr_hole = 0.0;
  double psnr_full = 0.0;
  double ssim_hole = 0.0;
  double ssim_full = 0.0;
  // Fréchet distance between fixed-extractor features of composited outputs
  // and of the ground truth; only comparable between runs of this tool.
  double frechet = 0.0;
  // Hole PSNR of trivial fills, for reference.
  double psnr_hole_gray_fill = 0.0;
  double psnr_hole_mean_fill = 0.0;
  int samples = 0;

  std::vector<std::pair<std::string, double>> records() const;
};

// PSNR values above this are reported as this (identical images).
inline constexpr double kPsnrCap = 100.0;

// Evaluates every image under each mask seed (center mode ignores seeds but
// still uses one pass per seed). Images are in [-1, 1]; metrics use peak 2.
EvalReport evaluate(DCFNetwork& net, const Dataset& data, MaskMode mode,
                    const std::vector<std::uint64_t>& seeds, int threads = 1);

// Mean-of-known-pixels fill per image and channel.
Tensor mean_fill(const Tensor& image, const Tensor& mask);

// DCF_THREADS if set to a positive integer, else fallback.
int worker_threads(int fallback = 1);

}  // namespace dcf
