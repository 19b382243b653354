// dcf: command-line front end for training, inpainting, evaluation, mask
// generation and the built-in verification suites.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dcf/errors.hpp"
#include "dcf/image_io.hpp"
#include "dcf/pipeline.hpp"
#include "dcf/verify.hpp"

namespace {

using namespace dcf;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct TrainArgs {
  std::string config;
  std::string preset = "desk";
  std::vector<std::string> overrides;
  std::string resume;
  int log_every = 50;
};

struct InpaintArgs {
  std::string checkpoint, input, mask, output, raw;
};

struct EvalArgs {
  std::string checkpoint, data, mask_mode = "irregular";
  std::vector<std::uint64_t> seeds{1};
};

struct MaskArgs {
  int size = 256;
  int height = 0, width = 0;
  std::string mode = "irregular";
  std::uint64_t seed = 1;
  std::string out;
};

std::string config_help() {
  std::ostringstream out;
  out << "Config keys (key = value, '#' comments):\n";
  const TrainConfig defaults;
  const auto values = defaults.entries();
  const auto docs = TrainConfig::documented_keys();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-20s %-52s [%s]\n", docs[i].first.c_str(), docs[i].second.c_str(),
                  values[i].second.c_str());
    out << line;
  }
  return out.str();
}

int cmd_train(const TrainArgs& a) {
  TrainConfig config = a.config.empty() ? TrainConfig::preset(a.preset) : load_train_config(a.config, a.preset);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects KEY=VALUE, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  config.validate();
  const Dataset data = config.data_dir.empty()
                           ? synthetic_textures(config.synthetic_count, config.resolution, config.seed)
                           : load_dataset(config.data_dir);
  Trainer trainer(config, data);
  if (!a.resume.empty()) trainer.load_checkpoint(a.resume);
  std::printf("training %d iterations at %dx%d, batch %d, %zu images, adversarial %s\n", config.iterations,
              config.resolution, config.resolution, config.batch_size, data.size(), config.adversarial ? "on" : "off");
  const auto start = std::chrono::steady_clock::now();
  trainer.train_loop([&](const CurvePoint& p) {
    if (a.log_every > 0 && (p.iteration % a.log_every == 0 || p.iteration == config.iterations)) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("iter %6lld  l1 %.5f  adv %.5f  perc %.5f  style %.6f  total %.5f  (%.0fs)\n",
                  static_cast<long long>(p.iteration), p.loss.l1, p.loss.adversarial, p.loss.perceptual,
                  p.loss.style, p.loss.total, s);
      std::fflush(stdout);
    }
  });
  if (!config.checkpoint_path.empty()) std::printf("checkpoint: %s\n", config.checkpoint_path.c_str());
  if (!config.curve_path.empty()) std::printf("loss curve: %s\n", config.curve_path.c_str());
  return 0;
}

int cmd_inpaint(const InpaintArgs& a) {
  LoadedModel model = load_model(a.checkpoint);
  const Tensor image = image_to_tensor(read_image(a.input));
  const MaskGrid grid = image_to_mask(read_image(a.mask));
  const int r = model.config.resolution;
  if (image.shape().h != r || image.shape().w != r) {
    throw DataError(a.input + ": image is " + std::to_string(image.shape().w) + "x" +
                    std::to_string(image.shape().h) + ", model expects " + std::to_string(r) + "x" + std::to_string(r));
  }
  if (grid.height() != r || grid.width() != r) throw DataError(a.mask + ": mask size differs from the image");
  const Tensor mask = mask_tensor(std::span<const MaskGrid>(&grid, 1));
  const ForwardResult out = model.network.forward(apply_mask(image, mask), mask, Mode::kEval);
  write_image(a.output, tensor_to_image(out.composited));
  if (!a.raw.empty()) write_image(a.raw, tensor_to_image(out.raw));
  std::printf("wrote %s (hole coverage %.4f)\n", a.output.c_str(), grid.coverage());
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  LoadedModel model = load_model(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  const EvalReport r = evaluate(model.network, data, parse_mask_mode(a.mask_mode), a.seeds, worker_threads(1));
  std::printf("evaluated %d samples (%zu images x %zu mask seeds, %s masks)\n", r.samples, data.size(),
              a.seeds.size(), a.mask_mode.c_str());
  std::printf("note: frechet uses the fixed random feature extractor; compare only between runs of this tool\n");
  for (const auto& [key, value] : r.records()) std::printf("%s=%.6f\n", key.c_str(), value);
  return 0;
}

int cmd_maskgen(const MaskArgs& a) {
  const int h = a.height > 0 ? a.height : a.size;
  const int w = a.width > 0 ? a.width : a.size;
  const MaskGrid m = parse_mask_mode(a.mode) == MaskMode::kCenter ? center_mask(h, w) : irregular_mask(h, w, a.seed);
  write_image(a.out, mask_to_image(m));
  std::printf("wrote %s (%dx%d, coverage %.6f)\n", a.out.c_str(), w, h, m.coverage());
  return 0;
}

int print_results(const std::vector<verify::CheckResult>& results) {
  std::size_t failed = 0;
  for (const auto& r : results) {
    std::printf("%-4s  %-10s  %-58s %s\n", r.passed ? "PASS" : "FAIL", r.suite.c_str(), r.name.c_str(),
                r.detail.c_str());
    if (!r.passed) ++failed;
  }
  std::printf("%zu checks, %zu failed\n", results.size(), failed);
  return failed == 0 ? 0 : kExitNumerical;
}

int cmd_gradcheck(const std::string& module) {
  return print_results(verify::run_gradient_checks(module));
}

int cmd_selftest(const std::vector<std::string>& only) {
  std::vector<verify::CheckResult> all;
  for (const auto& s : verify::suites()) {
    if (!only.empty() && std::find(only.begin(), only.end(), s.name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    auto res = verify::run_suite(s.name);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "[%s: %zu checks in %.1fs]\n", s.name.c_str(), res.size(), secs);
    all.insert(all.end(), res.begin(), res.end());
  }
  return print_results(all);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-path cooperative filtering image completion"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a network");
  train_cmd->add_option("--config", train.config, "key = value config file");
  train_cmd->add_option("--preset", train.preset, "base settings before the config file")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  train_cmd->add_option("--set", train.overrides, "override one config key (KEY=VALUE), repeatable");
  train_cmd->add_option("--resume", train.resume, "continue from a checkpoint");
  train_cmd->add_option("--log-every", train.log_every, "progress line interval")->capture_default_str();
  train_cmd->footer(config_help());

  InpaintArgs inpaint;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "Fill the holes of one image");
  inpaint_cmd->add_option("--checkpoint", inpaint.checkpoint, "trained checkpoint")->required();
  inpaint_cmd->add_option("--input", inpaint.input, "input image (PNG/PPM)")->required();
  inpaint_cmd->add_option("--mask", inpaint.mask, "mask image, 255 = known, 0 = hole")->required();
  inpaint_cmd->add_option("--output", inpaint.output, "composited result")->required();
  inpaint_cmd->add_option("--raw", inpaint.raw, "also write the pre-composite network output here");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR / SSIM / Frechet over a directory of images");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "trained checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "directory of images at the model resolution")->required();
  eval_cmd->add_option("--mask-mode", eval.mask_mode, "center | irregular")
      ->check(CLI::IsMember({"center", "irregular"}))
      ->capture_default_str();
  eval_cmd->add_option("--seeds", eval.seeds, "irregular-mask seeds (comma separated)")
      ->delimiter(',')
      ->capture_default_str();

  MaskArgs mask;
  auto* mask_cmd = app.add_subcommand("maskgen", "Write a hole mask as PNG (255 = known, 0 = hole)");
  mask_cmd->add_option("--size", mask.size, "square side")->capture_default_str();
  mask_cmd->add_option("--height", mask.height, "height (overrides --size)");
  mask_cmd->add_option("--width", mask.width, "width (overrides --size)");
  mask_cmd->add_option("--mode", mask.mode, "center | irregular")
      ->check(CLI::IsMember({"center", "irregular"}))
      ->capture_default_str();
  mask_cmd->add_option("--seed", mask.seed, "irregular-mask seed")->capture_default_str();
  mask_cmd->add_option("--out", mask.out, "output PNG")->required();

  std::string module = "all";
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks (exit 3 on failure)");
  std::vector<std::string> modules = verify::gradient_modules();
  modules.push_back("all");
  grad_cmd->add_option("--module", module, "module to check")->check(CLI::IsMember(modules))->capture_default_str();

  std::vector<std::string> only;
  auto* self_cmd = app.add_subcommand("selftest", "Run the built-in verification suites");
  std::vector<std::string> suite_names;
  for (const auto& s : verify::suites()) suite_names.push_back(s.name);
  self_cmd->add_option("--suite", only, "restrict to these suites")->check(CLI::IsMember(suite_names));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*inpaint_cmd) return cmd_inpaint(inpaint);
    if (*eval_cmd) return cmd_eval(eval);
    if (*mask_cmd) return cmd_maskgen(mask);
    if (*grad_cmd) return cmd_gradcheck(module);
    if (*self_cmd) return cmd_selftest(only);
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
