#pragma once

// Finite-difference gradient checking and the named verification suites
// shared by the unit tests, the acceptance runner and `dcf selftest`.

#include <cstdint>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dcf/layers.hpp"

namespace dcf::verify {

struct GradInput {
  std::string name;
  Tensor tensor;
};

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "name[index] ad=.. fd=.."
};

// Compares tape gradients of loss() with central differences of step h.
// Error per coordinate is |g_ad - g_fd| / max(floor, |g_ad| + |g_fd|) with
// floor = 1e-3 * max |g_ad| over the same input (at least 1e-8). Exactly zero
// gradients are then scored against the gradient scale, not roundoff noise.
inline double grad_floor(double max_abs_grad) { return std::max(1e-8, 1e-3 * max_abs_grad); }
inline double grad_rel_error(double ad, double fd, double floor) {
  return std::fabs(ad - fd) / std::max(floor, std::fabs(ad) + std::fabs(fd));
}
// max_per_input = 0 checks every coordinate, otherwise a seeded sample.
GradCheck finite_diff_check(const std::function<Tensor()>& loss, const std::vector<GradInput>& inputs,
                            double h = 1e-5, std::size_t max_per_input = 0, std::uint64_t seed = 0);

// Every parameter of a ParamList as a gradient-check input.
std::vector<GradInput> inputs_from(const ParamList& params);

Tensor random_normal(const Shape& shape, Rng& rng, double stddev = 1.0);
Tensor random_uniform(const Shape& shape, Rng& rng, double lo, double hi);
// sum(w * x) for a fixed Gaussian w drawn from seed: a scalar whose
// gradient is w, which keeps gradient checks well conditioned.
Tensor random_projection(const Tensor& x, std::uint64_t seed);

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

class Reporter {
 public:
  explicit Reporter(std::string suite) : suite_(std::move(suite)) {}

  void check(const std::string& name, bool passed, const std::string& detail = "");
  // Passes when measured <= tolerance.
  void within(const std::string& name, double measured, double tolerance);

  const std::vector<CheckResult>& results() const { return results_; }
  bool all_passed() const;

 private:
  std::string suite_;
  std::vector<CheckResult> results_;
};

struct Suite {
  std::string name;
  std::string description;
  std::function<void(Reporter&)> run;
};

// oracles, fft, gradients, filtering, masks, shapes, losses, metrics, model.
const std::vector<Suite>& suites();
std::vector<CheckResult> run_suite(const std::string& name);

// Gradient checks are grouped by module name for `dcf gradcheck --module`.
std::vector<std::string> gradient_modules();
// Runs one module's gradient checks ("all" runs every one).
std::vector<CheckResult> run_gradient_checks(const std::string& module);

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kNetworkGradTolerance = 1e-3;

}  // namespace dcf::verify
