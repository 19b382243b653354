#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dcf/verify.hpp"

namespace dcf::verify {

GradCheck finite_diff_check(const std::function<Tensor()>& loss, const std::vector<GradInput>& inputs,
                            double h, std::size_t max_per_input, std::uint64_t seed) {
  for (const auto& in : inputs) {
    Tensor t = in.tensor;
    t.set_requires_grad(true);
    t.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tape::Recording guard(tape);
    Tensor value = loss();
    tape.backward(value);
  }
  for (const auto& in : inputs) {
    const auto g = in.tensor.grad();
    analytic.emplace_back(in.tensor.numel(), 0.0);
    std::copy(g.begin(), g.end(), analytic.back().begin());
  }

  Rng rng(seed);
  GradCheck result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor t = inputs[i].tensor;
    double scale = 0.0;
    for (double g : analytic[i]) scale = std::max(scale, std::fabs(g));
    const double floor = grad_floor(scale);
    std::vector<std::size_t> coords(t.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_per_input > 0 && coords.size() > max_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_per_input);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t k : coords) {
      double* x = t.ptr() + k;
      const double saved = *x;
      *x = saved + h;
      const double plus = loss().item();
      *x = saved - h;
      const double minus = loss().item();
      *x = saved;
      const double fd = (plus - minus) / (2.0 * h);
      const double ad = analytic[i][k];
      const double err = grad_rel_error(ad, fd, floor);
      ++result.coordinates;
      if (result.worst.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s[%zu] ad=%.10g fd=%.10g", inputs[i].name.c_str(), k, ad, fd);
        result.worst = buf;
      }
    }
  }
  return result;
}

std::vector<GradInput> inputs_from(const ParamList& params) {
  std::vector<GradInput> out;
  for (const auto& p : params.params) out.push_back({p.name, p.tensor});
  return out;
}

Tensor random_normal(const Shape& shape, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Tensor random_uniform(const Shape& shape, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Tensor random_projection(const Tensor& x, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(x, random_normal(x.shape(), rng)));
}

void Reporter::check(const std::string& name, bool passed, const std::string& detail) {
  results_.push_back({suite_, name, passed, detail});
}

void Reporter::within(const std::string& name, double measured, double tolerance) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3g (tol %.0e)", measured, tolerance);
  check(name, measured <= tolerance, buf);
}

bool Reporter::all_passed() const {
  return std::all_of(results_.begin(), results_.end(), [](const CheckResult& r) { return r.passed; });
}

std::vector<CheckResult> run_suite(const std::string& name) {
  for (const auto& s : suites()) {
    if (s.name == name) {
      Reporter r(name);
      s.run(r);
      return r.results();
    }
  }
  throw std::invalid_argument("unknown verification suite '" + name + "'");
}

}  // namespace dcf::verify
