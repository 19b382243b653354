#include "dcf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dcf/errors.hpp"

namespace dcf {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
  return os.str();
}

struct Tensor::Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
};

namespace {

void validate_shape(const Shape& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw ShapeError("negative tensor extent " + s.str());
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<Node>()) {
  validate_shape(shape);
  node_->shape = shape;
  node_->values.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(std::make_shared<Node>()) {
  validate_shape(shape);
  if (values.size() != shape.numel()) {
    throw ShapeError("tensor of shape " + shape.str() + " needs " +
                     std::to_string(shape.numel()) + " values, got " +
                     std::to_string(values.size()));
  }
  node_->shape = shape;
  node_->values = std::move(values);
}

const Shape& Tensor::shape() const {
  static const Shape kEmpty{};
  return node_ ? node_->shape : kEmpty;
}

std::span<double> Tensor::data() {
  if (!node_) return {};
  return node_->values;
}

std::span<const double> Tensor::data() const {
  if (!node_) return {};
  return node_->values;
}

double& Tensor::at(int n, int c, int h, int w) {
  const Shape& s = node_->shape;
  return node_->values[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
}

double Tensor::at(int n, int c, int h, int w) const {
  const Shape& s = node_->shape;
  return node_->values[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
}

double Tensor::item() const {
  if (!node_ || node_->values.size() != 1) {
    throw ShapeError("item() requires a single-element tensor, got " + shape().str());
  }
  return node_->values[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_) throw std::logic_error("set_requires_grad on an undefined tensor");
  node_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

std::span<double> Tensor::grad_mut() const {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  return Tensor(node_->shape, node_->values);
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Tape::Recording::Recording(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

Tape::Recording::~Recording() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::string_view op, BackwardFn fn) {
  if (consumed_) throw std::logic_error("recording onto a consumed tape; call reset()");
  entries_.push_back(Entry{std::string(op), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) {
    throw std::logic_error("backward already ran on this tape; call reset() first");
  }
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward needs a single-element loss, got " + loss.shape().str());
  }
  consumed_ = true;
  Tensor seed = loss;
  seed.grad_mut()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t && t->requires_grad(); });
}

void check_finite(const Tensor& t, std::string_view where) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericalError("non-finite value produced by " + std::string(where));
    }
  }
}

}  // namespace dcf
