#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dcf {

// NCHW extent of a rank-4 tensor.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Handle to a dense float64 NCHW buffer with an optional gradient buffer.
//
// Copies share the underlying storage, the same way autograd frameworks treat
// their variables. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<double> data();
  std::span<const double> data() const;
  double* ptr() { return data().data(); }
  const double* ptr() const { return data().data(); }

  double& at(int n, int c, int h, int w);
  double at(int n, int c, int h, int w) const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  // Gradient buffer; empty span when nothing has been accumulated.
  std::span<const double> grad() const;
  // Gradient buffer, zero-allocated on first access. Callable through const
  // handles: adjoints accumulate into tensors their ops only read.
  std::span<double> grad_mut() const;
  void zero_grad();

  // New storage with the same values and no gradient history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node;
  std::shared_ptr<Node> node_;
};

// Records differentiable operations in forward order and replays their
// adjoints in reverse.
//
// Operations record onto the tape installed by the innermost live
// Tape::Recording guard on the current thread. With no guard installed,
// operations run as plain functions.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  class Recording {
   public:
    explicit Recording(Tape& tape);
    ~Recording();
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

   private:
    Tape* previous_;
  };

  // Tape active on this thread, or nullptr.
  static Tape* active();

  void record(std::string_view op, BackwardFn fn);
  std::size_t size() const { return entries_.size(); }
  const std::string& op_name(std::size_t i) const { return entries_[i].name; }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded adjoint in reverse.
  // A tape can be replayed once; reset() makes it reusable.
  void backward(const Tensor& loss);
  bool consumed() const { return consumed_; }
  void reset();

 private:
  struct Entry {
    std::string name;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

inline void backward(Tape& tape, const Tensor& loss) { tape.backward(loss); }

// True when an op over these inputs must be recorded: a tape is active and at
// least one input carries gradients.
bool needs_grad(std::initializer_list<const Tensor*> inputs);

// Throws NumericalError when any entry is NaN or infinite.
void check_finite(const Tensor& t, std::string_view where);

}  // namespace dcf
