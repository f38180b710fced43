#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nlgnn {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense double-precision array of rank 1-3. A Tensor is a shared handle to
// its storage: copies alias, which is how tape closures keep forward results
// alive for the backward pass. Values are written once by the op that creates
// the tensor and treated as immutable afterwards; grad accumulates during
// backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t rows() const { return node_->shape[0]; }
  std::size_t cols() const { return node_->shape[1]; }

  std::span<double> values() { return node_->values; }
  std::span<const double> values() const { return node_->values; }
  double& at(std::size_t i, std::size_t j) {
    return node_->values[i * cols() + j];
  }
  double at(std::size_t i, std::size_t j) const {
    return node_->values[i * cols() + j];
  }
  double item() const { return node_->values[0]; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  // Allocates (zeroed) on first use.
  std::span<double> grad();
  // Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  void zero_grad();

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

// Records one backward closure per differentiable op, in execution order.
// backward() replays them in reverse and clears the tape. A tape belongs to
// one forward pass of one training session and is not shared across threads.
class Tape {
 public:
  Tape() = default;
  // A non-recording tape runs forward passes only (evaluation mode).
  explicit Tape(bool recording) : recording_(recording) {}

  bool recording() const { return recording_; }
  void record(std::function<void()> step) {
    if (recording_) steps_.push_back(std::move(step));
  }
  std::size_t size() const { return steps_.size(); }
  void clear() { steps_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every requires_grad tensor
  // reachable from the loss. The tape is cleared afterwards.
  void backward(const Tensor& loss);

  // Smallest |preactivation| seen at any kinked activation during the last
  // forward pass. Gradient-check harnesses use it to reject instances that
  // sit on a ReLU/LeakyReLU corner.
  void note_kink_margin(double m) {
    if (m < kink_margin_) kink_margin_ = m;
  }
  double kink_margin() const { return kink_margin_; }
  void reset_kink_margin() {
    kink_margin_ = std::numeric_limits<double>::infinity();
  }

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

namespace detail {

// Folds the scratch buffer in ascending value order. Used by every reduction
// over a set of graph neighbors: the summation order then depends only on the
// summand values, never on node numbering, which keeps model outputs exactly
// equivariant under node relabeling.
double ordered_sum(std::span<double> scratch);

}  // namespace detail

}  // namespace nlgnn
