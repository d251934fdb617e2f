#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/numcore/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace opsurv::numcore {

/// A value in the computation graph. `grad` is allocated lazily and only for
/// nodes that require it.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;

  Matrix& ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

/// Records the backward closure of each forward operation in execution order
/// and replays them in reverse. A tape is single-use: after backward() it must
/// be cleared before recording again.
class Tape {
 public:
  explicit Tape(bool track_pattern = false) : track_pattern_(track_pattern) {}

  NodePtr input(Matrix value, bool requires_grad = false) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return node;
  }

  NodePtr make_node(Matrix value, bool requires_grad) {
    return input(std::move(value), requires_grad);
  }

  void record(std::function<void()> op) { ops_.push_back(std::move(op)); }

  /// Activation-pattern fingerprint (ReLU signs, pooling argmaxes). Two forward
  /// passes with equal fingerprints lie on the same smooth piece of the loss.
  bool tracks_pattern() const { return track_pattern_; }
  std::uint64_t pattern() const { return pattern_; }
  void mix_pattern(std::uint64_t v) {
    pattern_ ^= v + 0x9e3779b97f4a7c15ULL + (pattern_ << 6) + (pattern_ >> 2);
  }

  std::size_t size() const { return ops_.size(); }

  void backward(const NodePtr& output, const Matrix& upstream) {
    if (ops_.empty() || consumed_)
      throw StateError("backward called without a recorded forward pass");
    if (upstream.rows() != output->value.rows() ||
        upstream.cols() != output->value.cols())
      throw DimensionError("upstream gradient shape does not match output");
    output->ensure_grad() += upstream;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    consumed_ = true;
  }

  void backward(const NodePtr& output, double upstream = 1.0) {
    if (output->value.size() != 1)
      throw DimensionError("scalar backward requires a 1x1 output");
    backward(output, Matrix::Constant(1, 1, upstream));
  }

  void clear() {
    ops_.clear();
    consumed_ = false;
    pattern_ = 0;
  }

 private:
  std::vector<std::function<void()>> ops_;
  bool consumed_ = false;
  bool track_pattern_ = false;
  std::uint64_t pattern_ = 0;
};

}  // namespace opsurv::numcore
