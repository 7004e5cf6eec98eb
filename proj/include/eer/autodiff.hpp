#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "eer/tensor.hpp"

namespace eer {

class Tape;

/// Handle to a tensor value that may participate in a gradient tape.
/// Untracked vars carry only their value; ops on them record nothing.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value) : value_(std::make_shared<const Tensor>(std::move(value))) {}
  explicit Var(std::shared_ptr<const Tensor> value) : value_(std::move(value)) {}

  const Tensor& value() const { return *value_; }
  std::size_t rows() const { return value_->rows(); }
  std::size_t cols() const { return value_->cols(); }
  /// Value of a 1×1 var.
  double scalar() const;

  bool tracked() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::optional<std::size_t> tape_id() const {
    return tracked() ? std::optional<std::size_t>(id_) : std::nullopt;
  }

 private:
  friend class Tape;
  Var(std::shared_ptr<const Tensor> value, Tape* tape, std::size_t id)
      : value_(std::move(value)), tape_(tape), id_(id) {}

  std::shared_ptr<const Tensor> value_;
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Receives the gradient of the op's output and one accumulator per input
/// (nullptr for untracked inputs). Implementations must add, not assign.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> input_grads)>;

/// Accumulated gradients for the leaves of one tape.
class Gradients {
 public:
  /// Gradient for a leaf; exact zeros if the leaf did not reach the root.
  const Tensor& operator[](const Var& leaf) const;

 private:
  friend class Tape;
  std::unordered_map<std::size_t, Tensor> by_leaf_;
  const Tape* tape_ = nullptr;
};

/// Define-by-run gradient tape. Nodes are appended in evaluation order, so
/// every node's inputs precede it and reverse order is a valid topological
/// order for the backward sweep. Confined to a single thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(std::shared_ptr<const Tensor> value, std::initializer_list<Var> inputs,
             BackwardFn backward);

  /// Reverse sweep from a 1×1 root.
  Gradients backward(const Var& root) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool is_leaf(const Var& v) const;

 private:
  struct Node {
    std::shared_ptr<const Tensor> value;
    std::vector<std::optional<std::size_t>> inputs;
    BackwardFn backward;  // empty for leaves
  };
  std::vector<Node> nodes_;
};

/// Records `value` on the tape shared by the tracked inputs, or returns an
/// untracked var when none is tracked.
Var make_result(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

/// Shared-value form, for ops whose backward also reads the output.
Var make_result(std::shared_ptr<const Tensor> value, std::initializer_list<Var> inputs,
                BackwardFn backward);

}  // namespace eer
