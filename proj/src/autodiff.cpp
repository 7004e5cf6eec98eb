#include "eer/autodiff.hpp"

#include <stdexcept>

#include "eer/error.hpp"

namespace eer {

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) {
    throw ShapeError("Var::scalar: expected 1x1, got " + shape_string(value()));
  }
  return (*value_)[0];
}

const Tensor& Gradients::operator[](const Var& leaf) const {
  if (leaf.tape() != tape_ || !leaf.tracked()) {
    throw std::invalid_argument("Gradients: var does not belong to this tape");
  }
  auto it = by_leaf_.find(*leaf.tape_id());
  if (it == by_leaf_.end()) throw std::invalid_argument("Gradients: var is not a leaf");
  return it->second;
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::make_shared<const Tensor>(std::move(value)), {}, {}});
  return Var(nodes_.back().value, this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::make_shared<const Tensor>(std::move(value)), inputs, std::move(backward));
}

Var Tape::record(std::shared_ptr<const Tensor> value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  Node node{std::move(value), {}, std::move(backward)};
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.tracked() && in.tape() != this) {
      throw std::invalid_argument("Tape::record: input belongs to a different tape");
    }
    node.inputs.push_back(in.tape_id());
  }
  nodes_.push_back(std::move(node));
  return Var(nodes_.back().value, this, nodes_.size() - 1);
}

bool Tape::is_leaf(const Var& v) const {
  return v.tape() == this && !nodes_[*v.tape_id()].backward;
}

Gradients Tape::backward(const Var& root) const {
  if (root.tape() != this) throw std::invalid_argument("backward: root is not on this tape");
  if (root.rows() != 1 || root.cols() != 1) {
    throw ShapeError("backward: root must be scalar, got " + shape_string(root.value()));
  }
  const std::size_t root_id = *root.tape_id();
  std::vector<std::optional<Tensor>> grads(root_id + 1);
  grads[root_id] = Tensor::ones(1, 1);

  std::vector<Tensor*> slots;
  for (std::size_t id = root_id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!grads[id] || !node.backward) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (!node.inputs[k]) continue;
      auto& g = grads[*node.inputs[k]];
      if (!g) {
        const Tensor& v = *nodes_[*node.inputs[k]].value;
        g = Tensor(v.rows(), v.cols());
      }
      slots[k] = &*g;
    }
    node.backward(*grads[id], slots);
    grads[id].reset();  // interior gradients are no longer needed
  }

  Gradients out;
  out.tape_ = this;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].backward) continue;
    if (id < grads.size() && grads[id]) {
      out.by_leaf_.emplace(id, std::move(*grads[id]));
    } else {
      out.by_leaf_.emplace(id, Tensor(nodes_[id].value->rows(), nodes_[id].value->cols()));
    }
  }
  return out;
}

Var make_result(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return make_result(std::make_shared<const Tensor>(std::move(value)), inputs,
                     std::move(backward));
}

Var make_result(std::shared_ptr<const Tensor> value, std::initializer_list<Var> inputs,
                BackwardFn backward) {
  Tape* tape = nullptr;
  for (const Var& in : inputs) {
    if (!in.tracked()) continue;
    if (tape != nullptr && in.tape() != tape) {
      throw std::invalid_argument("make_result: inputs span multiple tapes");
    }
    tape = in.tape();
  }
  if (tape == nullptr) return Var(std::move(value));
  return tape->record(std::move(value), inputs, std::move(backward));
}

}  // namespace eer
