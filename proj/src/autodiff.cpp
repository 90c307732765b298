// SPDX-License-Identifier: Apache-2.0
#include "agenet/autodiff.hpp"

#include <stdexcept>

namespace agenet {

const Tensor& Var::value() const { return tape->node(id).value; }
const Tensor& Var::grad() const { return tape->node(id).grad; }
bool Var::requires_grad() const { return tape->node(id).requires_grad; }

const Tensor& BackwardContext::input(std::size_t i) const {
  return tape_.node(tape_.node(node_).inputs.at(i)).value;
}

const Tensor& BackwardContext::output() const { return tape_.node(node_).value; }

const Tensor& BackwardContext::output_grad() const { return tape_.node(node_).grad; }

Tensor* BackwardContext::input_grad(std::size_t i) {
  const std::size_t id = tape_.node(node_).inputs.at(i);
  if (!tape_.node(id).requires_grad) return nullptr;
  return &tape_.grad_buffer(id);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) {
    n.grad = Tensor(n.value.shape());
  }
  return n.grad;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.parameter = &p;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape != this) throw std::invalid_argument("tape: input recorded on a different tape");
    n.inputs.push_back(v.id);
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to a different tape");
  if (backward_done_) throw std::logic_error("backward: tape already differentiated");
  Node& root = nodes_[loss.id];
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_string(root.value.shape()));
  }
  backward_done_ = true;
  if (root.requires_grad) grad_buffer(loss.id).fill(1.0);

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      BackwardContext ctx(*this, id);
      n.backward(ctx);
    }
    if (n.parameter != nullptr) n.parameter->grad.add_(n.grad);
  }
  // Participating nodes the loss does not depend on still expose a zero gradient.
  for (auto& n : nodes_) {
    if (n.requires_grad && n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  }
}

}  // namespace agenet
