// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "agenet/parameters.hpp"
#include "agenet/tensor.hpp"

namespace agenet {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
};

/// View handed to a backward rule: read inputs/output, accumulate into input grads.
class BackwardContext {
 public:
  BackwardContext(Tape& tape, std::size_t node) : tape_(tape), node_(node) {}

  const Tensor& input(std::size_t i) const;
  const Tensor& output() const;
  const Tensor& output_grad() const;
  /// Gradient accumulator of input i, or nullptr if that input is not differentiated.
  Tensor* input_grad(std::size_t i);

 private:
  Tape& tape_;
  std::size_t node_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Records operations in execution order; backward() walks them in reverse.
///
/// A tape is single-threaded. Nodes are append-only, so every recorded op's inputs
/// precede it and reverse traversal is a valid topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that receives a gradient (readable via Var::grad after backward).
  Var leaf(Tensor value);
  /// Leaf bound to a Parameter; its gradient is added to Parameter::grad on backward.
  Var parameter(Parameter& p);

  /// Appends an op node. `backward` is dropped if no input requires a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every participating node.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  friend struct Var;
  friend class BackwardContext;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
  };

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  Tensor& grad_buffer(std::size_t id);

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace agenet
