/*
 Copyright 2026 The latentid Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latentid/tensor.hpp"

namespace latentid {

// Handle to a node recorded on a Tape.
struct NodeRef {
  std::uint32_t index = 0;
  friend bool operator==(NodeRef, NodeRef) = default;
};

enum class OpKind : std::uint8_t {
  Input,
  Parameter,
  Constant,
  MatMul,
  Add,
  Mul,
  Scale,
  Tanh,
  Softplus,
  SliceCols,
  ConcatCols,
  SquaredError,
};

// Reverse-mode differentiation over a recorded graph.
//
// The graph is recorded once and then evaluated many times: bind the inputs,
// call forward(), then backward() on a scalar node. Nodes are stored in
// creation order, which is a topological order because every op can only
// reference nodes that already exist.
//
// Broadcasting: Add and Mul accept a right-hand operand with a single row,
// which is repeated across the rows of the left-hand operand.
class Tape {
 public:
  NodeRef input(std::string name, std::size_t cols);
  NodeRef parameter(Tensor2 init, std::string name = {});
  NodeRef constant(Tensor2 value);

  NodeRef matmul(NodeRef a, NodeRef b);
  NodeRef add(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);
  NodeRef scale(NodeRef a, double factor);
  NodeRef tanh(NodeRef a);
  NodeRef softplus(NodeRef a);
  NodeRef slice_cols(NodeRef a, std::size_t begin, std::size_t end);
  NodeRef concat_cols(std::span<const NodeRef> parts);
  NodeRef concat_cols(std::initializer_list<NodeRef> parts) {
    return concat_cols(std::span<const NodeRef>(parts.begin(), parts.size()));
  }
  // Mean over rows of the squared Euclidean row distance; a 1x1 result.
  NodeRef squared_error(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b) { return add(a, scale(b, -1.0)); }

  void bind(NodeRef input, const Tensor2& value);
  const Tensor2& forward(NodeRef output);
  const Tensor2& forward(NodeRef output, std::initializer_list<std::pair<NodeRef, const Tensor2*>> bindings);
  // Accumulates d(output)/d(node) for every node feeding `output`. The output
  // must be 1x1 and must have been evaluated by the latest forward().
  void backward(NodeRef output, double seed = 1.0);

  const Tensor2& value(NodeRef node) const;
  const Tensor2& grad(NodeRef node) const;
  Tensor2& parameter_value(NodeRef node);
  const std::vector<NodeRef>& parameters() const noexcept { return parameters_; }
  const std::string& name(NodeRef node) const;
  OpKind kind(NodeRef node) const;
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    OpKind op;
    std::uint32_t lhs = 0;
    std::uint32_t rhs = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    double factor = 0.0;
    std::vector<std::uint32_t> parts;
    std::string name;
    bool needs_grad = false;
    bool bound = false;
    Tensor2 value;
    Tensor2 grad;
  };

  NodeRef push(Node node);
  const Node& at(NodeRef ref) const;
  void evaluate(Node& node);
  void propagate(Node& node);
  void ensure_grad(Node& node);

  std::vector<Node> nodes_;
  std::vector<NodeRef> parameters_;
  std::int64_t evaluated_through_ = -1;
  std::int64_t differentiated_from_ = -1;
};

}  // namespace latentid
