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

#include "latentid/tape.hpp"

#include <cmath>

namespace latentid {

namespace {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Constant: return "constant";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Tanh: return "tanh";
    case OpKind::Softplus: return "softplus";
    case OpKind::SliceCols: return "slice";
    case OpKind::ConcatCols: return "concat";
    case OpKind::SquaredError: return "squared_error";
  }
  return "?";
}

void check_broadcast(const char* op, const Tensor2& a, const Tensor2& b) {
  const bool ok = a.same_shape(b) || (b.rows() == 1 && b.cols() == a.cols());
  if (!ok) fail(ErrorKind::ShapeMismatch, std::string(op) + " of " + a.shape_string() + " and " + b.shape_string());
}

// Adds `src` into `dst`, summing over rows when `dst` is the broadcast operand.
void accumulate_reduced(Tensor2& dst, const RowMatrix& src) {
  if (dst.rows() == static_cast<std::size_t>(src.rows())) {
    dst.map() += src;
  } else {
    dst.map() += src.colwise().sum();
  }
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

NodeRef Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return NodeRef{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::at(NodeRef ref) const {
  if (ref.index >= nodes_.size()) fail(ErrorKind::InvalidArgument, "node reference out of range");
  return nodes_[ref.index];
}

NodeRef Tape::input(std::string name, std::size_t cols) {
  Node n{.op = OpKind::Input};
  n.name = std::move(name);
  n.end = cols;
  return push(std::move(n));
}

NodeRef Tape::parameter(Tensor2 init, std::string name) {
  if (!init.all_finite()) fail(ErrorKind::NonFinite, "parameter '" + name + "' initialised with non-finite values");
  Node n{.op = OpKind::Parameter};
  n.name = std::move(name);
  n.value = std::move(init);
  n.needs_grad = true;
  n.bound = true;
  const NodeRef ref = push(std::move(n));
  parameters_.push_back(ref);
  return ref;
}

NodeRef Tape::constant(Tensor2 value) {
  Node n{.op = OpKind::Constant};
  n.value = std::move(value);
  n.bound = true;
  return push(std::move(n));
}

#define LATENTID_BINARY(method, kind)                                  \
  NodeRef Tape::method(NodeRef a, NodeRef b) {                         \
    Node n{.op = kind, .lhs = a.index, .rhs = b.index};                \
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;               \
    return push(std::move(n));                                         \
  }
LATENTID_BINARY(matmul, OpKind::MatMul)
LATENTID_BINARY(add, OpKind::Add)
LATENTID_BINARY(mul, OpKind::Mul)
LATENTID_BINARY(squared_error, OpKind::SquaredError)
#undef LATENTID_BINARY

NodeRef Tape::scale(NodeRef a, double factor) {
  Node n{.op = OpKind::Scale, .lhs = a.index, .factor = factor};
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

NodeRef Tape::tanh(NodeRef a) {
  Node n{.op = OpKind::Tanh, .lhs = a.index};
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

NodeRef Tape::softplus(NodeRef a) {
  Node n{.op = OpKind::Softplus, .lhs = a.index};
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

NodeRef Tape::slice_cols(NodeRef a, std::size_t begin, std::size_t end) {
  if (begin >= end) fail(ErrorKind::InvalidArgument, "empty column slice");
  Node n{.op = OpKind::SliceCols, .lhs = a.index, .begin = begin, .end = end};
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

NodeRef Tape::concat_cols(std::span<const NodeRef> parts) {
  if (parts.empty()) fail(ErrorKind::InvalidArgument, "concat of zero parts");
  Node n{.op = OpKind::ConcatCols};
  for (NodeRef p : parts) {
    n.needs_grad = n.needs_grad || at(p).needs_grad;
    n.parts.push_back(p.index);
  }
  return push(std::move(n));
}

void Tape::bind(NodeRef input, const Tensor2& value) {
  if (input.index >= nodes_.size() || nodes_[input.index].op != OpKind::Input) {
    fail(ErrorKind::InvalidArgument, "bind target is not an input node");
  }
  Node& n = nodes_[input.index];
  if (value.cols() != n.end) {
    fail(ErrorKind::ShapeMismatch, "input '" + n.name + "' expects " + std::to_string(n.end) + " columns, got " +
                                       value.shape_string());
  }
  n.value = value;
  n.bound = true;
}

const Tensor2& Tape::forward(NodeRef output,
                             std::initializer_list<std::pair<NodeRef, const Tensor2*>> bindings) {
  for (const auto& [node, value] : bindings) bind(node, *value);
  return forward(output);
}

const Tensor2& Tape::forward(NodeRef output) {
  if (output.index >= nodes_.size()) fail(ErrorKind::InvalidArgument, "forward target out of range");
  evaluated_through_ = -1;
  differentiated_from_ = -1;
  for (std::uint32_t i = 0; i <= output.index; ++i) {
    evaluate(nodes_[i]);
  }
  evaluated_through_ = output.index;
  return nodes_[output.index].value;
}

void Tape::evaluate(Node& n) {
  switch (n.op) {
    case OpKind::Input:
      if (!n.bound) fail(ErrorKind::State, "input '" + n.name + "' is not bound");
      if (!n.value.all_finite()) fail(ErrorKind::NonFinite, "input '" + n.name + "' holds non-finite values");
      return;
    case OpKind::Parameter:
    case OpKind::Constant:
      return;
    case OpKind::MatMul: {
      const Tensor2& a = nodes_[n.lhs].value;
      const Tensor2& b = nodes_[n.rhs].value;
      if (a.cols() != b.rows()) {
        fail(ErrorKind::ShapeMismatch, "matmul of " + a.shape_string() + " and " + b.shape_string());
      }
      n.value.resize(a.rows(), b.cols());
      n.value.map().noalias() = a.map() * b.map();
      break;
    }
    case OpKind::Add:
    case OpKind::Mul: {
      const Tensor2& a = nodes_[n.lhs].value;
      const Tensor2& b = nodes_[n.rhs].value;
      check_broadcast(op_name(n.op), a, b);
      n.value.resize(a.rows(), a.cols());
      auto out = n.value.map();
      if (a.same_shape(b)) {
        if (n.op == OpKind::Add) out = a.map() + b.map();
        else out = a.map().cwiseProduct(b.map());
      } else {
        const auto row = b.map().row(0);
        if (n.op == OpKind::Add) out = a.map().rowwise() + row;
        else out = a.map().array().rowwise() * row.array();
      }
      break;
    }
    case OpKind::Scale: {
      const Tensor2& a = nodes_[n.lhs].value;
      n.value.resize(a.rows(), a.cols());
      n.value.map() = a.map() * n.factor;
      break;
    }
    case OpKind::Tanh: {
      const Tensor2& a = nodes_[n.lhs].value;
      n.value.resize(a.rows(), a.cols());
      n.value.map() = a.map().array().tanh().matrix();
      break;
    }
    case OpKind::Softplus: {
      const Tensor2& a = nodes_[n.lhs].value;
      n.value.resize(a.rows(), a.cols());
      auto src = a.data();
      auto dst = n.value.data();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = softplus_value(src[i]);
      break;
    }
    case OpKind::SliceCols: {
      const Tensor2& a = nodes_[n.lhs].value;
      if (n.end > a.cols()) {
        fail(ErrorKind::ShapeMismatch, "slice [" + std::to_string(n.begin) + ", " + std::to_string(n.end) +
                                           ") of " + a.shape_string());
      }
      n.value.resize(a.rows(), n.end - n.begin);
      n.value.map() = a.map().middleCols(static_cast<Eigen::Index>(n.begin), static_cast<Eigen::Index>(n.end - n.begin));
      break;
    }
    case OpKind::ConcatCols: {
      const std::size_t rows = nodes_[n.parts.front()].value.rows();
      std::size_t cols = 0;
      for (auto p : n.parts) {
        const Tensor2& v = nodes_[p].value;
        if (v.rows() != rows) fail(ErrorKind::ShapeMismatch, "concat of parts with different row counts");
        cols += v.cols();
      }
      n.value.resize(rows, cols);
      Eigen::Index offset = 0;
      for (auto p : n.parts) {
        const Tensor2& v = nodes_[p].value;
        n.value.map().middleCols(offset, static_cast<Eigen::Index>(v.cols())) = v.map();
        offset += static_cast<Eigen::Index>(v.cols());
      }
      break;
    }
    case OpKind::SquaredError: {
      const Tensor2& a = nodes_[n.lhs].value;
      const Tensor2& b = nodes_[n.rhs].value;
      if (!a.same_shape(b)) {
        fail(ErrorKind::ShapeMismatch, "squared_error of " + a.shape_string() + " and " + b.shape_string());
      }
      if (a.rows() == 0) fail(ErrorKind::InvalidArgument, "squared_error over an empty batch");
      n.value.resize(1, 1);
      n.value(0, 0) = (a.map() - b.map()).squaredNorm() / static_cast<double>(a.rows());
      break;
    }
  }
  if (!n.value.all_finite()) {
    fail(ErrorKind::NonFinite, std::string("non-finite value produced by ") + op_name(n.op));
  }
}

void Tape::ensure_grad(Node& n) {
  if (!n.grad.same_shape(n.value)) n.grad.resize(n.value.rows(), n.value.cols());
}

void Tape::backward(NodeRef output, double seed) {
  if (evaluated_through_ < 0 || output.index > evaluated_through_) {
    fail(ErrorKind::State, "backward called before forward evaluated the output");
  }
  Node& out = nodes_[output.index];
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    fail(ErrorKind::InvalidArgument, "backward needs a scalar output, got " + out.value.shape_string());
  }
  for (std::uint32_t i = 0; i <= output.index; ++i) {
    Node& n = nodes_[i];
    if (n.needs_grad) {
      ensure_grad(n);
      n.grad.fill(0.0);
    }
  }
  if (!out.needs_grad) {
    differentiated_from_ = output.index;
    return;
  }
  out.grad(0, 0) = seed;
  for (std::int64_t i = output.index; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.needs_grad) propagate(n);
  }
  differentiated_from_ = output.index;
}

void Tape::propagate(Node& n) {
  const auto g = n.grad.map();
  switch (n.op) {
    case OpKind::Input:
    case OpKind::Parameter:
    case OpKind::Constant:
      return;
    case OpKind::MatMul: {
      Node& a = nodes_[n.lhs];
      Node& b = nodes_[n.rhs];
      if (a.needs_grad) a.grad.map().noalias() += g * b.value.map().transpose();
      if (b.needs_grad) b.grad.map().noalias() += a.value.map().transpose() * g;
      return;
    }
    case OpKind::Add: {
      Node& a = nodes_[n.lhs];
      Node& b = nodes_[n.rhs];
      if (a.needs_grad) a.grad.map() += g;
      if (b.needs_grad) accumulate_reduced(b.grad, g);
      return;
    }
    case OpKind::Mul: {
      Node& a = nodes_[n.lhs];
      Node& b = nodes_[n.rhs];
      const bool broadcast = !a.value.same_shape(b.value);
      if (a.needs_grad) {
        if (broadcast) a.grad.map().array() += g.array().rowwise() * b.value.map().row(0).array();
        else a.grad.map().array() += g.array() * b.value.map().array();
      }
      if (b.needs_grad) {
        const RowMatrix prod = g.cwiseProduct(a.value.map());
        accumulate_reduced(b.grad, prod);
      }
      return;
    }
    case OpKind::Scale: {
      Node& a = nodes_[n.lhs];
      a.grad.map() += n.factor * g;
      return;
    }
    case OpKind::Tanh: {
      Node& a = nodes_[n.lhs];
      a.grad.map().array() += g.array() * (1.0 - n.value.map().array().square());
      return;
    }
    case OpKind::Softplus: {
      Node& a = nodes_[n.lhs];
      auto x = a.value.data();
      auto dx = a.grad.data();
      auto dy = n.grad.data();
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] += dy[i] * sigmoid(x[i]);
      return;
    }
    case OpKind::SliceCols: {
      Node& a = nodes_[n.lhs];
      a.grad.map().middleCols(static_cast<Eigen::Index>(n.begin), static_cast<Eigen::Index>(n.end - n.begin)) += g;
      return;
    }
    case OpKind::ConcatCols: {
      Eigen::Index offset = 0;
      for (auto p : n.parts) {
        Node& part = nodes_[p];
        const auto w = static_cast<Eigen::Index>(part.value.cols());
        if (part.needs_grad) part.grad.map() += g.middleCols(offset, w);
        offset += w;
      }
      return;
    }
    case OpKind::SquaredError: {
      Node& a = nodes_[n.lhs];
      Node& b = nodes_[n.rhs];
      const double k = 2.0 * n.grad(0, 0) / static_cast<double>(a.value.rows());
      if (a.needs_grad) a.grad.map() += k * (a.value.map() - b.value.map());
      if (b.needs_grad) b.grad.map() -= k * (a.value.map() - b.value.map());
      return;
    }
  }
}

const Tensor2& Tape::value(NodeRef node) const { return at(node).value; }

const Tensor2& Tape::grad(NodeRef node) const {
  const Node& n = at(node);
  if (differentiated_from_ < 0) fail(ErrorKind::State, "no gradients available; call backward() first");
  if (!n.needs_grad) fail(ErrorKind::InvalidArgument, "node does not depend on any parameter");
  return n.grad;
}

Tensor2& Tape::parameter_value(NodeRef node) {
  if (node.index >= nodes_.size() || nodes_[node.index].op != OpKind::Parameter) {
    fail(ErrorKind::InvalidArgument, "not a parameter node");
  }
  return nodes_[node.index].value;
}

const std::string& Tape::name(NodeRef node) const { return at(node).name; }
OpKind Tape::kind(NodeRef node) const { return at(node).op; }

}  // namespace latentid
