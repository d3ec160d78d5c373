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

#include <span>
#include <vector>

#include "latentid/rng.hpp"
#include "latentid/tape.hpp"

namespace latentid {

// y = x * weight + bias, with x a batch of row vectors.
struct DenseLayer {
  Tensor2 weight;  // in x out
  Tensor2 bias;    // 1 x out
};

// Feed-forward network with a linear output. Hidden layers apply
// tanh(v) + leak * v; leak = 0 is plain tanh.
struct Mlp {
  std::vector<DenseLayer> layers;
  double leak = 0.0;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }
  Tensor2 forward(const Tensor2& batch) const;
  std::vector<double> forward(std::span<const double> x) const;
};

// Glorot-uniform weights, zero biases. `widths` lists every layer width
// including input and output, so {4, 128, 128, 2} is a 3-layer network.
Mlp glorot_mlp(std::span<const std::size_t> widths, SeededRng& rng);

// Records the network on the tape with every weight and bias as a parameter.
struct TapeMlp {
  std::vector<NodeRef> weights;
  std::vector<NodeRef> biases;
  double leak = 0.0;
  NodeRef apply(Tape& tape, NodeRef x) const;
  Mlp snapshot(const Tape& tape) const;
};
TapeMlp record_mlp(Tape& tape, const Mlp& init, const std::string& prefix);

}  // namespace latentid
