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

#include "latentid/mlp.hpp"

#include <cmath>

namespace latentid {

Tensor2 Mlp::forward(const Tensor2& batch) const {
  Tensor2 h = batch;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    if (h.cols() != layer.weight.rows()) {
      fail(ErrorKind::ShapeMismatch, "mlp layer " + std::to_string(l) + " expects " +
                                         std::to_string(layer.weight.rows()) + " inputs, got " + h.shape_string());
    }
    Tensor2 next(h.rows(), layer.weight.cols());
    next.map().noalias() = h.map() * layer.weight.map();
    next.map().rowwise() += layer.bias.map().row(0);
    if (l + 1 < layers.size()) next.map() = (next.map().array().tanh() + leak * next.map().array()).matrix();
    h = std::move(next);
  }
  return h;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Tensor2 out = forward(Tensor2::row(x));
  return out.values();
}

Mlp glorot_mlp(std::span<const std::size_t> widths, SeededRng& rng) {
  if (widths.size() < 2) fail(ErrorKind::InvalidArgument, "mlp needs at least input and output widths");
  Mlp net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
    net.layers.push_back({rng_uniform(rng, -limit, limit, widths[l], widths[l + 1]), Tensor2(1, widths[l + 1])});
  }
  return net;
}

NodeRef TapeMlp::apply(Tape& tape, NodeRef x) const {
  NodeRef h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = tape.add(tape.matmul(h, weights[l]), biases[l]);
    if (l + 1 < weights.size()) h = leak == 0.0 ? tape.tanh(h) : tape.add(tape.tanh(h), tape.scale(h, leak));
  }
  return h;
}

Mlp TapeMlp::snapshot(const Tape& tape) const {
  Mlp net;
  net.leak = leak;
  for (std::size_t l = 0; l < weights.size(); ++l) net.layers.push_back({tape.value(weights[l]), tape.value(biases[l])});
  return net;
}

TapeMlp record_mlp(Tape& tape, const Mlp& init, const std::string& prefix) {
  TapeMlp out;
  out.leak = init.leak;
  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    out.weights.push_back(tape.parameter(init.layers[l].weight, prefix + ".w" + std::to_string(l)));
    out.biases.push_back(tape.parameter(init.layers[l].bias, prefix + ".b" + std::to_string(l)));
  }
  return out;
}

}  // namespace latentid
