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

// Helpers shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <vector>

#include "latentid/mixing.hpp"
#include "latentid/rng.hpp"
#include "latentid/tape.hpp"

namespace latentid::testing_support {

// g = id on R^nd: a single identity layer, no activation.
inline MixingFunction identity_mixing(std::size_t nd) {
  MixingFunction g;
  g.input_dim = nd;
  g.output_dim = nd;
  g.layers.push_back({Tensor2::identity(nd), std::vector<double>(nd, 0.0)});
  return g;
}

struct RandomGraph {
  Tape tape;
  NodeRef x;
  NodeRef loss;
  Tensor2 input;
  std::vector<NodeRef> params;
};

// A random composite of matmul, add, tanh, softplus, mul, slice, concat and
// scale over a batch input, ending in a squared error.
inline void build_random_graph(RandomGraph& g, SeededRng& rng) {
  Tape& t = g.tape;
  const std::size_t batch = 1 + rng.below(5);
  std::size_t width = 1 + rng.below(16);
  g.x = t.input("x", width);
  g.input = rng_uniform(rng, -1.5, 1.5, batch, width);
  NodeRef h = g.x;
  const std::size_t layers = 1 + rng.below(4);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out = 1 + rng.below(16);
    const NodeRef w = t.parameter(rng_normal(rng, 0.0, 0.7, width, out));
    const NodeRef b = t.parameter(rng_normal(rng, 0.0, 0.3, 1, out));
    g.params.push_back(w);
    g.params.push_back(b);
    h = t.add(t.matmul(h, w), b);
    switch (rng.below(5)) {
      case 0: h = t.tanh(h); break;
      case 1: h = t.softplus(h); break;
      case 2: {
        const NodeRef gate = t.parameter(rng_normal(rng, 1.0, 0.3, 1, out));
        g.params.push_back(gate);
        h = t.mul(t.tanh(h), gate);
        break;
      }
      case 3:
        if (out >= 2) {
          const std::size_t cut = 1 + rng.below(out - 1);
          h = t.concat_cols({t.slice_cols(h, cut, out), t.scale(t.slice_cols(h, 0, cut), -0.5)});
        }
        break;
      default: h = t.mul(h, t.tanh(h)); break;
    }
    width = out;
  }
  const NodeRef target = t.constant(rng_normal(rng, 0.0, 1.0, batch, width));
  g.loss = t.squared_error(h, target);
}

// Largest norm-relative difference between reverse-mode and central
// difference gradients over the parameters of one random graph.
inline double random_graph_gradient_error(SeededRng& rng, double h = 1e-5) {
  RandomGraph g;
  build_random_graph(g, rng);
  g.tape.bind(g.x, g.input);
  g.tape.forward(g.loss);
  g.tape.backward(g.loss);
  std::vector<Tensor2> analytic;
  for (NodeRef p : g.params) analytic.push_back(g.tape.grad(p));
  double worst = 0.0;
  for (std::size_t q = 0; q < g.params.size(); ++q) {
    const NodeRef p = g.params[q];
    Tensor2& value = g.tape.parameter_value(p);
    Tensor2 numeric(value.rows(), value.cols());
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double keep = value.data()[i];
      value.data()[i] = keep + h;
      const double up = g.tape.forward(g.loss)(0, 0);
      value.data()[i] = keep - h;
      const double down = g.tape.forward(g.loss)(0, 0);
      value.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    const double diff = (analytic[q].map() - numeric.map()).norm();
    const double scale = std::max({analytic[q].map().norm(), numeric.map().norm(), 1e-6});
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

}  // namespace latentid::testing_support
