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
#include <span>
#include <vector>

#include "latentid/rng.hpp"
#include "latentid/tensor.hpp"

namespace latentid {

struct MixingLayer {
  Tensor2 weight;            // square, nd x nd
  std::vector<double> bias;  // nd
};

// Invertible observation map x = g(z).
//
// The core is a stack of square layers h <- W h + b with the activation
// s(v) = v + alpha * tanh(beta * v) after every layer but the last. With
// alpha * beta > -1 the activation is strictly increasing and every W has its
// singular values clamped into [sigma_min, sigma_max], so the core is a
// diffeomorphism of R^nd. When m > nd a fixed column-orthonormal embedding
// (m x nd) is applied after the core.
struct MixingFunction {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<MixingLayer> layers;
  double alpha = 0.5;
  double beta = 1.0;
  double sigma_min = 0.5;
  double sigma_max = 2.0;
  Tensor2 embedding;  // empty when output_dim == input_dim
  std::uint64_t seed = 0;

  std::vector<double> apply(std::span<const double> z) const;
  // Row-wise application to an N x nd batch.
  Tensor2 apply(const Tensor2& z) const;
  // Chain-rule Jacobian dg/dz at z (m x nd).
  Tensor2 jacobian(std::span<const double> z) const;
  double min_activation_slope() const;
  double max_activation_slope() const;
  // ||g(a) - g(b)|| >= bound * ||a - b|| for every pair.
  double distance_lower_bound() const;
  void validate() const;
};

struct MixingOptions {
  std::size_t layers = 3;
  double sigma_min = 0.5;
  double sigma_max = 2.0;
  double alpha = 0.5;
  double beta = 1.0;
  double bias_scale = 0.5;
  // Start every layer from the identity instead of a Gaussian draw.
  bool identity_init = false;
};

MixingFunction sample_mixing(std::size_t nd, std::size_t m, SeededRng& rng, const MixingOptions& options = {});

// Clamps the singular values of `w` into [lo, hi].
Tensor2 clamp_singular_values(const Tensor2& w, double lo, double hi);

struct MixingConditionReport {
  double min_pairwise_distance = 0.0;  // over distinct sample pairs
  std::size_t pairs_considered = 0;
  std::vector<double> layer_sigma_min;
  std::vector<double> layer_sigma_max;
  double jacobian_sigma_min_low = 0.0;   // min over samples of the smallest Jacobian singular value
  double jacobian_sigma_min_high = 0.0;  // max over samples of the smallest Jacobian singular value
};

// Uses central-difference Jacobians so the report does not lean on the
// analytic chain rule it is meant to certify.
MixingConditionReport condition_report(const MixingFunction& g, const Tensor2& samples);

}  // namespace latentid
