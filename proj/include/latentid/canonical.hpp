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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "latentid/mlp.hpp"
#include "latentid/rng.hpp"
#include "latentid/tensor.hpp"

namespace latentid {

// Stacked subsystem states: block i holds [q_i^t, ..., q_i^{t+n-1}].
using LatentState = std::vector<double>;

// Multi-input system in Luenberger controllable canonical form. Each of the
// `inputs` subsystems is a chain of `order` states; the last row of block i
// is the only row carrying coefficients, and input i enters only there.
struct LinearCanonicalModel {
  std::size_t order = 0;
  std::size_t inputs = 0;
  // inputs x (inputs * order); entry (i, j * order + k) is a_{k+1}^{ij}.
  Tensor2 coefficients;
  // b^i, one per subsystem.
  std::vector<double> gains;

  std::size_t state_dim() const noexcept { return order * inputs; }
  double coefficient(std::size_t i, std::size_t j, std::size_t k) const { return coefficients(i, j * order + k); }
  void validate() const;
};

struct StateSpaceMatrices {
  Tensor2 transition;  // nd x nd
  Tensor2 input;       // nd x d
};

StateSpaceMatrices assemble_matrices(const LinearCanonicalModel& model);
LatentState step_linear(const LinearCanonicalModel& model, std::span<const double> z, std::span<const double> u);

// Maps a raw network output onto a coefficient value.
struct CoefficientHead {
  enum class Kind { Identity, Squash, Floor };
  Kind kind = Kind::Identity;
  double sign = 1.0;
  double floor = 0.0;   // Floor: |value| >= floor
  double extent = 0.0;  // Squash: |value| <= extent. Floor: |value| <= floor + extent.

  double apply(double raw) const;
  static CoefficientHead identity() { return {}; }
  static CoefficientHead squash(double bound) { return {Kind::Squash, 1.0, 0.0, bound}; }
  static CoefficientHead floored(double sign, double floor, double extent) { return {Kind::Floor, sign, floor, extent}; }
};

struct CoefficientValues {
  Tensor2 a;                  // same layout as LinearCanonicalModel::coefficients
  std::vector<double> gains;  // b^i(z)
};

// Affine nonlinear canonical system: the coefficients a_k^{ij}(z) and gains
// b^i(z) are outputs of one network evaluated at the pre-step state. The
// network emits d * nd coefficient outputs followed by d gain outputs; each
// output passes through its head.
struct AffineCanonicalModel {
  std::size_t order = 0;
  std::size_t inputs = 0;
  double floor_a = 0.0;  // h_a
  double floor_b = 0.0;  // h_b
  Mlp network;
  std::vector<CoefficientHead> heads;

  std::size_t state_dim() const noexcept { return order * inputs; }
  CoefficientValues evaluate(std::span<const double> z) const;
  void validate() const;
};

LatentState step_affine(const AffineCanonicalModel& model, std::span<const double> z, std::span<const double> u);

// Constant networks reproducing a linear model exactly.
AffineCanonicalModel affine_from_linear(const LinearCanonicalModel& model);

using CanonicalSystem = std::variant<LinearCanonicalModel, AffineCanonicalModel>;

std::size_t state_dim(const CanonicalSystem& system);
std::size_t input_dim(const CanonicalSystem& system);
std::size_t system_order(const CanonicalSystem& system);
LatentState step(const CanonicalSystem& system, std::span<const double> z, std::span<const double> u);

// trajectory[t + 1] = step(trajectory[t], inputs[t]). Throws a Divergence
// error naming the step when a state stops being finite.
std::vector<LatentState> simulate(const CanonicalSystem& system, std::span<const double> z0,
                                  std::span<const std::vector<double>> inputs);

struct AssumptionThresholds {
  double nonzero = 1e-6;
  double singular = 1e-6;
  double spectral_flag = 1.5;
  std::size_t equilibrium_starts = 64;
  double equilibrium_box = 3.0;
  std::size_t coefficient_probes = 1024;
};

struct AssumptionReport {
  AssumptionThresholds thresholds;
  std::vector<double> a1_margin;  // min |a_1^{ii}| per subsystem
  std::vector<double> b_margin;   // min |b^i| per subsystem
  std::optional<double> sum_margin;            // |1 - sum a_k|, single-input linear
  std::optional<double> min_singular_i_minus_a;  // linear
  std::optional<double> spectral_radius;         // linear
  // Affine: smallest relative residual |c - A(c)c| / |c| found away from the
  // origin by the multi-start search. Small values suggest a second equilibrium.
  std::optional<double> equilibrium_residual;
  bool stability_flag = false;
  bool pass = true;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
};

AssumptionReport check_assumptions(const LinearCanonicalModel& model, const AssumptionThresholds& thresholds = {});
AssumptionReport check_assumptions(const AffineCanonicalModel& model, const AssumptionThresholds& thresholds = {});
AssumptionReport check_assumptions(const CanonicalSystem& system, const AssumptionThresholds& thresholds = {});

// a_k^{ij} ~ U(-2, 2), b^i ~ U(0.2, 2), resampled until the assumptions hold.
LinearCanonicalModel sample_random_linear(std::size_t order, std::size_t inputs, SeededRng& rng,
                                          std::size_t max_attempts = 1000);

struct AffineSamplingOptions {
  double floor_a = 0.2;
  double floor_b = 0.2;
  double coefficient_bound = 2.0;
  std::size_t hidden_width = 16;
};

AffineCanonicalModel sample_random_affine(std::size_t order, std::size_t inputs, SeededRng& rng,
                                          const AffineSamplingOptions& options = {});

// Point mass under a force, written in canonical coordinates
// z = [m d, m d + m v]: A = [[0, 1], [-1, 2]], B = [0, 1]^T.
LinearCanonicalModel mechanical_example();

}  // namespace latentid
