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
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "latentid/adam.hpp"
#include "latentid/dataset.hpp"
#include "latentid/mlp.hpp"

namespace latentid {

// f: x -> z_hat. Inputs are standardised with constants fixed from the
// training observations, then passed through a tanh MLP.
struct EncoderModel {
  Tensor2 input_mean;   // 1 x m
  Tensor2 input_scale;  // 1 x m, multiplies (x - mean)
  Mlp network;
  Tensor2 skip;  // m x nd linear bypass added to the network output; empty when unused

  Tensor2 standardize(const Tensor2& x) const;
  Tensor2 encode(const Tensor2& x) const;
  std::size_t latent_dim() const { return network.output_dim(); }
};

// Canonical-form estimate with trainable last-row coefficients and fixed gains.
struct LinearDynamicsEstimate {
  std::size_t order = 0;
  std::size_t inputs = 0;
  Tensor2 coefficients;        // inputs x nd, layout as LinearCanonicalModel
  std::vector<double> gains;   // b_hat^i, fixed

  LinearCanonicalModel as_model() const;
};

// Coefficient networks for A_hat(z) and B_hat(z). Gains are
// sign_i * (floor + softplus(raw_i(z))), so |b_hat^i| >= floor everywhere.
struct AffineDynamicsEstimate {
  std::size_t order = 0;
  std::size_t inputs = 0;
  Mlp coefficient_net;  // nd -> inputs * nd (unmasked variant)
  // Masked variant: coefficient (i, j, k) is a network of block j's first
  // k + 1 states only. Stored row-major over (i, j, k).
  std::vector<Mlp> masked_nets;
  Mlp gain_net;  // nd -> inputs
  double gain_floor = 1.0;
  std::vector<double> gain_signs;

  bool masked() const noexcept { return !masked_nets.empty(); }
  // Per-row coefficient tables for a batch: a is N x (inputs * nd), gains N x inputs.
  std::pair<Tensor2, Tensor2> evaluate_batch(const Tensor2& z) const;
};

// First-order integrator baseline: z_next = z + B_hat u, nothing to learn
// besides the encoder.
struct IntegratorDynamics {
  std::size_t order = 0;
  std::size_t inputs = 0;
  std::vector<double> gains;
};

using DynamicsEstimate = std::variant<LinearDynamicsEstimate, AffineDynamicsEstimate, IntegratorDynamics>;

struct TrainingConfig {
  std::size_t steps = 30000;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double final_learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t encoder_width = 128;
  double encoder_leak = 0.0;  // hidden activation tanh(v) + leak * v
  bool encoder_skip = false;  // add a trainable linear bypass x -> z to the encoder
  std::size_t coefficient_width = 64;
  double fixed_gain = 1.0;  // b_hat^i for linear and integrator models
  double gain_floor = 1.0;  // h_hat_b for affine models
  double gain_sign = 1.0;
  bool masked_coefficients = false;
  std::size_t eval_every = 500;
  std::size_t eval_records = 4096;
  std::size_t trace_every = 100;
};

nlohmann::json training_config_to_json(const TrainingConfig& c);
TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig base = {});

struct TracePoint {
  std::size_t step = 0;
  double batch_loss = 0.0;
  std::optional<double> eval_loss;
};

struct TrainingTrace {
  std::vector<TracePoint> points;
  std::uint64_t seed = 0;
  TrainingConfig config;
  double initial_loss = 0.0;
  double best_eval_loss = 0.0;
  std::size_t best_step = 0;
};

struct TrainedModel {
  EncoderModel encoder;
  DynamicsEstimate dynamics;
  TrainingTrace trace;

  std::size_t order() const;
  std::size_t inputs() const;
};
using BaselineIntegrator = TrainedModel;

enum class DynamicsKind { Linear, Affine, Integrator };
std::string dynamics_kind_name(DynamicsKind kind);

struct TrainingProblem {
  DynamicsKind kind = DynamicsKind::Linear;
  std::size_t order = 0;
  std::size_t inputs = 0;
};

// Minibatch Adam on the one-step latent prediction error. Returns the
// parameters with the lowest loss on a fixed evaluation subset.
TrainedModel train(const ObservedTransitions& data, const TrainingProblem& problem, const TrainingConfig& config,
                   const SeededRng& rng);
BaselineIntegrator train_baseline(const ObservedTransitions& data, std::size_t order, std::size_t inputs,
                                  const TrainingConfig& config, const SeededRng& rng);

// z_tilde = A_hat(f(x)) f(x) + B_hat(f(x)) u, row-wise.
Tensor2 predict_next(const TrainedModel& model, const Tensor2& x, const Tensor2& u);
Tensor2 predict_latent(const DynamicsEstimate& dynamics, const Tensor2& z_hat, const Tensor2& u);

// Objective values, evaluated without the tape.
double loss_linear(const EncoderModel& encoder, const LinearDynamicsEstimate& est, const ObservedTransitions& batch);
double loss_affine(const EncoderModel& encoder, const AffineDynamicsEstimate& est, const ObservedTransitions& batch);
double prediction_loss(const TrainedModel& model, const ObservedTransitions& batch);

// Flat view of every trainable parameter, in tape registration order.
std::vector<double> flatten_parameters(const TrainedModel& model);
TrainedModel with_parameters(const TrainedModel& model, std::span<const double> flat);
// Objective value on a batch and its gradient with respect to flatten_parameters(model).
double objective_gradient(const TrainedModel& model, const ObservedTransitions& batch, std::vector<double>& gradient);

EncoderModel identity_encoder(std::size_t dim);

void save_trained_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_trained_model(const std::filesystem::path& path);
void write_trace_csv(const TrainingTrace& trace, const std::filesystem::path& path);

}  // namespace latentid
