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

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentid/learner.hpp"

namespace latentid {

// Diagnostics are appended here when a sink is given, otherwise printed to stderr.
using Warnings = std::vector<std::string>;

// Mean over columns of |Pearson(zh_k, z_k)|. Columns are matched by index.
double mcc(const Tensor2& z_hat, const Tensor2& z, Warnings* warnings = nullptr);

// Canonical correlations between true block i and learned block i, averaged
// over the n pairs and then over the d blocks. A learned block whose rank is
// below n contributes zeros for the missing directions.
double blockwise_mcc(const Tensor2& z_hat, const Tensor2& z, std::size_t order, std::size_t inputs,
                     Warnings* warnings = nullptr);

// Normalized coefficient error after rescaling a_hat^{ij} by b^i b_hat^j / (b_hat^i b^j).
double param_error(const LinearDynamicsEstimate& estimate, const LinearCanonicalModel& truth);
// The rescaled estimate itself, in the same d x nd layout.
Tensor2 aligned_coefficients(const LinearDynamicsEstimate& estimate, const LinearCanonicalModel& truth);

double prediction_mcc(const TrainedModel& model, const TransitionDataset& dataset, Warnings* warnings = nullptr);

struct AffineFit {
  Tensor2 transform;               // T, nd x nd, z_hat ~ z T^T + c
  std::vector<double> offset;      // c
  std::vector<double> r_squared;   // per learned dimension
  double min_r_squared = 0.0;
  double off_block_mass = 0.0;     // sum |T| outside the diagonal blocks / sum |T|
  double off_diagonal_mass = 0.0;  // sum |T| off the main diagonal / sum |T|
  double diagonal_spread = 0.0;    // max over blocks of (max - min) / mean |.| of the block's diagonal
  double offset_norm = 0.0;
  double diagonal_norm = 0.0;      // ||diag(T)||
};

AffineFit affine_fit(const Tensor2& z_hat, const Tensor2& z, std::size_t order, std::size_t inputs);

struct EvalReport {
  double mcc_repr = 0.0;
  double mcc_model = 0.0;
  double blockwise_mcc = 0.0;
  std::optional<double> param_error;
  std::optional<Tensor2> aligned_coefficients;
  AffineFit affine_fit;
  nlohmann::json metadata = nlohmann::json::object();
  Warnings warnings;
};

// Scores a trained model on a dataset that carries hidden latents. Parameter
// error is filled in when both the truth and the estimate are linear.
EvalReport evaluate(const TrainedModel& model, const TransitionDataset& dataset, const CanonicalSystem& truth);

nlohmann::json eval_report_to_json(const EvalReport& report);
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report, const std::string& label);

}  // namespace latentid
