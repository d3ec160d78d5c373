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

#include "latentid/adam.hpp"

#include <cmath>
#include <numbers>

namespace latentid {

void Adam::step(std::span<Tensor2* const> params, std::span<const Tensor2* const> grads) {
  if (params.size() != grads.size()) fail(ErrorKind::ShapeMismatch, "adam: parameter and gradient counts differ");
  if (step_ == 0) {
    first_.clear();
    second_.clear();
    for (const Tensor2* p : params) {
      first_.emplace_back(p->rows(), p->cols());
      second_.emplace_back(p->rows(), p->cols());
    }
  }
  if (first_.size() != params.size()) fail(ErrorKind::ShapeMismatch, "adam: parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(first_[i])) {
      fail(ErrorKind::ShapeMismatch, "adam: shape mismatch for parameter " + std::to_string(i) + " (" +
                                         params[i]->shape_string() + " vs grad " + grads[i]->shape_string() + ")");
    }
  }
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = first_[i].data();
    auto v = second_[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

double cosine_learning_rate(double start, double end, std::uint64_t step, std::uint64_t total) {
  if (total == 0) return start;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return end + 0.5 * (start - end) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace latentid
