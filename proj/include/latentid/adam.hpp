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

#include "latentid/tensor.hpp"

namespace latentid {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction. Moment buffers are created
// on the first step and must keep their shapes afterwards.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return step_; }

  void step(std::span<Tensor2* const> params, std::span<const Tensor2* const> grads);

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor2> first_;
  std::vector<Tensor2> second_;
};

// Cosine decay from `start` to `end` over `total` steps.
double cosine_learning_rate(double start, double end, std::uint64_t step, std::uint64_t total);

}  // namespace latentid
