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

#include "latentid/tensor.hpp"

namespace latentid {

// PCG32 (XSH-RR output, 64-bit LCG state) seeded through SplitMix64.
//
// Splitting: child(index) is seeded with mix64(mix64(seed) ^ index) and uses
// `index` to select its LCG stream. mix64 is the SplitMix64 finalizer, which is
// a bijection on 64-bit words, so distinct indices always produce distinct
// child seeds. Children depend only on the parent seed, never on how many
// draws the parent has made.
//
// Floating-point draws avoid <random> distributions so that streams are
// identical across standard library implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double next_unit() noexcept;
  double uniform(double low, double high);
  double normal(double mean, double sd);
  bool bernoulli(double p);
  // Uniform integer on [0, bound).
  std::uint64_t below(std::uint64_t bound);

  SeededRng split(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  std::uint64_t increment_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

Tensor2 rng_uniform(SeededRng& rng, double low, double high, std::size_t rows, std::size_t cols);
Tensor2 rng_normal(SeededRng& rng, double mean, double sd, std::size_t rows, std::size_t cols);
SeededRng rng_split(const SeededRng& rng, std::uint64_t index);

}  // namespace latentid
