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

#include "latentid/rng.hpp"

#include <cmath>
#include <numbers>

namespace latentid {

namespace {
constexpr std::uint64_t kPcgMultiplier = 6364136223846793005ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), state_(0), increment_((stream << 1u) | 1u) {
  next_u32();
  state_ += mix64(seed);
  next_u32();
}

std::uint32_t SeededRng::next_u32() noexcept {
  const std::uint64_t old = state_;
  state_ = old * kPcgMultiplier + increment_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  const auto rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
}

std::uint64_t SeededRng::next_u64() noexcept {
  const std::uint64_t hi = next_u32();
  return (hi << 32u) | next_u32();
}

double SeededRng::next_unit() noexcept { return static_cast<double>(next_u64() >> 11u) * 0x1.0p-53; }

double SeededRng::uniform(double low, double high) {
  if (!(low < high)) {
    fail(ErrorKind::InvalidArgument,
         "uniform bounds require low < high, got [" + std::to_string(low) + ", " + std::to_string(high) + ")");
  }
  return low + (high - low) * next_unit();
}

double SeededRng::normal(double mean, double sd) {
  if (!(sd >= 0.0)) fail(ErrorKind::InvalidArgument, "normal sd must be >= 0");
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return mean + sd * spare_normal_;
  }
  // Box-Muller on (0, 1] x [0, 1).
  const double u1 = 1.0 - next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_normal_ = true;
  return mean + sd * r * std::cos(theta);
}

bool SeededRng::bernoulli(double p) { return next_unit() < p; }

std::uint64_t SeededRng::below(std::uint64_t bound) {
  if (bound == 0) fail(ErrorKind::InvalidArgument, "below() needs a positive bound");
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

SeededRng SeededRng::split(std::uint64_t index) const {
  return SeededRng(mix64(mix64(seed_) ^ index), index);
}

Tensor2 rng_uniform(SeededRng& rng, double low, double high, std::size_t rows, std::size_t cols) {
  if (!(low < high)) fail(ErrorKind::InvalidArgument, "uniform bounds require low < high");
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(low, high);
  return t;
}

Tensor2 rng_normal(SeededRng& rng, double mean, double sd, std::size_t rows, std::size_t cols) {
  if (!(sd >= 0.0)) fail(ErrorKind::InvalidArgument, "normal sd must be >= 0");
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = rng.normal(mean, sd);
  return t;
}

SeededRng rng_split(const SeededRng& rng, std::uint64_t index) { return rng.split(index); }

}  // namespace latentid
