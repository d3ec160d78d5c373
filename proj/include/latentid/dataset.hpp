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
#include <string>

#include <json.hpp>

#include "latentid/canonical.hpp"
#include "latentid/mixing.hpp"

namespace latentid {

enum class Protocol { Passive, Active };

std::string protocol_name(Protocol p);  // "PAS" / "ACT"
Protocol protocol_from_name(const std::string& name);

// What a learner may see: observations and inputs only.
struct ObservedTransitions {
  Tensor2 x;       // N x m
  Tensor2 u;       // N x d
  Tensor2 x_next;  // N x m

  std::size_t size() const noexcept { return x.rows(); }
};

// Ground-truth latents, kept for evaluation.
struct HiddenLatents {
  Tensor2 z;       // N x nd
  Tensor2 z_next;  // N x nd
};

struct CollectionOptions {
  double input_zero_probability = 0.5;
  double input_range = 1.0;    // nonzero inputs ~ U(-range, range)
  double initial_range = 1.0;  // passive z0 ~ U(-range, range); 0 pins z0 to the origin
  // Active protocol records t = 1..T_max-1 by default; true adds t = T_max.
  bool record_final_step = false;
  // Scale process noise on subsystem i by its gain b^i (otherwise added directly).
  bool noise_scaled_by_gain = false;
};

struct DatasetMetadata {
  Protocol protocol = Protocol::Passive;
  std::uint64_t seed = 0;
  double noise_sd = 0.0;
  std::size_t requested = 0;  // records (PAS) or episodes (ACT)
  std::size_t t_max = 0;
  std::size_t discarded_episodes = 0;
  std::size_t order = 0;
  std::size_t inputs = 0;
  std::size_t observed_dim = 0;
  CollectionOptions options;
  std::string system_id;
  std::string mixing_id;
};

class TransitionDataset {
 public:
  TransitionDataset() = default;
  TransitionDataset(ObservedTransitions observed, HiddenLatents hidden, DatasetMetadata metadata);

  const ObservedTransitions& observed() const noexcept { return observed_; }
  const HiddenLatents& hidden() const noexcept { return hidden_; }
  const DatasetMetadata& metadata() const noexcept { return metadata_; }
  std::size_t size() const noexcept { return observed_.size(); }

 private:
  ObservedTransitions observed_;
  HiddenLatents hidden_;
  DatasetMetadata metadata_;
};

// Adds N(0, sd^2) to the last state of each subsystem block (the rows the
// inputs drive); every other component is left untouched. `gains`, when
// non-empty, multiplies the noise on subsystem i by gains[i].
void inject_noise(std::span<double> z_next, double sd, SeededRng& rng, std::size_t order, std::size_t inputs,
                  std::span<const double> gains = {});

// Record r draws from rng.split(r); episode e from rng.split(e). Output is
// therefore independent of the worker count.
TransitionDataset collect_passive(const CanonicalSystem& system, const MixingFunction& g, std::size_t records,
                                  double noise_sd, const SeededRng& rng, const CollectionOptions& options = {},
                                  std::size_t workers = 1);
TransitionDataset collect_active(const CanonicalSystem& system, const MixingFunction& g, std::size_t episodes,
                                 std::size_t t_max, double noise_sd, const SeededRng& rng,
                                 const CollectionOptions& options = {}, std::size_t workers = 1);

// Re-runs collection from the metadata (seed, sizes, options).
TransitionDataset regenerate(const DatasetMetadata& metadata, const CanonicalSystem& system, const MixingFunction& g);

void save_dataset(const TransitionDataset& dataset, const std::filesystem::path& path);
TransitionDataset load_dataset(const std::filesystem::path& path);
// Human-readable export; %.17g keeps doubles round-trippable but the file is
// not meant to be read back.
void export_csv(const TransitionDataset& dataset, const std::filesystem::path& path);

nlohmann::json metadata_to_json(const DatasetMetadata& metadata);
DatasetMetadata metadata_from_json(const nlohmann::json& j);

}  // namespace latentid
