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

#include <json.hpp>

#include "latentid/canonical.hpp"
#include "latentid/mixing.hpp"

namespace latentid {

// JSON documents for ground-truth systems and mixings. Every float is a
// hex-float string, so a save/load cycle is bit-exact.
nlohmann::json system_to_json(const CanonicalSystem& system);
CanonicalSystem system_from_json(const nlohmann::json& j);
nlohmann::json mixing_to_json(const MixingFunction& g);
MixingFunction mixing_from_json(const nlohmann::json& j);
nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json assumptions_to_json(const AssumptionReport& report);

// File wrapper: {"format": "latentid.system", "version": 1, "seed", "system",
// "assumptions", "mixing"?}.
struct SystemDocument {
  CanonicalSystem system;
  std::uint64_t seed = 0;
  std::optional<MixingFunction> mixing;
};

void save_system(const std::filesystem::path& path, const SystemDocument& doc);
SystemDocument load_system(const std::filesystem::path& path);

}  // namespace latentid
