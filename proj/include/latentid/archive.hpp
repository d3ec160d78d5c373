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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latentid/tensor.hpp"

namespace latentid {

// Binary container shared by datasets and trained models:
//
//   "LATENTID" | u32 version | u64 header length | header JSON
//   | array payloads (little-endian float64, row-major, header order)
//   | u64 FNV-1a checksum of every preceding byte
//
// The header carries {"kind", "metadata", "arrays": [{"name","rows","cols"}]}.
struct Archive {
  std::string kind;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor2>> arrays;

  const Tensor2& array(const std::string& name) const;
  bool has(const std::string& name) const;
  void add(std::string name, Tensor2 value) { arrays.emplace_back(std::move(name), std::move(value)); }
};

inline constexpr std::uint32_t kArchiveVersion = 1;

std::string encode_archive(const Archive& archive);
Archive decode_archive(const std::string& bytes, const std::string& expected_kind = {});
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path, const std::string& expected_kind = {});

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept;

// Exact text encoding of doubles as C99 hex-floats ("0x1.8p+1").
std::string encode_double(double v);
double decode_double(const nlohmann::json& j);
nlohmann::json encode_tensor(const Tensor2& t);
Tensor2 decode_tensor(const nlohmann::json& j);
nlohmann::json encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(const nlohmann::json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace latentid
