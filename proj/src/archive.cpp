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

#include "latentid/archive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace latentid {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'T', 'E', 'N', 'T', 'I', 'D'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

void require(const std::string& bytes, std::size_t offset, std::size_t need, const std::string& section) {
  if (bytes.size() < offset + need) {
    const std::size_t have = bytes.size() > offset ? bytes.size() - offset : 0;
    fail(ErrorKind::Format, "truncated container: " + section + " needs " + std::to_string(need) + " bytes, found " +
                                std::to_string(have));
  }
}

}  // namespace

bool Archive::has(const std::string& name) const {
  for (const auto& [n, v] : arrays) {
    if (n == name) return true;
  }
  return false;
}

const Tensor2& Archive::array(const std::string& name) const {
  for (const auto& [n, t] : arrays) {
    if (n == name) return t;
  }
  fail(ErrorKind::Format, "container has no array named '" + name + "'");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) noexcept {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string encode_archive(const Archive& archive) {
  nlohmann::json header;
  header["kind"] = archive.kind;
  header["metadata"] = archive.metadata;
  header["arrays"] = nlohmann::json::array();
  for (const auto& [name, t] : archive.arrays) {
    header["arrays"].push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  }
  const std::string header_text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kArchiveVersion);
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& [name, t] : archive.arrays) {
    for (double v : t.data()) put_le<double>(out, v);
  }
  put_le<std::uint64_t>(out, fnv1a64(out));
  return out;
}

Archive decode_archive(const std::string& bytes, const std::string& expected_kind) {
  require(bytes, 0, sizeof(kMagic), "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) fail(ErrorKind::Format, "not a latentid container");
  std::size_t offset = sizeof(kMagic);
  require(bytes, offset, 4, "version");
  const auto version = get_le<std::uint32_t>(bytes, offset);
  offset += 4;
  if (version != kArchiveVersion) {
    fail(ErrorKind::Format, "unsupported container version " + std::to_string(version) + " (expected " +
                                std::to_string(kArchiveVersion) + ")");
  }
  require(bytes, offset, 8, "header length");
  const auto header_len = get_le<std::uint64_t>(bytes, offset);
  offset += 8;
  require(bytes, offset, header_len, "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(offset, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed container header: ") + e.what());
  }
  offset += header_len;
  Archive archive;
  try {
    archive.kind = header.at("kind").get<std::string>();
    archive.metadata = header.at("metadata");
    for (const auto& entry : header.at("arrays")) {
      const auto name = entry.at("name").get<std::string>();
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      require(bytes, offset, rows * cols * sizeof(double), "array '" + name + "'");
      Tensor2 t(rows, cols);
      for (double& v : t.data()) {
        v = get_le<double>(bytes, offset);
        offset += sizeof(double);
      }
      archive.arrays.emplace_back(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed container header: ") + e.what());
  }
  require(bytes, offset, 8, "checksum");
  const auto stored = get_le<std::uint64_t>(bytes, offset);
  if (stored != fnv1a64(std::string_view(bytes.data(), offset))) fail(ErrorKind::Format, "container checksum mismatch");
  if (offset + 8 != bytes.size()) fail(ErrorKind::Format, "trailing bytes after container checksum");
  if (!expected_kind.empty() && archive.kind != expected_kind) {
    fail(ErrorKind::Format, "container holds '" + archive.kind + "', expected '" + expected_kind + "'");
  }
  return archive;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  write_text_file(path, encode_archive(archive));
}

Archive read_archive(const std::filesystem::path& path, const std::string& expected_kind) {
  return decode_archive(read_text_file(path), expected_kind);
}

std::string encode_double(double v) {
  if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "cannot serialise a non-finite value");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double decode_double(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) fail(ErrorKind::Format, "expected a hex-float string");
  const std::string s = j.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') fail(ErrorKind::Format, "malformed float '" + s + "'");
  return v;
}

nlohmann::json encode_doubles(std::span<const double> values) {
  nlohmann::json out = nlohmann::json::array();
  for (double v : values) out.push_back(encode_double(v));
  return out;
}

std::vector<double> decode_doubles(const nlohmann::json& j) {
  if (!j.is_array()) fail(ErrorKind::Format, "expected an array of floats");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(decode_double(v));
  return out;
}

nlohmann::json encode_tensor(const Tensor2& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", encode_doubles(t.data())}};
}

Tensor2 decode_tensor(const nlohmann::json& j) {
  try {
    return Tensor2(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), decode_doubles(j.at("data")));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed tensor: ") + e.what());
  }
}

}  // namespace latentid
