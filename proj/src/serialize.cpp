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

#include "latentid/serialize.hpp"

#include "latentid/archive.hpp"

namespace latentid {

namespace {

const char* head_kind_name(CoefficientHead::Kind kind) {
  switch (kind) {
    case CoefficientHead::Kind::Identity: return "identity";
    case CoefficientHead::Kind::Squash: return "squash";
    case CoefficientHead::Kind::Floor: return "floor";
  }
  return "identity";
}

CoefficientHead::Kind head_kind_from(const std::string& s) {
  if (s == "identity") return CoefficientHead::Kind::Identity;
  if (s == "squash") return CoefficientHead::Kind::Squash;
  if (s == "floor") return CoefficientHead::Kind::Floor;
  fail(ErrorKind::Format, "unknown coefficient head '" + s + "'");
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers) {
    layers.push_back({{"weight", encode_tensor(layer.weight)}, {"bias", encode_tensor(layer.bias)}});
  }
  return {{"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  return guarded("network", [&] {
    Mlp net;
    for (const auto& layer : j.at("layers")) {
      net.layers.push_back({decode_tensor(layer.at("weight")), decode_tensor(layer.at("bias"))});
    }
    return net;
  });
}

nlohmann::json system_to_json(const CanonicalSystem& system) {
  if (const auto* m = std::get_if<LinearCanonicalModel>(&system)) {
    return {{"kind", "linear"},
            {"order", m->order},
            {"inputs", m->inputs},
            {"coefficients", encode_tensor(m->coefficients)},
            {"gains", encode_doubles(m->gains)}};
  }
  const auto& m = std::get<AffineCanonicalModel>(system);
  nlohmann::json heads = nlohmann::json::array();
  for (const auto& h : m.heads) {
    heads.push_back({{"kind", head_kind_name(h.kind)},
                     {"sign", encode_double(h.sign)},
                     {"floor", encode_double(h.floor)},
                     {"extent", encode_double(h.extent)}});
  }
  return {{"kind", "affine"},
          {"order", m.order},
          {"inputs", m.inputs},
          {"floor_a", encode_double(m.floor_a)},
          {"floor_b", encode_double(m.floor_b)},
          {"network", mlp_to_json(m.network)},
          {"heads", heads}};
}

CanonicalSystem system_from_json(const nlohmann::json& j) {
  return guarded("system", [&]() -> CanonicalSystem {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear") {
      LinearCanonicalModel m;
      m.order = j.at("order").get<std::size_t>();
      m.inputs = j.at("inputs").get<std::size_t>();
      m.coefficients = decode_tensor(j.at("coefficients"));
      m.gains = decode_doubles(j.at("gains"));
      m.validate();
      return m;
    }
    if (kind == "affine") {
      AffineCanonicalModel m;
      m.order = j.at("order").get<std::size_t>();
      m.inputs = j.at("inputs").get<std::size_t>();
      m.floor_a = decode_double(j.at("floor_a"));
      m.floor_b = decode_double(j.at("floor_b"));
      m.network = mlp_from_json(j.at("network"));
      for (const auto& h : j.at("heads")) {
        m.heads.push_back({head_kind_from(h.at("kind").get<std::string>()), decode_double(h.at("sign")),
                           decode_double(h.at("floor")), decode_double(h.at("extent"))});
      }
      m.validate();
      return m;
    }
    fail(ErrorKind::Format, "unknown system kind '" + kind + "'");
  });
}

nlohmann::json mixing_to_json(const MixingFunction& g) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : g.layers) {
    layers.push_back({{"weight", encode_tensor(layer.weight)}, {"bias", encode_doubles(layer.bias)}});
  }
  nlohmann::json j = {{"input_dim", g.input_dim},
                      {"output_dim", g.output_dim},
                      {"alpha", encode_double(g.alpha)},
                      {"beta", encode_double(g.beta)},
                      {"sigma_min", encode_double(g.sigma_min)},
                      {"sigma_max", encode_double(g.sigma_max)},
                      {"seed", g.seed},
                      {"layers", layers}};
  if (!g.embedding.empty()) j["embedding"] = encode_tensor(g.embedding);
  return j;
}

MixingFunction mixing_from_json(const nlohmann::json& j) {
  return guarded("mixing", [&] {
    MixingFunction g;
    g.input_dim = j.at("input_dim").get<std::size_t>();
    g.output_dim = j.at("output_dim").get<std::size_t>();
    g.alpha = decode_double(j.at("alpha"));
    g.beta = decode_double(j.at("beta"));
    g.sigma_min = decode_double(j.at("sigma_min"));
    g.sigma_max = decode_double(j.at("sigma_max"));
    g.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& layer : j.at("layers")) {
      g.layers.push_back({decode_tensor(layer.at("weight")), decode_doubles(layer.at("bias"))});
    }
    if (j.contains("embedding")) g.embedding = decode_tensor(j.at("embedding"));
    g.validate();
    return g;
  });
}

nlohmann::json assumptions_to_json(const AssumptionReport& r) {
  nlohmann::json j = {{"pass", r.pass},
                      {"a1_margin", r.a1_margin},
                      {"b_margin", r.b_margin},
                      {"stability_flag", r.stability_flag},
                      {"failures", r.failures},
                      {"warnings", r.warnings},
                      {"thresholds",
                       {{"nonzero", r.thresholds.nonzero},
                        {"singular", r.thresholds.singular},
                        {"spectral_flag", r.thresholds.spectral_flag}}}};
  if (r.sum_margin) j["sum_margin"] = *r.sum_margin;
  if (r.min_singular_i_minus_a) j["min_singular_i_minus_a"] = *r.min_singular_i_minus_a;
  if (r.spectral_radius) j["spectral_radius"] = *r.spectral_radius;
  if (r.equilibrium_residual && std::isfinite(*r.equilibrium_residual)) {
    j["equilibrium_residual"] = *r.equilibrium_residual;
  }
  return j;
}

void save_system(const std::filesystem::path& path, const SystemDocument& doc) {
  nlohmann::json j = {{"format", "latentid.system"},
                      {"version", 1},
                      {"seed", doc.seed},
                      {"system", system_to_json(doc.system)},
                      {"assumptions", assumptions_to_json(check_assumptions(doc.system))}};
  if (doc.mixing) j["mixing"] = mixing_to_json(*doc.mixing);
  write_text_file(path, j.dump(2) + "\n");
}

SystemDocument load_system(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return guarded("system document", [&] {
    if (j.at("format").get<std::string>() != "latentid.system") fail(ErrorKind::Format, "not a system document");
    if (j.at("version").get<int>() != 1) fail(ErrorKind::Format, "unsupported system document version");
    SystemDocument doc{system_from_json(j.at("system")), j.at("seed").get<std::uint64_t>(), std::nullopt};
    if (j.contains("mixing")) doc.mixing = mixing_from_json(j.at("mixing"));
    return doc;
  });
}

}  // namespace latentid
