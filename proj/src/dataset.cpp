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

#include "latentid/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include "latentid/archive.hpp"
#include "latentid/parallel.hpp"

namespace latentid {

namespace {

constexpr const char* kDatasetKind = "latentid.dataset";

std::vector<double> draw_input(SeededRng& rng, std::size_t d, const CollectionOptions& options) {
  std::vector<double> u(d, 0.0);
  for (double& v : u) {
    if (rng.bernoulli(options.input_zero_probability)) continue;
    v = rng.uniform(-options.input_range, options.input_range);
  }
  return u;
}

std::vector<double> gains_at(const CanonicalSystem& system, std::span<const double> z) {
  if (const auto* linear = std::get_if<LinearCanonicalModel>(&system)) return linear->gains;
  return std::get<AffineCanonicalModel>(system).evaluate(z).gains;
}

LatentState noisy_step(const CanonicalSystem& system, std::span<const double> z, std::span<const double> u,
                       double noise_sd, SeededRng& rng, const CollectionOptions& options) {
  LatentState next = step(system, z, u);
  if (noise_sd > 0.0) {
    const std::vector<double> gains = options.noise_scaled_by_gain ? gains_at(system, z) : std::vector<double>{};
    inject_noise(next, noise_sd, rng, system_order(system), input_dim(system), gains);
  }
  return next;
}

bool finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

struct Transition {
  LatentState z;
  std::vector<double> u;
  LatentState z_next;
};

TransitionDataset assemble(const std::vector<Transition>& records, const MixingFunction& g, DatasetMetadata meta) {
  const std::size_t n = records.size();
  const std::size_t nd = meta.order * meta.inputs;
  ObservedTransitions obs{Tensor2(n, g.output_dim), Tensor2(n, meta.inputs), Tensor2(n, g.output_dim)};
  HiddenLatents hidden{Tensor2(n, nd), Tensor2(n, nd)};
  for (std::size_t r = 0; r < n; ++r) {
    const Transition& t = records[r];
    std::copy(t.z.begin(), t.z.end(), hidden.z.row_span(r).begin());
    std::copy(t.z_next.begin(), t.z_next.end(), hidden.z_next.row_span(r).begin());
    std::copy(t.u.begin(), t.u.end(), obs.u.row_span(r).begin());
    const auto x = g.apply(t.z);
    const auto xn = g.apply(t.z_next);
    std::copy(x.begin(), x.end(), obs.x.row_span(r).begin());
    std::copy(xn.begin(), xn.end(), obs.x_next.row_span(r).begin());
  }
  if (!obs.x.all_finite() || !obs.x_next.all_finite()) fail(ErrorKind::NonFinite, "observation overflowed");
  meta.observed_dim = g.output_dim;
  return TransitionDataset(std::move(obs), std::move(hidden), std::move(meta));
}

void check_noise(double sd) {
  if (!(sd >= 0.0) || !std::isfinite(sd)) fail(ErrorKind::InvalidArgument, "noise sd must be finite and >= 0");
}

}  // namespace

std::string protocol_name(Protocol p) { return p == Protocol::Passive ? "PAS" : "ACT"; }

Protocol protocol_from_name(const std::string& name) {
  if (name == "PAS" || name == "pas" || name == "passive") return Protocol::Passive;
  if (name == "ACT" || name == "act" || name == "active") return Protocol::Active;
  fail(ErrorKind::Validation, "unknown protocol '" + name + "' (expected PAS or ACT)");
}

TransitionDataset::TransitionDataset(ObservedTransitions observed, HiddenLatents hidden, DatasetMetadata metadata)
    : observed_(std::move(observed)), hidden_(std::move(hidden)), metadata_(std::move(metadata)) {
  const std::size_t n = observed_.x.rows();
  if (observed_.u.rows() != n || observed_.x_next.rows() != n || hidden_.z.rows() != n || hidden_.z_next.rows() != n) {
    fail(ErrorKind::ShapeMismatch, "dataset arrays disagree on record count");
  }
}

void inject_noise(std::span<double> z_next, double sd, SeededRng& rng, std::size_t order, std::size_t inputs,
                  std::span<const double> gains) {
  check_noise(sd);
  if (z_next.size() != order * inputs) fail(ErrorKind::ShapeMismatch, "noise target has the wrong length");
  if (!gains.empty() && gains.size() != inputs) fail(ErrorKind::ShapeMismatch, "noise gain vector has the wrong length");
  if (sd == 0.0) return;
  for (std::size_t i = 0; i < inputs; ++i) {
    const double scale = gains.empty() ? 1.0 : gains[i];
    z_next[i * order + order - 1] += scale * rng.normal(0.0, sd);
  }
}

TransitionDataset collect_passive(const CanonicalSystem& system, const MixingFunction& g, std::size_t records,
                                  double noise_sd, const SeededRng& rng, const CollectionOptions& options,
                                  std::size_t workers) {
  if (records < 1) fail(ErrorKind::InvalidArgument, "passive collection needs at least one record");
  check_noise(noise_sd);
  const std::size_t nd = state_dim(system);
  const std::size_t d = input_dim(system);
  if (g.input_dim != nd) fail(ErrorKind::ShapeMismatch, "mixing input dimension does not match the system");
  std::vector<Transition> out(records);
  parallel_for(records, workers, [&](std::size_t r) {
    SeededRng local = rng.split(r);
    Transition t;
    t.z.assign(nd, 0.0);
    if (options.initial_range > 0.0) {
      for (double& v : t.z) v = local.uniform(-options.initial_range, options.initial_range);
    }
    t.u = draw_input(local, d, options);
    t.z_next = noisy_step(system, t.z, t.u, noise_sd, local, options);
    if (!finite(t.z_next)) fail(ErrorKind::NonFinite, "passive record " + std::to_string(r) + " is not finite");
    out[r] = std::move(t);
  });
  DatasetMetadata meta;
  meta.protocol = Protocol::Passive;
  meta.seed = rng.seed();
  meta.noise_sd = noise_sd;
  meta.requested = records;
  meta.order = system_order(system);
  meta.inputs = d;
  meta.options = options;
  return assemble(out, g, std::move(meta));
}

TransitionDataset collect_active(const CanonicalSystem& system, const MixingFunction& g, std::size_t episodes,
                                 std::size_t t_max, double noise_sd, const SeededRng& rng,
                                 const CollectionOptions& options, std::size_t workers) {
  if (episodes < 1) fail(ErrorKind::InvalidArgument, "active collection needs at least one episode");
  if (t_max < 2) fail(ErrorKind::InvalidArgument, "active collection needs T_max >= 2");
  check_noise(noise_sd);
  const std::size_t nd = state_dim(system);
  const std::size_t d = input_dim(system);
  if (g.input_dim != nd) fail(ErrorKind::ShapeMismatch, "mixing input dimension does not match the system");
  const std::size_t last_t = options.record_final_step ? t_max : t_max - 1;
  std::vector<std::optional<std::vector<Transition>>> per_episode(episodes);
  parallel_for(episodes, workers, [&](std::size_t e) {
    SeededRng local = rng.split(e);
    std::vector<LatentState> states{LatentState(nd, 0.0)};
    std::vector<std::vector<double>> inputs;
    for (std::size_t t = 0; t <= last_t; ++t) {
      inputs.push_back(draw_input(local, d, options));
      LatentState next = noisy_step(system, states.back(), inputs.back(), noise_sd, local, options);
      if (!finite(next)) return;  // diverged: discard the whole episode
      states.push_back(std::move(next));
    }
    std::vector<Transition> recs;
    for (std::size_t t = 1; t <= last_t; ++t) recs.push_back({states[t], inputs[t], states[t + 1]});
    per_episode[e] = std::move(recs);
  });
  std::vector<Transition> out;
  std::size_t discarded = 0;
  for (auto& ep : per_episode) {
    if (!ep) {
      ++discarded;
      continue;
    }
    for (auto& t : *ep) out.push_back(std::move(t));
  }
  if (out.empty()) fail(ErrorKind::Divergence, "every active episode diverged");
  DatasetMetadata meta;
  meta.protocol = Protocol::Active;
  meta.seed = rng.seed();
  meta.noise_sd = noise_sd;
  meta.requested = episodes;
  meta.t_max = t_max;
  meta.discarded_episodes = discarded;
  meta.order = system_order(system);
  meta.inputs = d;
  meta.options = options;
  return assemble(out, g, std::move(meta));
}

TransitionDataset regenerate(const DatasetMetadata& m, const CanonicalSystem& system, const MixingFunction& g) {
  const SeededRng rng(m.seed);
  TransitionDataset ds = m.protocol == Protocol::Passive
                             ? collect_passive(system, g, m.requested, m.noise_sd, rng, m.options)
                             : collect_active(system, g, m.requested, m.t_max, m.noise_sd, rng, m.options);
  DatasetMetadata meta = ds.metadata();
  meta.system_id = m.system_id;
  meta.mixing_id = m.mixing_id;
  return TransitionDataset(ds.observed(), ds.hidden(), std::move(meta));
}

nlohmann::json metadata_to_json(const DatasetMetadata& m) {
  return {{"protocol", protocol_name(m.protocol)},
          {"seed", m.seed},
          {"noise_sd", encode_double(m.noise_sd)},
          {"requested", m.requested},
          {"t_max", m.t_max},
          {"discarded_episodes", m.discarded_episodes},
          {"order", m.order},
          {"inputs", m.inputs},
          {"observed_dim", m.observed_dim},
          {"system_id", m.system_id},
          {"mixing_id", m.mixing_id},
          {"options",
           {{"input_zero_probability", encode_double(m.options.input_zero_probability)},
            {"input_range", encode_double(m.options.input_range)},
            {"initial_range", encode_double(m.options.initial_range)},
            {"record_final_step", m.options.record_final_step},
            {"noise_scaled_by_gain", m.options.noise_scaled_by_gain}}}};
}

DatasetMetadata metadata_from_json(const nlohmann::json& j) {
  try {
    DatasetMetadata m;
    m.protocol = protocol_from_name(j.at("protocol").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.noise_sd = decode_double(j.at("noise_sd"));
    m.requested = j.at("requested").get<std::size_t>();
    m.t_max = j.at("t_max").get<std::size_t>();
    m.discarded_episodes = j.at("discarded_episodes").get<std::size_t>();
    m.order = j.at("order").get<std::size_t>();
    m.inputs = j.at("inputs").get<std::size_t>();
    m.observed_dim = j.at("observed_dim").get<std::size_t>();
    m.system_id = j.at("system_id").get<std::string>();
    m.mixing_id = j.at("mixing_id").get<std::string>();
    const auto& o = j.at("options");
    m.options.input_zero_probability = decode_double(o.at("input_zero_probability"));
    m.options.input_range = decode_double(o.at("input_range"));
    m.options.initial_range = decode_double(o.at("initial_range"));
    m.options.record_final_step = o.at("record_final_step").get<bool>();
    m.options.noise_scaled_by_gain = o.at("noise_scaled_by_gain").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed dataset metadata: ") + e.what());
  }
}

void save_dataset(const TransitionDataset& ds, const std::filesystem::path& path) {
  Archive a;
  a.kind = kDatasetKind;
  a.metadata = metadata_to_json(ds.metadata());
  a.add("x", ds.observed().x);
  a.add("u", ds.observed().u);
  a.add("x_next", ds.observed().x_next);
  a.add("z", ds.hidden().z);
  a.add("z_next", ds.hidden().z_next);
  write_archive(path, a);
}

TransitionDataset load_dataset(const std::filesystem::path& path) {
  const Archive a = read_archive(path, kDatasetKind);
  return TransitionDataset(ObservedTransitions{a.array("x"), a.array("u"), a.array("x_next")},
                           HiddenLatents{a.array("z"), a.array("z_next")}, metadata_from_json(a.metadata));
}

void export_csv(const TransitionDataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  const auto& o = ds.observed();
  const auto& h = ds.hidden();
  auto header = [&](const char* prefix, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) out << ',' << prefix << c;
  };
  out << "record";
  header("x", o.x.cols());
  header("u", o.u.cols());
  header("x_next", o.x_next.cols());
  header("z", h.z.cols());
  header("z_next", h.z_next.cols());
  out << '\n';
  char buf[40];
  auto row = [&](const Tensor2& t, std::size_t r) {
    for (double v : t.row_span(r)) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
  };
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out << r;
    row(o.x, r);
    row(o.u, r);
    row(o.x_next, r);
    row(h.z, r);
    row(h.z_next, r);
    out << '\n';
  }
}

}  // namespace latentid
