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

#include "latentid/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <toml.hpp>

#include "latentid/archive.hpp"
#include "latentid/parallel.hpp"
#include "latentid/serialize.hpp"

namespace latentid {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  fail(ErrorKind::Validation, field + " " + why);
}

// Reads `section.key` into `field` when present, rejecting wrong types.
template <typename T>
void read_field(const json& section, const std::string& prefix, const char* key, T& field) {
  if (!section.contains(key)) return;
  const json& v = section.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) invalid(prefix + key, "must be a boolean");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) invalid(prefix + key, "must be a number");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) invalid(prefix + key, "must be an integer");
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
      invalid(prefix + key, "must be non-negative");
    }
  } else {
    if (!v.is_string()) invalid(prefix + key, "must be a string");
  }
  field = v.get<T>();
}

void reject_unknown(const json& section, const std::string& prefix, std::initializer_list<const char*> known) {
  if (!section.is_object()) invalid(prefix.empty() ? "config" : prefix.substr(0, prefix.size() - 1), "must be a table");
  for (const auto& item : section.items()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; });
    if (!ok) invalid(prefix + item.key(), "is not a recognised field");
  }
}

json section_or_empty(const json& j, const char* key) {
  return j.contains(key) ? j.at(key) : json::object();
}

std::uint64_t required_seed(const json& section, const std::string& prefix) {
  if (!section.contains("seed")) invalid(prefix + "seed", "is required (seeds are never implicit)");
  std::uint64_t seed = 0;
  read_field(section, prefix, "seed", seed);
  return seed;
}

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return json(v->get());
  if (const auto* v = node.as_floating_point()) return json(v->get());
  if (const auto* v = node.as_boolean()) return json(v->get());
  if (const auto* v = node.as_string()) return json(v->get());
  fail(ErrorKind::Validation, "unsupported TOML value type (dates and times are not used)");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string fmt_sigma(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

double mean_of(const std::vector<EvalReport>& runs, double EvalReport::*field) {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : runs) s += r.*field;
  return s / static_cast<double>(runs.size());
}

}  // namespace

std::string system_kind_name(SystemKind kind) { return kind == SystemKind::Linear ? "linear" : "affine"; }
std::string model_kind_name(ModelKind kind) { return kind == ModelKind::Canonical ? "canonical" : "integrator"; }

void validate(const ExperimentConfig& c) {
  if (c.schema_version != kConfigSchemaVersion) {
    invalid("schema_version", "is " + std::to_string(c.schema_version) + ", this build reads version " +
                                  std::to_string(kConfigSchemaVersion));
  }
  if (c.order < 1) invalid("system.order", "must be >= 1");
  if (c.inputs < 1) invalid("system.inputs", "must be >= 1");
  if (c.system_attempts < 1) invalid("system.attempts", "must be >= 1");
  if (!(c.affine.floor_a > 0.0)) invalid("system.floor_a", "must be > 0");
  if (!(c.affine.floor_b > 0.0)) invalid("system.floor_b", "must be > 0");
  if (!(c.affine.coefficient_bound > c.affine.floor_a)) invalid("system.coefficient_bound", "must exceed floor_a");
  if (c.affine.hidden_width < 1) invalid("system.hidden_width", "must be >= 1");
  const std::size_t nd = c.order * c.inputs;
  if (c.observed_dim != 0 && c.observed_dim < nd) {
    invalid("mixing.observed_dim", "must be 0 or >= n*d = " + std::to_string(nd));
  }
  if (c.mixing.layers < 1) invalid("mixing.layers", "must be >= 1");
  if (!(c.mixing.sigma_min > 0.0)) invalid("mixing.sigma_min", "must be > 0");
  if (!(c.mixing.sigma_max >= c.mixing.sigma_min)) invalid("mixing.sigma_max", "must be >= sigma_min");
  if (!(c.mixing.alpha >= 0.0) || !(c.mixing.alpha * c.mixing.beta < 1.0)) {
    invalid("mixing.alpha", "must satisfy 0 <= alpha * beta < 1");
  }
  if (!(c.mixing.beta > 0.0)) invalid("mixing.beta", "must be > 0");
  if (!(c.mixing.bias_scale >= 0.0)) invalid("mixing.bias_scale", "must be >= 0");
  if (!(c.noise_sd >= 0.0) || !std::isfinite(c.noise_sd)) invalid("data.noise_sd", "must be a finite value >= 0");
  if (c.protocol == Protocol::Passive && c.records < 1) invalid("data.records", "must be >= 1");
  if (c.protocol == Protocol::Active && c.episodes < 1) invalid("data.episodes", "must be >= 1");
  if (c.t_max < 2) invalid("data.t_max", "must be >= 2");
  if (c.eval_records < 3) invalid("data.eval_records", "must be >= 3");
  const auto& o = c.collection;
  if (!(o.input_zero_probability >= 0.0 && o.input_zero_probability <= 1.0)) {
    invalid("data.input_zero_probability", "must lie in [0, 1]");
  }
  if (!(o.input_range > 0.0)) invalid("data.input_range", "must be > 0");
  if (!(o.initial_range >= 0.0)) invalid("data.initial_range", "must be >= 0");
  const auto& t = c.training;
  if (t.batch_size < 1) invalid("training.batch_size", "must be >= 1");
  if (!(t.learning_rate >= 0.0)) invalid("training.learning_rate", "must be >= 0");
  if (!(t.final_learning_rate >= 0.0)) invalid("training.final_learning_rate", "must be >= 0");
  if (!(t.beta1 >= 0.0 && t.beta1 < 1.0)) invalid("training.beta1", "must lie in [0, 1)");
  if (!(t.beta2 >= 0.0 && t.beta2 < 1.0)) invalid("training.beta2", "must lie in [0, 1)");
  if (!(t.epsilon > 0.0)) invalid("training.epsilon", "must be > 0");
  if (t.encoder_width < 1) invalid("training.encoder_width", "must be >= 1");
  if (t.coefficient_width < 1) invalid("training.coefficient_width", "must be >= 1");
  if (!(t.fixed_gain != 0.0) || !std::isfinite(t.fixed_gain)) invalid("training.fixed_gain", "must be finite and nonzero");
  if (!(t.gain_floor > 0.0)) invalid("training.gain_floor", "must be > 0");
  if (t.gain_sign != 1.0 && t.gain_sign != -1.0) invalid("training.gain_sign", "must be +1 or -1");
  if (t.masked_coefficients && c.system_kind != SystemKind::Affine) {
    invalid("training.masked_coefficients", "applies to affine systems only");
  }
  if (t.eval_records < 1) invalid("training.eval_records", "must be >= 1");
}

json config_to_json(const ExperimentConfig& c) {
  json training = training_config_to_json(c.training);
  training["model"] = model_kind_name(c.model);
  training["seed"] = c.training_seed;
  return {{"schema_version", c.schema_version},
          {"name", c.name},
          {"output_dir", c.output_dir.string()},
          {"write_dataset", c.write_dataset},
          {"system",
           {{"kind", system_kind_name(c.system_kind)},
            {"order", c.order},
            {"inputs", c.inputs},
            {"seed", c.system_seed},
            {"attempts", c.system_attempts},
            {"floor_a", c.affine.floor_a},
            {"floor_b", c.affine.floor_b},
            {"coefficient_bound", c.affine.coefficient_bound},
            {"hidden_width", c.affine.hidden_width}}},
          {"mixing",
           {{"observed_dim", c.observed_dim},
            {"seed", c.mixing_seed},
            {"layers", c.mixing.layers},
            {"sigma_min", c.mixing.sigma_min},
            {"sigma_max", c.mixing.sigma_max},
            {"alpha", c.mixing.alpha},
            {"beta", c.mixing.beta},
            {"bias_scale", c.mixing.bias_scale}}},
          {"data",
           {{"protocol", protocol_name(c.protocol)},
            {"noise_sd", c.noise_sd},
            {"seed", c.data_seed},
            {"records", c.records},
            {"episodes", c.episodes},
            {"t_max", c.t_max},
            {"eval_records", c.eval_records},
            {"input_zero_probability", c.collection.input_zero_probability},
            {"input_range", c.collection.input_range},
            {"initial_range", c.collection.initial_range},
            {"record_final_step", c.collection.record_final_step},
            {"noise_scaled_by_gain", c.collection.noise_scaled_by_gain}}},
          {"training", training}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  reject_unknown(j, "", {"schema_version", "name", "output_dir", "write_dataset", "system", "mixing", "data", "training"});
  if (!j.contains("schema_version")) invalid("schema_version", "is required");
  read_field(j, "", "schema_version", c.schema_version);
  read_field(j, "", "name", c.name);
  std::string out;
  read_field(j, "", "output_dir", out);
  c.output_dir = out;
  read_field(j, "", "write_dataset", c.write_dataset);

  const json sys = section_or_empty(j, "system");
  reject_unknown(sys, "system.",
                 {"kind", "order", "inputs", "seed", "attempts", "floor_a", "floor_b", "coefficient_bound", "hidden_width"});
  std::string kind = "linear";
  read_field(sys, "system.", "kind", kind);
  if (kind == "linear") {
    c.system_kind = SystemKind::Linear;
  } else if (kind == "affine") {
    c.system_kind = SystemKind::Affine;
  } else {
    invalid("system.kind", "must be 'linear' or 'affine', got '" + kind + "'");
  }
  read_field(sys, "system.", "order", c.order);
  read_field(sys, "system.", "inputs", c.inputs);
  c.system_seed = required_seed(sys, "system.");
  read_field(sys, "system.", "attempts", c.system_attempts);
  read_field(sys, "system.", "floor_a", c.affine.floor_a);
  read_field(sys, "system.", "floor_b", c.affine.floor_b);
  read_field(sys, "system.", "coefficient_bound", c.affine.coefficient_bound);
  read_field(sys, "system.", "hidden_width", c.affine.hidden_width);

  const json mix = section_or_empty(j, "mixing");
  reject_unknown(mix, "mixing.",
                 {"observed_dim", "seed", "layers", "sigma_min", "sigma_max", "alpha", "beta", "bias_scale"});
  read_field(mix, "mixing.", "observed_dim", c.observed_dim);
  c.mixing_seed = required_seed(mix, "mixing.");
  read_field(mix, "mixing.", "layers", c.mixing.layers);
  read_field(mix, "mixing.", "sigma_min", c.mixing.sigma_min);
  read_field(mix, "mixing.", "sigma_max", c.mixing.sigma_max);
  read_field(mix, "mixing.", "alpha", c.mixing.alpha);
  read_field(mix, "mixing.", "beta", c.mixing.beta);
  read_field(mix, "mixing.", "bias_scale", c.mixing.bias_scale);

  const json data = section_or_empty(j, "data");
  reject_unknown(data, "data.",
                 {"protocol", "noise_sd", "seed", "records", "episodes", "t_max", "eval_records",
                  "input_zero_probability", "input_range", "initial_range", "record_final_step",
                  "noise_scaled_by_gain"});
  std::string protocol = "PAS";
  read_field(data, "data.", "protocol", protocol);
  if (protocol != "PAS" && protocol != "ACT") invalid("data.protocol", "must be 'PAS' or 'ACT', got '" + protocol + "'");
  c.protocol = protocol_from_name(protocol);
  read_field(data, "data.", "noise_sd", c.noise_sd);
  c.data_seed = required_seed(data, "data.");
  read_field(data, "data.", "records", c.records);
  read_field(data, "data.", "episodes", c.episodes);
  read_field(data, "data.", "t_max", c.t_max);
  read_field(data, "data.", "eval_records", c.eval_records);
  read_field(data, "data.", "input_zero_probability", c.collection.input_zero_probability);
  read_field(data, "data.", "input_range", c.collection.input_range);
  read_field(data, "data.", "initial_range", c.collection.initial_range);
  read_field(data, "data.", "record_final_step", c.collection.record_final_step);
  read_field(data, "data.", "noise_scaled_by_gain", c.collection.noise_scaled_by_gain);

  const json tr = section_or_empty(j, "training");
  reject_unknown(tr, "training.",
                 {"model", "seed", "steps", "batch_size", "learning_rate", "final_learning_rate", "beta1", "beta2",
                  "epsilon", "encoder_width", "encoder_skip", "encoder_leak", "coefficient_width", "fixed_gain", "gain_floor", "gain_sign",
                  "masked_coefficients", "eval_every", "eval_records", "trace_every"});
  std::string model = "canonical";
  read_field(tr, "training.", "model", model);
  if (model == "canonical") {
    c.model = ModelKind::Canonical;
  } else if (model == "integrator") {
    c.model = ModelKind::Integrator;
  } else {
    invalid("training.model", "must be 'canonical' or 'integrator', got '" + model + "'");
  }
  c.training_seed = required_seed(tr, "training.");
  auto& t = c.training;
  read_field(tr, "training.", "steps", t.steps);
  read_field(tr, "training.", "batch_size", t.batch_size);
  read_field(tr, "training.", "learning_rate", t.learning_rate);
  read_field(tr, "training.", "final_learning_rate", t.final_learning_rate);
  read_field(tr, "training.", "beta1", t.beta1);
  read_field(tr, "training.", "beta2", t.beta2);
  read_field(tr, "training.", "epsilon", t.epsilon);
  read_field(tr, "training.", "encoder_width", t.encoder_width);
  read_field(tr, "training.", "encoder_skip", t.encoder_skip);
  read_field(tr, "training.", "encoder_leak", t.encoder_leak);
  read_field(tr, "training.", "coefficient_width", t.coefficient_width);
  read_field(tr, "training.", "fixed_gain", t.fixed_gain);
  read_field(tr, "training.", "gain_floor", t.gain_floor);
  read_field(tr, "training.", "gain_sign", t.gain_sign);
  read_field(tr, "training.", "masked_coefficients", t.masked_coefficients);
  read_field(tr, "training.", "eval_every", t.eval_every);
  read_field(tr, "training.", "eval_records", t.eval_records);
  read_field(tr, "training.", "trace_every", t.trace_every);
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::string& text, bool is_toml) {
  json j;
  if (is_toml) {
    try {
      j = toml_to_json(toml::parse(text));
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
      fail(ErrorKind::Format, msg.str());
    }
  } else {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Format, std::string("JSON parse error: ") + e.what());
    }
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path), path.extension() == ".toml");
}

std::string config_hash(const ExperimentConfig& config) {
  json j = config_to_json(config);
  j.erase("output_dir");
  j.erase("write_dataset");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

namespace {

CanonicalSystem sample_system(const ExperimentConfig& c) {
  const SeededRng root(c.system_seed);
  std::vector<std::string> reasons;
  for (std::size_t attempt = 0; attempt < c.system_attempts; ++attempt) {
    SeededRng rng = root.split(attempt);
    if (c.system_kind == SystemKind::Linear) {
      return sample_random_linear(c.order, c.inputs, rng);
    }
    AffineCanonicalModel m = sample_random_affine(c.order, c.inputs, rng, c.affine);
    const AssumptionReport report = check_assumptions(m);
    if (report.pass) return m;
    reasons.push_back(report.failures.empty() ? "unspecified" : report.failures.front());
  }
  fail(ErrorKind::Assumption, "no sampled system satisfied the assumptions after " +
                                  std::to_string(c.system_attempts) + " attempts; last failure: " + reasons.back());
}

TransitionDataset collect(const ExperimentConfig& c, const CanonicalSystem& system, const MixingFunction& g,
                          std::size_t amount, const SeededRng& rng, std::size_t workers) {
  if (c.protocol == Protocol::Passive) {
    return collect_passive(system, g, amount, c.noise_sd, rng, c.collection, workers);
  }
  return collect_active(system, g, amount, c.t_max, c.noise_sd, rng, c.collection, workers);
}

}  // namespace

RunResult run(const ExperimentConfig& config, std::size_t workers) {
  validate(config);
  const std::size_t nd = config.order * config.inputs;
  RunResult result{{}, sample_system(config), {}, config_hash(config)};

  SeededRng mixing_rng(config.mixing_seed);
  const MixingFunction g =
      sample_mixing(nd, config.observed_dim == 0 ? nd : config.observed_dim, mixing_rng, config.mixing);

  const SeededRng data_rng(config.data_seed);
  const std::size_t per_episode = config.t_max - 1 + (config.collection.record_final_step ? 1 : 0);
  const std::size_t train_amount = config.protocol == Protocol::Passive ? config.records : config.episodes;
  const std::size_t eval_amount = config.protocol == Protocol::Passive
                                      ? config.eval_records
                                      : (config.eval_records + per_episode - 1) / per_episode;
  const TransitionDataset train_data = collect(config, result.system, g, train_amount, data_rng.split(0), workers);
  const TransitionDataset eval_data = collect(config, result.system, g, eval_amount, data_rng.split(1), workers);

  TrainingProblem problem{DynamicsKind::Linear, config.order, config.inputs};
  if (config.model == ModelKind::Integrator) {
    problem.kind = DynamicsKind::Integrator;
  } else if (config.system_kind == SystemKind::Affine) {
    problem.kind = DynamicsKind::Affine;
  }
  result.model = train(train_data.observed(), problem, config.training, SeededRng(config.training_seed));
  result.report = evaluate(result.model, eval_data, result.system);
  result.report.metadata["config_hash"] = result.config_hash;
  result.report.metadata["eval_dataset"] = metadata_to_json(eval_data.metadata());
  result.report.metadata["dataset"] = metadata_to_json(train_data.metadata());

  if (!config.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + config.output_dir.string() + ": " + ec.message());
    save_system(config.output_dir / "system.json", SystemDocument{result.system, config.system_seed, g});
    if (config.write_dataset) save_dataset(train_data, config.output_dir / "dataset.bin");
    save_trained_model(result.model, config.output_dir / "model.bin");
    write_trace_csv(result.model.trace, config.output_dir / "trace.csv");
    write_text_file(config.output_dir / "report.json", run_report_json(config, result).dump(2) + "\n");
  }
  return result;
}

json run_report_json(const ExperimentConfig& config, const RunResult& result) {
  const auto& trace = result.model.trace;
  json cfg = config_to_json(config);
  cfg.erase("output_dir");
  return {{"format", "latentid.report"},
          {"version", 1},
          {"config_hash", result.config_hash},
          {"seeds",
           {{"system", config.system_seed},
            {"mixing", config.mixing_seed},
            {"data", config.data_seed},
            {"training", config.training_seed}}},
          {"config", cfg},
          {"assumptions", assumptions_to_json(check_assumptions(result.system))},
          {"training",
           {{"initial_loss", trace.initial_loss},
            {"best_eval_loss", trace.best_eval_loss},
            {"best_step", trace.best_step}}},
          {"evaluation", eval_report_to_json(result.report)}};
}

// ---------------------------------------------------------------------------
// Tables

TableScale table_scale_from_name(const std::string& name) {
  if (name == "desk") return TableScale::Desk;
  if (name == "full") return TableScale::Full;
  if (name == "smoke") return TableScale::Smoke;
  fail(ErrorKind::Validation, "scale must be 'desk', 'full' or 'smoke', got '" + name + "'");
}

std::string table_scale_name(TableScale scale) {
  switch (scale) {
    case TableScale::Desk: return "desk";
    case TableScale::Full: return "full";
    case TableScale::Smoke: return "smoke";
  }
  return "desk";
}

double TableRow::mean_mcc_repr() const { return mean_of(runs, &EvalReport::mcc_repr); }
double TableRow::mean_mcc_model() const { return mean_of(runs, &EvalReport::mcc_model); }
double TableRow::mean_blockwise_mcc() const { return mean_of(runs, &EvalReport::blockwise_mcc); }

std::optional<double> TableRow::mean_param_error() const {
  if (runs.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& r : runs) {
    if (!r.param_error) return std::nullopt;
    s += *r.param_error;
  }
  return s / static_cast<double>(runs.size());
}

namespace {

// Three repository-fixed systems for the averaged tables, one for the rest.
constexpr std::uint64_t kAveragedSeeds[] = {1101, 2202, 3303};
constexpr std::uint64_t kFixedSystemSeed = 4404;
constexpr std::size_t kSizes[][2] = {{4, 1}, {2, 2}, {3, 2}, {2, 3}};
constexpr double kSigmas[] = {0.0, 0.02, 0.2, 1.0};

ExperimentConfig scaled_base(TableScale scale) {
  ExperimentConfig c;
  switch (scale) {
    case TableScale::Full:
      c.records = 50000;
      c.episodes = 12500;
      c.training.steps = 60000;
      c.training.encoder_skip = true;
      break;
    case TableScale::Desk:
      c.records = 25000;
      c.episodes = 6250;
      c.training.steps = 30000;
      c.training.encoder_width = 64;
      c.training.learning_rate = 3e-3;
      c.training.encoder_skip = true;
      break;
    case TableScale::Smoke:
      c.records = 300;
      c.episodes = 75;
      c.eval_records = 200;
      c.training.steps = 30;
      c.training.encoder_width = 8;
      c.training.coefficient_width = 8;
      c.training.eval_every = 10;
      c.training.eval_records = 100;
      break;
  }
  return c;
}

void apply_seeds(ExperimentConfig& c, std::uint64_t system_seed) {
  c.system_seed = system_seed;
  c.mixing_seed = system_seed + 1;
  c.data_seed = system_seed + 2;
  c.training_seed = system_seed + 3;
}

TableRow make_row(std::string label, ExperimentConfig base, std::vector<std::uint64_t> seeds) {
  base.name = label;
  return TableRow{std::move(label), std::move(base), std::move(seeds), {}, {}};
}

std::string row_label(std::size_t n, std::size_t d, Protocol p) {
  return "n" + std::to_string(n) + "_d" + std::to_string(d) + "_" + protocol_name(p);
}

std::string sigma_label(double sigma, Protocol p) { return "sigma" + fmt_sigma(sigma) + "_" + protocol_name(p); }

const std::vector<PublishedValue>& published_values(int id) {
  static const std::vector<PublishedValue> t2 = {{1.000, 0.003}, {1.000, 0.005}, {1.000, 0.017}, {0.999, 0.025},
                                             {1.000, 0.031}, {1.000, 0.032}, {0.996, 0.149}, {0.999, 0.046}};
  static const std::vector<PublishedValue> t3 = {{0.283, std::nullopt}, {1.000, std::nullopt}};
  static const std::vector<PublishedValue> t4 = {{1.000, 0.017}, {1.000, 0.013}, {0.999, 0.034}, {0.917, 0.616},
                                             {0.993, 0.172}, {0.992, 0.166}, {0.991, 0.235}, {0.952, 0.457}};
  static const std::vector<PublishedValue> t5 = {{1.000, 1.000}, {1.000, 1.000}, {0.995, 0.996}, {0.996, 0.996},
                                             {1.000, 1.000}, {1.000, 1.000}, {0.995, 0.996}, {0.996, 0.996}};
  static const std::vector<PublishedValue> t6 = {{0.995, 0.996}, {0.996, 0.997}, {0.993, 0.993}, {0.882, 0.727},
                                             {0.995, 0.997}, {0.987, 0.990}, {0.983, 0.959}, {0.903, 0.711}};
  switch (id) {
    case 2: return t2;
    case 3: return t3;
    case 4: return t4;
    case 5: return t5;
    case 6: return t6;
    default: fail(ErrorKind::Validation, "table id must be 2..6, got " + std::to_string(id));
  }
}

std::string join_seeds(const TableRow& row) {
  std::string s;
  for (std::size_t i = 0; i < row.system_seeds.size(); ++i) s += (i ? ";" : "") + std::to_string(row.system_seeds[i]);
  return s;
}

std::string join_hashes(const TableRow& row) {
  std::string s;
  for (std::size_t i = 0; i < row.hashes.size(); ++i) s += (i ? ";" : "") + row.hashes[i];
  return s;
}

}  // namespace

std::vector<TableRow> table_plan(int id, TableScale scale) {
  (void)published_values(id);
  std::vector<TableRow> rows;
  const std::vector<std::uint64_t> averaged(std::begin(kAveragedSeeds), std::end(kAveragedSeeds));
  const std::vector<std::uint64_t> fixed = {kFixedSystemSeed};
  switch (id) {
    case 2:
    case 5:
      for (Protocol p : {Protocol::Passive, Protocol::Active}) {
        for (const auto& nd : kSizes) {
          ExperimentConfig c = scaled_base(scale);
          c.system_kind = id == 2 ? SystemKind::Linear : SystemKind::Affine;
          c.order = nd[0];
          c.inputs = nd[1];
          c.protocol = p;
          rows.push_back(make_row(row_label(nd[0], nd[1], p), c, averaged));
        }
      }
      break;
    case 3:
      for (ModelKind m : {ModelKind::Integrator, ModelKind::Canonical}) {
        ExperimentConfig c = scaled_base(scale);
        c.order = 3;
        c.inputs = 2;
        c.model = m;
        rows.push_back(make_row(model_kind_name(m), c, fixed));
      }
      break;
    case 4:
    case 6:
      for (Protocol p : {Protocol::Passive, Protocol::Active}) {
        for (double sigma : kSigmas) {
          ExperimentConfig c = scaled_base(scale);
          c.system_kind = id == 4 ? SystemKind::Linear : SystemKind::Affine;
          c.order = 3;
          c.inputs = 2;
          c.protocol = p;
          c.noise_sd = sigma;
          rows.push_back(make_row(sigma_label(sigma, p), c, fixed));
        }
      }
      break;
    default:
      fail(ErrorKind::Validation, "table id must be 2..6, got " + std::to_string(id));
  }
  return rows;
}

TableResult reproduce_table(int id, TableScale scale, const std::filesystem::path& out_dir, std::size_t workers) {
  TableResult table;
  table.id = id;
  table.scale = scale;
  table.rows = table_plan(id, scale);
  table.published = published_values(id);

  struct Job {
    std::size_t row;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto& row = table.rows[r];
    row.runs.resize(row.system_seeds.size());
    row.hashes.resize(row.system_seeds.size());
    for (std::size_t s = 0; s < row.system_seeds.size(); ++s) jobs.push_back({r, s});
  }
  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    TableRow& row = table.rows[jobs[j].row];
    ExperimentConfig c = row.base;
    apply_seeds(c, row.system_seeds[jobs[j].seed]);
    if (!out_dir.empty()) {
      c.output_dir = out_dir / ("table" + std::to_string(id)) / row.label / ("seed" + std::to_string(c.system_seed));
      c.write_dataset = false;
    }
    RunResult res = run(c, 1);
    row.runs[jobs[j].seed] = std::move(res.report);
    row.hashes[jobs[j].seed] = res.config_hash;
  });
  judge_table(table);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / ("table" + std::to_string(id) + ".csv"), table.csv());
  }
  return table;
}

void judge_table(TableResult& t) {
  t.checks.assign(t.rows.size(), "");
  t.passed.assign(t.rows.size(), true);
  auto find_row = [&](const std::string& label) -> const TableRow* {
    for (const auto& r : t.rows) {
      if (r.label == label) return &r;
    }
    return nullptr;
  };
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const TableRow& row = t.rows[i];
    const ExperimentConfig& c = row.base;
    const bool pas = c.protocol == Protocol::Passive;
    std::string& why = t.checks[i];
    bool ok = true;
    switch (t.id) {
      case 2: {
        const double mcc_min = pas ? 0.98 : 0.97;
        const double err_max = pas ? 0.08 : 0.20;
        const double err = row.mean_param_error().value_or(INFINITY);
        ok = row.mean_mcc_repr() >= mcc_min && err <= err_max;
        why = "mcc>=" + fmt_sigma(mcc_min) + " & error<=" + fmt_sigma(err_max);
        break;
      }
      case 3:
        if (c.model == ModelKind::Canonical) {
          ok = row.mean_blockwise_mcc() >= 0.95;
          why = "blockwise_mcc>=0.95";
        } else {
          ok = row.mean_blockwise_mcc() <= 0.6;
          why = "blockwise_mcc<=0.60";
        }
        break;
      case 4:
      case 6: {
        const bool affine = t.id == 6;
        if (c.noise_sd == 1.0) {
          const TableRow* ref = find_row(sigma_label(0.02, c.protocol));
          ok = ref != nullptr && row.mean_mcc_repr() < ref->mean_mcc_repr();
          why = "mcc<mcc(sigma=0.02)";
          if (affine) {
            ok = ok && row.mean_mcc_model() < ref->mean_mcc_model();
            why = "mcc_r<mcc_r(sigma=0.02) & mcc_m<mcc_m(sigma=0.02)";
          }
        } else if (!affine && pas) {
          ok = row.mean_mcc_repr() >= 0.97;
          why = "mcc>=0.97";
        } else if (affine && c.noise_sd == 0.0) {
          ok = row.mean_mcc_repr() >= 0.97 && row.mean_mcc_model() >= 0.97;
          why = "mcc_r>=0.97 & mcc_m>=0.97";
        } else {
          why = "logged";
        }
        break;
      }
      case 5:
        ok = row.mean_mcc_repr() >= 0.97 && row.mean_mcc_model() >= 0.97;
        why = "mcc_r>=0.97 & mcc_m>=0.97";
        break;
      default:
        break;
    }
    t.passed[i] = ok;
  }
}

bool TableResult::all_passed() const {
  return std::all_of(passed.begin(), passed.end(), [](bool b) { return b; });
}

std::string TableResult::csv() const {
  std::string out;
  switch (id) {
    case 2: out = "n,d,protocol,mcc,error,published_mcc,published_error"; break;
    case 3: out = "model,blockwise_mcc,published_blockwise_mcc"; break;
    case 4: out = "sigma,protocol,mcc,error,published_mcc,published_error"; break;
    case 5: out = "n,d,protocol,mcc_r,mcc_m,published_mcc_r,published_mcc_m"; break;
    case 6: out = "sigma,protocol,mcc_r,mcc_m,published_mcc_r,published_mcc_m"; break;
    default: break;
  }
  out += ",criterion,pass,scale,system_seeds,config_hashes\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TableRow& r = rows[i];
    const ExperimentConfig& c = r.base;
    const PublishedValue& p = i < published.size() ? published[i] : PublishedValue{};
    std::string line;
    const std::string proto = protocol_name(c.protocol);
    switch (id) {
      case 2:
        line = std::to_string(c.order) + "," + std::to_string(c.inputs) + "," + proto + "," + fmt(r.mean_mcc_repr()) +
               "," + fmt_opt(r.mean_param_error()) + "," + fmt_opt(p.mcc) + "," + fmt_opt(p.second);
        break;
      case 3:
        line = model_kind_name(c.model) + "," + fmt(r.mean_blockwise_mcc()) + "," + fmt_opt(p.mcc);
        break;
      case 4:
        line = fmt_sigma(c.noise_sd) + "," + proto + "," + fmt(r.mean_mcc_repr()) + "," + fmt_opt(r.mean_param_error()) +
               "," + fmt_opt(p.mcc) + "," + fmt_opt(p.second);
        break;
      case 5:
        line = std::to_string(c.order) + "," + std::to_string(c.inputs) + "," + proto + "," + fmt(r.mean_mcc_repr()) +
               "," + fmt(r.mean_mcc_model()) + "," + fmt_opt(p.mcc) + "," + fmt_opt(p.second);
        break;
      case 6:
        line = fmt_sigma(c.noise_sd) + "," + proto + "," + fmt(r.mean_mcc_repr()) + "," + fmt(r.mean_mcc_model()) + "," +
               fmt_opt(p.mcc) + "," + fmt_opt(p.second);
        break;
      default:
        break;
    }
    const std::string check = i < checks.size() ? checks[i] : "";
    const std::string pass = i < passed.size() ? (passed[i] ? "PASS" : "FAIL") : "";
    out += line + "," + check + "," + pass + "," + table_scale_name(scale) + "," + join_seeds(r) + "," + join_hashes(r) +
           "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plot data

std::string emit_plot_data(const std::vector<json>& reports) {
  if (reports.empty()) fail(ErrorKind::InvalidArgument, "emit_plot_data: no reports given");
  std::string out =
      "label,system,model,n,d,nd,protocol,sigma,system_seed,mcc_repr,mcc_model,blockwise_mcc,param_error,config_hash\n";
  for (const json& r : reports) {
    try {
      const json& c = r.at("config");
      const json& e = r.at("evaluation");
      const auto n = c.at("system").at("order").get<std::size_t>();
      const auto d = c.at("system").at("inputs").get<std::size_t>();
      const std::string err = e.at("param_error").is_null() ? "" : fmt(e.at("param_error").get<double>());
      out += c.at("name").get<std::string>() + "," + c.at("system").at("kind").get<std::string>() + "," +
             c.at("training").at("model").get<std::string>() + "," + std::to_string(n) + "," + std::to_string(d) + "," +
             std::to_string(n * d) + "," + c.at("data").at("protocol").get<std::string>() + "," +
             fmt_sigma(c.at("data").at("noise_sd").get<double>()) + "," +
             std::to_string(r.at("seeds").at("system").get<std::uint64_t>()) + "," +
             fmt(e.at("mcc_repr").get<double>()) + "," + fmt(e.at("mcc_model").get<double>()) + "," +
             fmt(e.at("blockwise_mcc").get<double>()) + "," + err + "," + r.at("config_hash").get<std::string>() + "\n";
    } catch (const json::exception& ex) {
      fail(ErrorKind::Format, std::string("emit_plot_data: malformed report: ") + ex.what());
    }
  }
  return out;
}

std::vector<json> collect_reports(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::Io, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "report.json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<json> reports;
  for (const auto& p : paths) {
    try {
      reports.push_back(json::parse(read_text_file(p)));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Format, p.string() + ": " + e.what());
    }
  }
  return reports;
}

std::size_t workers_from_env() {
  const char* v = std::getenv("LATENTID_WORKERS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (end == v || *end != '\0' || n == 0) {
    fail(ErrorKind::Validation, std::string("LATENTID_WORKERS must be a positive integer, got '") + v + "'");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace latentid
