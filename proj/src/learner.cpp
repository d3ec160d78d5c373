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

#include "latentid/learner.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "latentid/archive.hpp"
#include "latentid/serialize.hpp"

namespace latentid {

namespace {

constexpr const char* kModelKind = "latentid.trained_model";

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void check_batch(const ObservedTransitions& b, std::size_t latent_dim, std::size_t inputs) {
  if (b.size() == 0) fail(ErrorKind::InvalidArgument, "empty batch");
  if (b.u.cols() != inputs) fail(ErrorKind::ShapeMismatch, "batch input width does not match the model");
  if (b.x.rows() != b.u.rows() || b.x_next.rows() != b.x.rows()) {
    fail(ErrorKind::ShapeMismatch, "batch arrays disagree on record count");
  }
  (void)latent_dim;
}

double mean_squared_rows(const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) fail(ErrorKind::ShapeMismatch, "loss operands " + a.shape_string() + " vs " + b.shape_string());
  const double v = (a.map() - b.map()).squaredNorm() / static_cast<double>(a.rows());
  if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "non-finite loss");
  return v;
}

// Row-wise canonical update with per-row coefficient tables.
Tensor2 canonical_rows(std::size_t n, std::size_t d, const Tensor2& z, const Tensor2& u,
                       const std::function<double(std::size_t, std::size_t, std::size_t)>& coef,
                       const std::function<double(std::size_t, std::size_t)>& gain) {
  const std::size_t nd = n * d;
  if (z.cols() != nd) fail(ErrorKind::ShapeMismatch, "latent batch has " + std::to_string(z.cols()) +
                                                        " columns, expected " + std::to_string(nd));
  if (u.cols() != d || u.rows() != z.rows()) fail(ErrorKind::ShapeMismatch, "input batch does not match latents");
  Tensor2 out(z.rows(), nd);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t base = i * n;
      for (std::size_t k = 0; k + 1 < n; ++k) out(r, base + k) = z(r, base + k + 1);
      double last = 0.0;
      for (std::size_t c = 0; c < nd; ++c) last += coef(r, i, c) * z(r, c);
      out(r, base + n - 1) = last + gain(r, i) * u(r, i);
    }
  }
  return out;
}

struct Standardizer {
  Tensor2 mean;
  Tensor2 scale;
};

Standardizer fit_standardizer(const ObservedTransitions& data) {
  const std::size_t m = data.x.cols();
  Standardizer s{Tensor2(1, m), Tensor2(1, m)};
  const double count = 2.0 * static_cast<double>(data.size());
  for (std::size_t c = 0; c < m; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) sum += data.x(r, c) + data.x_next(r, c);
    const double mean = sum / count;
    double var = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) {
      var += (data.x(r, c) - mean) * (data.x(r, c) - mean) + (data.x_next(r, c) - mean) * (data.x_next(r, c) - mean);
    }
    const double sd = std::sqrt(var / count);
    s.mean(0, c) = mean;
    s.scale(0, c) = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return s;
}

// The differentiable objective recorded once and re-evaluated per batch.
struct ObjectiveGraph {
  Tape tape;
  NodeRef x, x_next, u;
  TapeMlp encoder;
  std::optional<NodeRef> encoder_skip;
  NodeRef linear_coefficients;  // nd x inputs (transposed table)
  TapeMlp coefficient_net;
  std::vector<TapeMlp> masked_nets;
  TapeMlp gain_net;
  NodeRef z_hat, z_hat_next, prediction, loss;
};

NodeRef predict_on_tape(ObjectiveGraph& g, const TrainingProblem& p, const DynamicsEstimate& init, NodeRef z) {
  Tape& t = g.tape;
  const std::size_t n = p.order;
  const std::size_t d = p.inputs;
  const std::size_t nd = n * d;
  // last_rows: B x d, the new value of row n in every block.
  NodeRef last_rows{};
  if (const auto* lin = std::get_if<LinearDynamicsEstimate>(&init)) {
    g.linear_coefficients = t.parameter(transpose(lin->coefficients), "dynamics.coefficients");
    const NodeRef gains = t.constant(Tensor2::row(lin->gains));
    last_rows = t.add(t.matmul(z, g.linear_coefficients), t.mul(g.u, gains));
  } else if (const auto* integ = std::get_if<IntegratorDynamics>(&init)) {
    Tensor2 b(d, nd);
    for (std::size_t i = 0; i < d; ++i) b(i, i * n + n - 1) = integ->gains[i];
    return t.add(z, t.matmul(g.u, t.constant(std::move(b))));
  } else {
    const auto& aff = std::get<AffineDynamicsEstimate>(init);
    NodeRef coefs{};
    if (aff.masked()) {
      std::vector<NodeRef> parts;
      std::size_t idx = 0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          for (std::size_t k = 0; k < n; ++k, ++idx) {
            g.masked_nets.push_back(record_mlp(t, aff.masked_nets[idx], "masked." + std::to_string(idx)));
            parts.push_back(g.masked_nets.back().apply(t, t.slice_cols(z, j * n, j * n + k + 1)));
          }
        }
      }
      coefs = t.concat_cols(parts);
    } else {
      g.coefficient_net = record_mlp(t, aff.coefficient_net, "coefficients");
      coefs = g.coefficient_net.apply(t, z);
    }
    g.gain_net = record_mlp(t, aff.gain_net, "gains");
    const NodeRef floor = t.constant(Tensor2(1, d, aff.gain_floor));
    const NodeRef signs = t.constant(Tensor2::row(aff.gain_signs));
    const NodeRef gains = t.mul(t.add(t.softplus(g.gain_net.apply(t, z)), floor), signs);
    const NodeRef ones = t.constant(Tensor2(nd, 1, 1.0));
    std::vector<NodeRef> rows;
    for (std::size_t i = 0; i < d; ++i) {
      rows.push_back(t.matmul(t.mul(t.slice_cols(coefs, i * nd, (i + 1) * nd), z), ones));
    }
    last_rows = t.add(d == 1 ? rows.front() : t.concat_cols(rows), t.mul(gains, g.u));
  }
  std::vector<NodeRef> blocks;
  for (std::size_t i = 0; i < d; ++i) {
    if (n > 1) blocks.push_back(t.slice_cols(z, i * n + 1, i * n + n));
    blocks.push_back(t.slice_cols(last_rows, i, i + 1));
  }
  return t.concat_cols(blocks);
}

DynamicsEstimate initial_dynamics(const TrainingProblem& p, const TrainingConfig& c, SeededRng& rng) {
  const std::size_t n = p.order;
  const std::size_t d = p.inputs;
  const std::size_t nd = n * d;
  switch (p.kind) {
    case DynamicsKind::Linear:
      return LinearDynamicsEstimate{n, d, Tensor2(d, nd), std::vector<double>(d, c.fixed_gain)};
    case DynamicsKind::Integrator:
      return IntegratorDynamics{n, d, std::vector<double>(d, c.fixed_gain)};
    case DynamicsKind::Affine: {
      AffineDynamicsEstimate est;
      est.order = n;
      est.inputs = d;
      est.gain_floor = c.gain_floor;
      est.gain_signs.assign(d, c.gain_sign);
      const std::size_t w = c.coefficient_width;
      if (c.masked_coefficients) {
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
              const std::size_t widths[] = {k + 1, w, w, 1};
              est.masked_nets.push_back(glorot_mlp(widths, rng));
            }
          }
        }
      } else {
        const std::size_t widths[] = {nd, w, w, d * nd};
        est.coefficient_net = glorot_mlp(widths, rng);
      }
      const std::size_t gain_widths[] = {nd, w, w, d};
      est.gain_net = glorot_mlp(gain_widths, rng);
      return est;
    }
  }
  fail(ErrorKind::InvalidArgument, "unknown dynamics kind");
}

DynamicsEstimate snapshot_dynamics(const ObjectiveGraph& g, const DynamicsEstimate& init) {
  if (const auto* lin = std::get_if<LinearDynamicsEstimate>(&init)) {
    LinearDynamicsEstimate out = *lin;
    out.coefficients = transpose(g.tape.value(g.linear_coefficients));
    return out;
  }
  if (std::holds_alternative<IntegratorDynamics>(init)) return init;
  AffineDynamicsEstimate out = std::get<AffineDynamicsEstimate>(init);
  if (out.masked()) {
    for (std::size_t i = 0; i < out.masked_nets.size(); ++i) out.masked_nets[i] = g.masked_nets[i].snapshot(g.tape);
  } else {
    out.coefficient_net = g.coefficient_net.snapshot(g.tape);
  }
  out.gain_net = g.gain_net.snapshot(g.tape);
  return out;
}

void build_objective(ObjectiveGraph& g, const TrainingProblem& problem, const EncoderModel& encoder,
                     const DynamicsEstimate& dynamics, std::size_t m) {
  g.x = g.tape.input("x", m);
  g.x_next = g.tape.input("x_next", m);
  g.u = g.tape.input("u", problem.inputs);
  g.encoder = record_mlp(g.tape, encoder.network, "encoder");
  g.z_hat = g.encoder.apply(g.tape, g.x);
  g.z_hat_next = g.encoder.apply(g.tape, g.x_next);
  if (!encoder.skip.empty()) {
    g.encoder_skip = g.tape.parameter(encoder.skip, "encoder.skip");
    g.z_hat = g.tape.add(g.z_hat, g.tape.matmul(g.x, *g.encoder_skip));
    g.z_hat_next = g.tape.add(g.z_hat_next, g.tape.matmul(g.x_next, *g.encoder_skip));
  }
  g.prediction = predict_on_tape(g, problem, dynamics, g.z_hat);
  g.loss = g.tape.squared_error(g.z_hat_next, g.prediction);
}

TrainingProblem problem_of(const TrainedModel& model) {
  DynamicsKind kind = DynamicsKind::Linear;
  if (std::holds_alternative<AffineDynamicsEstimate>(model.dynamics)) kind = DynamicsKind::Affine;
  if (std::holds_alternative<IntegratorDynamics>(model.dynamics)) kind = DynamicsKind::Integrator;
  return {kind, model.order(), model.inputs()};
}

void gather_rows(const Tensor2& src, std::span<const std::size_t> idx, Tensor2& dst) {
  dst.resize(idx.size(), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto row = src.row_span(idx[r]);
    std::copy(row.begin(), row.end(), dst.row_span(r).begin());
  }
}

std::vector<std::size_t> permutation(std::size_t n, SeededRng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

}  // namespace

Tensor2 EncoderModel::standardize(const Tensor2& x) const {
  if (x.cols() != input_mean.cols()) {
    fail(ErrorKind::ShapeMismatch, "encoder expects " + std::to_string(input_mean.cols()) + " observation columns, got " +
                                       x.shape_string());
  }
  Tensor2 out(x.rows(), x.cols());
  out.map() = (x.map().rowwise() - input_mean.map().row(0)).array().rowwise() * input_scale.map().row(0).array();
  return out;
}

Tensor2 EncoderModel::encode(const Tensor2& x) const {
  const Tensor2 s = standardize(x);
  Tensor2 z = network.forward(s);
  if (!skip.empty()) z.map() += s.map() * skip.map();
  return z;
}

EncoderModel identity_encoder(std::size_t dim) {
  EncoderModel e{Tensor2(1, dim), Tensor2(1, dim, 1.0), Mlp{}};
  e.network.layers.push_back({Tensor2::identity(dim), Tensor2(1, dim)});
  return e;
}

LinearCanonicalModel LinearDynamicsEstimate::as_model() const {
  LinearCanonicalModel m{order, inputs, coefficients, gains};
  m.validate();
  return m;
}

std::pair<Tensor2, Tensor2> AffineDynamicsEstimate::evaluate_batch(const Tensor2& z) const {
  const std::size_t nd = order * inputs;
  Tensor2 coefs;
  if (masked()) {
    coefs = Tensor2(z.rows(), inputs * nd);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < inputs; ++i) {
      for (std::size_t j = 0; j < inputs; ++j) {
        for (std::size_t k = 0; k < order; ++k, ++idx) {
          Tensor2 slice(z.rows(), k + 1);
          slice.map() = z.map().middleCols(static_cast<Eigen::Index>(j * order), static_cast<Eigen::Index>(k + 1));
          const Tensor2 out = masked_nets[idx].forward(slice);
          for (std::size_t r = 0; r < z.rows(); ++r) coefs(r, idx) = out(r, 0);
        }
      }
    }
  } else {
    coefs = coefficient_net.forward(z);
  }
  Tensor2 gains = gain_net.forward(z);
  for (std::size_t r = 0; r < gains.rows(); ++r) {
    for (std::size_t i = 0; i < inputs; ++i) gains(r, i) = gain_signs[i] * (gain_floor + softplus(gains(r, i)));
  }
  return {std::move(coefs), std::move(gains)};
}

std::size_t TrainedModel::order() const {
  return std::visit([](const auto& d) { return d.order; }, dynamics);
}

std::size_t TrainedModel::inputs() const {
  return std::visit([](const auto& d) { return d.inputs; }, dynamics);
}

std::string dynamics_kind_name(DynamicsKind kind) {
  switch (kind) {
    case DynamicsKind::Linear: return "linear";
    case DynamicsKind::Affine: return "affine";
    case DynamicsKind::Integrator: return "integrator";
  }
  return "linear";
}

Tensor2 predict_latent(const DynamicsEstimate& dynamics, const Tensor2& z, const Tensor2& u) {
  if (const auto* lin = std::get_if<LinearDynamicsEstimate>(&dynamics)) {
    return canonical_rows(
        lin->order, lin->inputs, z, u, [&](std::size_t, std::size_t i, std::size_t c) { return lin->coefficients(i, c); },
        [&](std::size_t, std::size_t i) { return lin->gains[i]; });
  }
  if (const auto* integ = std::get_if<IntegratorDynamics>(&dynamics)) {
    const std::size_t n = integ->order;
    if (z.cols() != n * integ->inputs || u.cols() != integ->inputs) {
      fail(ErrorKind::ShapeMismatch, "integrator batch dimensions do not match");
    }
    Tensor2 out = z;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t i = 0; i < integ->inputs; ++i) out(r, i * n + n - 1) += integ->gains[i] * u(r, i);
    }
    return out;
  }
  const auto& aff = std::get<AffineDynamicsEstimate>(dynamics);
  if (z.cols() != aff.order * aff.inputs) fail(ErrorKind::ShapeMismatch, "latent batch width does not match model");
  const auto [coefs, gains] = aff.evaluate_batch(z);
  const std::size_t nd = aff.order * aff.inputs;
  return canonical_rows(
      aff.order, aff.inputs, z, u, [&](std::size_t r, std::size_t i, std::size_t c) { return coefs(r, i * nd + c); },
      [&](std::size_t r, std::size_t i) { return gains(r, i); });
}

Tensor2 predict_next(const TrainedModel& model, const Tensor2& x, const Tensor2& u) {
  return predict_latent(model.dynamics, model.encoder.encode(x), u);
}

double loss_linear(const EncoderModel& encoder, const LinearDynamicsEstimate& est, const ObservedTransitions& batch) {
  check_batch(batch, est.order * est.inputs, est.inputs);
  return mean_squared_rows(encoder.encode(batch.x_next), predict_latent(est, encoder.encode(batch.x), batch.u));
}

double loss_affine(const EncoderModel& encoder, const AffineDynamicsEstimate& est, const ObservedTransitions& batch) {
  check_batch(batch, est.order * est.inputs, est.inputs);
  return mean_squared_rows(encoder.encode(batch.x_next), predict_latent(est, encoder.encode(batch.x), batch.u));
}

double prediction_loss(const TrainedModel& model, const ObservedTransitions& batch) {
  check_batch(batch, model.order() * model.inputs(), model.inputs());
  return mean_squared_rows(model.encoder.encode(batch.x_next), predict_next(model, batch.x, batch.u));
}

std::vector<double> flatten_parameters(const TrainedModel& model) {
  ObjectiveGraph g;
  build_objective(g, problem_of(model), model.encoder, model.dynamics, model.encoder.input_mean.cols());
  std::vector<double> flat;
  for (NodeRef p : g.tape.parameters()) {
    const Tensor2& v = g.tape.parameter_value(p);
    flat.insert(flat.end(), v.data().begin(), v.data().end());
  }
  return flat;
}

TrainedModel with_parameters(const TrainedModel& model, std::span<const double> flat) {
  ObjectiveGraph g;
  build_objective(g, problem_of(model), model.encoder, model.dynamics, model.encoder.input_mean.cols());
  std::size_t offset = 0;
  for (NodeRef p : g.tape.parameters()) {
    Tensor2& v = g.tape.parameter_value(p);
    if (offset + v.size() > flat.size()) fail(ErrorKind::ShapeMismatch, "parameter vector is too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.data().begin());
    offset += v.size();
  }
  if (offset != flat.size()) fail(ErrorKind::ShapeMismatch, "parameter vector is too long");
  TrainedModel out = model;
  out.encoder.network = g.encoder.snapshot(g.tape);
  if (g.encoder_skip) out.encoder.skip = g.tape.value(*g.encoder_skip);
  out.dynamics = snapshot_dynamics(g, model.dynamics);
  return out;
}

double objective_gradient(const TrainedModel& model, const ObservedTransitions& batch, std::vector<double>& gradient) {
  check_batch(batch, model.order() * model.inputs(), model.inputs());
  ObjectiveGraph g;
  build_objective(g, problem_of(model), model.encoder, model.dynamics, model.encoder.input_mean.cols());
  const Tensor2 xs = model.encoder.standardize(batch.x);
  const Tensor2 xns = model.encoder.standardize(batch.x_next);
  const double loss = g.tape.forward(g.loss, {{g.x, &xs}, {g.x_next, &xns}, {g.u, &batch.u}})(0, 0);
  g.tape.backward(g.loss);
  gradient.clear();
  for (NodeRef p : g.tape.parameters()) {
    const Tensor2& gr = g.tape.grad(p);
    gradient.insert(gradient.end(), gr.data().begin(), gr.data().end());
  }
  return loss;
}

TrainedModel train(const ObservedTransitions& data, const TrainingProblem& problem, const TrainingConfig& config,
                   const SeededRng& rng) {
  if (problem.order < 1 || problem.inputs < 1) fail(ErrorKind::InvalidArgument, "order and inputs must be >= 1");
  if (data.size() == 0) fail(ErrorKind::InvalidArgument, "training data is empty");
  if (data.u.cols() != problem.inputs) {
    fail(ErrorKind::ShapeMismatch, "dataset has " + std::to_string(data.u.cols()) + " inputs, problem declares " +
                                       std::to_string(problem.inputs));
  }
  if (config.batch_size < 1) fail(ErrorKind::InvalidArgument, "batch size must be >= 1");
  if (!(config.learning_rate >= 0.0)) fail(ErrorKind::InvalidArgument, "learning rate must be >= 0");
  const std::size_t nd = problem.order * problem.inputs;
  const std::size_t m = data.x.cols();

  SeededRng init_rng = rng.split(0);
  SeededRng batch_rng = rng.split(1);
  SeededRng eval_rng = rng.split(2);

  const Standardizer stdz = fit_standardizer(data);
  EncoderModel encoder_init{stdz.mean, stdz.scale, {}};
  const std::size_t enc_widths[] = {m, config.encoder_width, config.encoder_width, nd};
  encoder_init.network = glorot_mlp(enc_widths, init_rng);
  encoder_init.network.leak = config.encoder_leak;
  if (config.encoder_skip) encoder_init.skip = Tensor2(m, nd);
  const DynamicsEstimate dyn_init = initial_dynamics(problem, config, init_rng);

  const Tensor2 xs = encoder_init.standardize(data.x);
  const Tensor2 xns = encoder_init.standardize(data.x_next);

  ObjectiveGraph g;
  build_objective(g, problem, encoder_init, dyn_init, m);

  const std::vector<NodeRef>& params = g.tape.parameters();
  std::vector<Tensor2*> param_ptrs;
  for (NodeRef p : params) param_ptrs.push_back(&g.tape.parameter_value(p));

  // Fixed evaluation subset.
  const std::size_t n_eval = std::min(config.eval_records, data.size());
  std::vector<std::size_t> eval_idx = permutation(data.size(), eval_rng);
  eval_idx.resize(n_eval);
  Tensor2 ex, exn, eu;
  gather_rows(xs, eval_idx, ex);
  gather_rows(xns, eval_idx, exn);
  gather_rows(data.u, eval_idx, eu);
  auto eval_loss = [&] {
    return g.tape.forward(g.loss, {{g.x, &ex}, {g.x_next, &exn}, {g.u, &eu}})(0, 0);
  };

  TrainingTrace trace;
  trace.seed = rng.seed();
  trace.config = config;
  trace.initial_loss = eval_loss();
  trace.best_eval_loss = trace.initial_loss;
  trace.best_step = 0;
  std::vector<Tensor2> best;
  for (const Tensor2* p : param_ptrs) best.push_back(*p);

  Adam adam({config.learning_rate, config.beta1, config.beta2, config.epsilon});
  const std::size_t batch = std::min(config.batch_size, data.size());
  std::vector<std::size_t> order = permutation(data.size(), batch_rng);
  std::size_t cursor = 0;
  Tensor2 bx, bxn, bu;
  std::vector<std::size_t> idx(batch);
  std::vector<const Tensor2*> grads;
  grads.assign(params.size(), nullptr);

  for (std::size_t s = 1; s <= config.steps; ++s) {
    for (std::size_t k = 0; k < batch; ++k) {
      if (cursor == order.size()) {
        order = permutation(data.size(), batch_rng);
        cursor = 0;
      }
      idx[k] = order[cursor++];
    }
    gather_rows(xs, idx, bx);
    gather_rows(xns, idx, bxn);
    gather_rows(data.u, idx, bu);
    double loss = 0.0;
    try {
      loss = g.tape.forward(g.loss, {{g.x, &bx}, {g.x_next, &bxn}, {g.u, &bu}})(0, 0);
    } catch (const Error& e) {
      fail(ErrorKind::NonFinite, "training diverged at step " + std::to_string(s) + ": " + e.what());
    }
    g.tape.backward(g.loss);
    for (std::size_t i = 0; i < params.size(); ++i) grads[i] = &g.tape.grad(params[i]);
    adam.set_learning_rate(cosine_learning_rate(config.learning_rate, config.final_learning_rate, s - 1, config.steps));
    adam.step(param_ptrs, grads);

    const bool do_eval = (config.eval_every > 0 && s % config.eval_every == 0) || s == config.steps;
    if (do_eval || (config.trace_every > 0 && s % config.trace_every == 0)) {
      TracePoint point{s, loss, std::nullopt};
      if (do_eval) {
        double el = 0.0;
        try {
          el = eval_loss();
        } catch (const Error& e) {
          fail(ErrorKind::NonFinite, "training diverged at step " + std::to_string(s) + ": " + e.what());
        }
        point.eval_loss = el;
        if (el < trace.best_eval_loss) {
          trace.best_eval_loss = el;
          trace.best_step = s;
          for (std::size_t i = 0; i < param_ptrs.size(); ++i) best[i] = *param_ptrs[i];
        }
      }
      trace.points.push_back(point);
    }
  }
  for (std::size_t i = 0; i < param_ptrs.size(); ++i) *param_ptrs[i] = best[i];

  TrainedModel out;
  out.encoder = EncoderModel{stdz.mean, stdz.scale, g.encoder.snapshot(g.tape), {}};
  if (g.encoder_skip) out.encoder.skip = g.tape.value(*g.encoder_skip);
  out.dynamics = snapshot_dynamics(g, dyn_init);
  out.trace = std::move(trace);
  return out;
}

BaselineIntegrator train_baseline(const ObservedTransitions& data, std::size_t order, std::size_t inputs,
                                  const TrainingConfig& config, const SeededRng& rng) {
  return train(data, TrainingProblem{DynamicsKind::Integrator, order, inputs}, config, rng);
}

nlohmann::json training_config_to_json(const TrainingConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"final_learning_rate", c.final_learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"encoder_width", c.encoder_width},
          {"encoder_skip", c.encoder_skip},
          {"encoder_leak", c.encoder_leak},
          {"coefficient_width", c.coefficient_width},
          {"fixed_gain", c.fixed_gain},
          {"gain_floor", c.gain_floor},
          {"gain_sign", c.gain_sign},
          {"masked_coefficients", c.masked_coefficients},
          {"eval_every", c.eval_every},
          {"eval_records", c.eval_records},
          {"trace_every", c.trace_every}};
}

TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig c) {
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::Validation, std::string("training.") + key + " has the wrong type");
    }
  };
  get("steps", c.steps);
  get("batch_size", c.batch_size);
  get("learning_rate", c.learning_rate);
  get("final_learning_rate", c.final_learning_rate);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("epsilon", c.epsilon);
  get("encoder_width", c.encoder_width);
  get("encoder_skip", c.encoder_skip);
  get("encoder_leak", c.encoder_leak);
  get("coefficient_width", c.coefficient_width);
  get("fixed_gain", c.fixed_gain);
  get("gain_floor", c.gain_floor);
  get("gain_sign", c.gain_sign);
  get("masked_coefficients", c.masked_coefficients);
  get("eval_every", c.eval_every);
  get("eval_records", c.eval_records);
  get("trace_every", c.trace_every);
  return c;
}

namespace {

void add_mlp(Archive& a, const std::string& prefix, const Mlp& net) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    a.add(prefix + ".w" + std::to_string(l), net.layers[l].weight);
    a.add(prefix + ".b" + std::to_string(l), net.layers[l].bias);
  }
}

Mlp read_mlp(const Archive& a, const std::string& prefix, std::size_t layers) {
  Mlp net;
  for (std::size_t l = 0; l < layers; ++l) {
    net.layers.push_back({a.array(prefix + ".w" + std::to_string(l)), a.array(prefix + ".b" + std::to_string(l))});
  }
  return net;
}

nlohmann::json trace_to_json(const TrainingTrace& t) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : t.points) {
    nlohmann::json e = {{"step", p.step}, {"batch_loss", encode_double(p.batch_loss)}};
    if (p.eval_loss) e["eval_loss"] = encode_double(*p.eval_loss);
    points.push_back(e);
  }
  return {{"seed", t.seed},
          {"config", training_config_to_json(t.config)},
          {"initial_loss", encode_double(t.initial_loss)},
          {"best_eval_loss", encode_double(t.best_eval_loss)},
          {"best_step", t.best_step},
          {"points", points}};
}

TrainingTrace trace_from_json(const nlohmann::json& j) {
  TrainingTrace t;
  t.seed = j.at("seed").get<std::uint64_t>();
  t.config = training_config_from_json(j.at("config"));
  t.initial_loss = decode_double(j.at("initial_loss"));
  t.best_eval_loss = decode_double(j.at("best_eval_loss"));
  t.best_step = j.at("best_step").get<std::size_t>();
  for (const auto& p : j.at("points")) {
    TracePoint tp{p.at("step").get<std::size_t>(), decode_double(p.at("batch_loss")), std::nullopt};
    if (p.contains("eval_loss")) tp.eval_loss = decode_double(p.at("eval_loss"));
    t.points.push_back(tp);
  }
  return t;
}

}  // namespace

void save_trained_model(const TrainedModel& model, const std::filesystem::path& path) {
  Archive a;
  a.kind = kModelKind;
  a.metadata["order"] = model.order();
  a.metadata["inputs"] = model.inputs();
  a.metadata["encoder_layers"] = model.encoder.network.layers.size();
  a.metadata["trace"] = trace_to_json(model.trace);
  a.add("encoder.mean", model.encoder.input_mean);
  a.add("encoder.scale", model.encoder.input_scale);
  add_mlp(a, "encoder", model.encoder.network);
  a.metadata["encoder_leak"] = encode_double(model.encoder.network.leak);
  if (!model.encoder.skip.empty()) a.add("encoder.skip", model.encoder.skip);
  if (const auto* lin = std::get_if<LinearDynamicsEstimate>(&model.dynamics)) {
    a.metadata["dynamics"] = "linear";
    a.add("dynamics.coefficients", lin->coefficients);
    a.add("dynamics.gains", Tensor2::row(lin->gains));
  } else if (const auto* integ = std::get_if<IntegratorDynamics>(&model.dynamics)) {
    a.metadata["dynamics"] = "integrator";
    a.add("dynamics.gains", Tensor2::row(integ->gains));
  } else {
    const auto& aff = std::get<AffineDynamicsEstimate>(model.dynamics);
    a.metadata["dynamics"] = "affine";
    a.metadata["gain_floor"] = encode_double(aff.gain_floor);
    a.metadata["masked"] = aff.masked();
    a.metadata["net_layers"] = aff.gain_net.layers.size();
    a.add("dynamics.gain_signs", Tensor2::row(aff.gain_signs));
    add_mlp(a, "gain_net", aff.gain_net);
    if (aff.masked()) {
      for (std::size_t i = 0; i < aff.masked_nets.size(); ++i) add_mlp(a, "masked" + std::to_string(i), aff.masked_nets[i]);
    } else {
      add_mlp(a, "coefficient_net", aff.coefficient_net);
    }
  }
  write_archive(path, a);
}

TrainedModel load_trained_model(const std::filesystem::path& path) {
  const Archive a = read_archive(path, kModelKind);
  try {
    TrainedModel m;
    const auto order = a.metadata.at("order").get<std::size_t>();
    const auto inputs = a.metadata.at("inputs").get<std::size_t>();
    m.encoder.input_mean = a.array("encoder.mean");
    m.encoder.input_scale = a.array("encoder.scale");
    m.encoder.network = read_mlp(a, "encoder", a.metadata.at("encoder_layers").get<std::size_t>());
    if (a.metadata.contains("encoder_leak")) m.encoder.network.leak = decode_double(a.metadata.at("encoder_leak"));
    if (a.has("encoder.skip")) m.encoder.skip = a.array("encoder.skip");
    m.trace = trace_from_json(a.metadata.at("trace"));
    const auto kind = a.metadata.at("dynamics").get<std::string>();
    const auto gains_of = [&](const char* name) { return a.array(name).values(); };
    if (kind == "linear") {
      m.dynamics = LinearDynamicsEstimate{order, inputs, a.array("dynamics.coefficients"), gains_of("dynamics.gains")};
    } else if (kind == "integrator") {
      m.dynamics = IntegratorDynamics{order, inputs, gains_of("dynamics.gains")};
    } else if (kind == "affine") {
      AffineDynamicsEstimate aff;
      aff.order = order;
      aff.inputs = inputs;
      aff.gain_floor = decode_double(a.metadata.at("gain_floor"));
      aff.gain_signs = gains_of("dynamics.gain_signs");
      const auto layers = a.metadata.at("net_layers").get<std::size_t>();
      aff.gain_net = read_mlp(a, "gain_net", layers);
      if (a.metadata.at("masked").get<bool>()) {
        for (std::size_t i = 0; i < inputs * inputs * order; ++i) {
          aff.masked_nets.push_back(read_mlp(a, "masked" + std::to_string(i), layers));
        }
      } else {
        aff.coefficient_net = read_mlp(a, "coefficient_net", layers);
      }
      m.dynamics = std::move(aff);
    } else {
      fail(ErrorKind::Format, "unknown dynamics kind '" + kind + "'");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed trained model: ") + e.what());
  }
}

void write_trace_csv(const TrainingTrace& trace, const std::filesystem::path& path) {
  std::string text = "step,batch_loss,eval_loss\n";
  char buf[96];
  for (const auto& p : trace.points) {
    if (p.eval_loss) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", p.step, p.batch_loss, *p.eval_loss);
    } else {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,\n", p.step, p.batch_loss);
    }
    text += buf;
  }
  write_text_file(path, text);
}

}  // namespace latentid
