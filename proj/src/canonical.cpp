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

#include "latentid/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace latentid {

namespace {

void check_dims(const char* what, std::size_t expected, std::size_t got) {
  if (expected != got) {
    fail(ErrorKind::ShapeMismatch, std::string(what) + " has length " + std::to_string(got) + ", expected " +
                                       std::to_string(expected));
  }
}

// Shift rows copy z_{k+1} into z_k; the last row of each block is
// sum_c coef(i, c) z_c + gain_i u_i.
LatentState canonical_update(std::size_t n, std::size_t d, const Tensor2& coef, std::span<const double> gains,
                             std::span<const double> z, std::span<const double> u) {
  const std::size_t nd = n * d;
  LatentState next(nd);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t base = i * n;
    for (std::size_t k = 0; k + 1 < n; ++k) next[base + k] = z[base + k + 1];
    double last = 0.0;
    for (std::size_t c = 0; c < nd; ++c) last += coef(i, c) * z[c];
    next[base + n - 1] = last + gains[i] * u[i];
  }
  return next;
}

std::vector<double> random_point(SeededRng& rng, std::size_t dim, double box) {
  std::vector<double> p(dim);
  for (double& v : p) v = rng.uniform(-box, box);
  return p;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void LinearCanonicalModel::validate() const {
  if (order < 1 || inputs < 1) fail(ErrorKind::InvalidArgument, "canonical model needs order >= 1 and inputs >= 1");
  if (coefficients.rows() != inputs || coefficients.cols() != inputs * order) {
    fail(ErrorKind::ShapeMismatch, "coefficient table must be " + std::to_string(inputs) + "x" +
                                       std::to_string(inputs * order) + ", got " + coefficients.shape_string());
  }
  check_dims("gain vector", inputs, gains.size());
  if (!coefficients.all_finite()) fail(ErrorKind::NonFinite, "non-finite canonical coefficient");
}

StateSpaceMatrices assemble_matrices(const LinearCanonicalModel& model) {
  model.validate();
  const std::size_t n = model.order;
  const std::size_t d = model.inputs;
  const std::size_t nd = n * d;
  StateSpaceMatrices out{Tensor2(nd, nd), Tensor2(nd, d)};
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t base = i * n;
    for (std::size_t k = 0; k + 1 < n; ++k) out.transition(base + k, base + k + 1) = 1.0;
    for (std::size_t c = 0; c < nd; ++c) out.transition(base + n - 1, c) = model.coefficients(i, c);
    out.input(base + n - 1, i) = model.gains[i];
  }
  return out;
}

LatentState step_linear(const LinearCanonicalModel& model, std::span<const double> z, std::span<const double> u) {
  check_dims("state", model.state_dim(), z.size());
  check_dims("input", model.inputs, u.size());
  return canonical_update(model.order, model.inputs, model.coefficients, model.gains, z, u);
}

double CoefficientHead::apply(double raw) const {
  switch (kind) {
    case Kind::Identity: return raw;
    case Kind::Squash: return extent * std::tanh(raw);
    case Kind::Floor: return sign * (floor + extent * 0.5 * (1.0 + std::tanh(raw)));
  }
  return raw;
}

void AffineCanonicalModel::validate() const {
  if (order < 1 || inputs < 1) fail(ErrorKind::InvalidArgument, "canonical model needs order >= 1 and inputs >= 1");
  const std::size_t nd = order * inputs;
  check_dims("coefficient network input", nd, network.input_dim());
  check_dims("coefficient network output", inputs * nd + inputs, network.output_dim());
  check_dims("coefficient heads", inputs * nd + inputs, heads.size());
}

CoefficientValues AffineCanonicalModel::evaluate(std::span<const double> z) const {
  check_dims("state", state_dim(), z.size());
  const std::vector<double> raw = network.forward(z);
  const std::size_t nd = state_dim();
  CoefficientValues out{Tensor2(inputs, nd), std::vector<double>(inputs)};
  for (std::size_t i = 0; i < inputs; ++i) {
    for (std::size_t c = 0; c < nd; ++c) out.a(i, c) = heads[i * nd + c].apply(raw[i * nd + c]);
  }
  for (std::size_t i = 0; i < inputs; ++i) out.gains[i] = heads[inputs * nd + i].apply(raw[inputs * nd + i]);
  for (double v : out.a.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "coefficient network produced a non-finite value");
  }
  return out;
}

LatentState step_affine(const AffineCanonicalModel& model, std::span<const double> z, std::span<const double> u) {
  check_dims("state", model.state_dim(), z.size());
  check_dims("input", model.inputs, u.size());
  const CoefficientValues coef = model.evaluate(z);
  return canonical_update(model.order, model.inputs, coef.a, coef.gains, z, u);
}

AffineCanonicalModel affine_from_linear(const LinearCanonicalModel& model) {
  model.validate();
  const std::size_t nd = model.state_dim();
  const std::size_t outputs = model.inputs * nd + model.inputs;
  AffineCanonicalModel out;
  out.order = model.order;
  out.inputs = model.inputs;
  out.network.layers.push_back({Tensor2(nd, 1), Tensor2(1, 1)});
  DenseLayer head{Tensor2(1, outputs), Tensor2(1, outputs)};
  for (std::size_t i = 0; i < model.inputs; ++i) {
    for (std::size_t c = 0; c < nd; ++c) head.bias(0, i * nd + c) = model.coefficients(i, c);
    head.bias(0, model.inputs * nd + i) = model.gains[i];
  }
  out.network.layers.push_back(std::move(head));
  out.heads.assign(outputs, CoefficientHead::identity());
  double min_a1 = std::numeric_limits<double>::infinity();
  double min_b = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.inputs; ++i) {
    min_a1 = std::min(min_a1, std::abs(model.coefficient(i, i, 0)));
    min_b = std::min(min_b, std::abs(model.gains[i]));
  }
  out.floor_a = min_a1;
  out.floor_b = min_b;
  return out;
}

std::size_t state_dim(const CanonicalSystem& system) {
  return std::visit([](const auto& m) { return m.state_dim(); }, system);
}

std::size_t input_dim(const CanonicalSystem& system) {
  return std::visit([](const auto& m) { return m.inputs; }, system);
}

std::size_t system_order(const CanonicalSystem& system) {
  return std::visit([](const auto& m) { return m.order; }, system);
}

LatentState step(const CanonicalSystem& system, std::span<const double> z, std::span<const double> u) {
  if (const auto* linear = std::get_if<LinearCanonicalModel>(&system)) return step_linear(*linear, z, u);
  return step_affine(std::get<AffineCanonicalModel>(system), z, u);
}

std::vector<LatentState> simulate(const CanonicalSystem& system, std::span<const double> z0,
                                  std::span<const std::vector<double>> inputs) {
  check_dims("initial state", state_dim(system), z0.size());
  std::vector<LatentState> trajectory;
  trajectory.reserve(inputs.size() + 1);
  trajectory.emplace_back(z0.begin(), z0.end());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    LatentState next = step(system, trajectory.back(), inputs[t]);
    for (double v : next) {
      if (!std::isfinite(v)) fail(ErrorKind::Divergence, "state diverged at step " + std::to_string(t + 1));
    }
    trajectory.push_back(std::move(next));
  }
  return trajectory;
}

AssumptionReport check_assumptions(const LinearCanonicalModel& model, const AssumptionThresholds& thresholds) {
  model.validate();
  AssumptionReport report;
  report.thresholds = thresholds;
  const std::size_t n = model.order;
  const std::size_t d = model.inputs;
  for (std::size_t i = 0; i < d; ++i) {
    const double a1 = std::abs(model.coefficient(i, i, 0));
    const double b = std::abs(model.gains[i]);
    report.a1_margin.push_back(a1);
    report.b_margin.push_back(b);
    if (a1 < thresholds.nonzero) report.failures.push_back("a_1 of subsystem " + std::to_string(i + 1) + " is zero");
    if (b < thresholds.nonzero) report.failures.push_back("b of subsystem " + std::to_string(i + 1) + " is zero");
  }
  if (d == 1) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += model.coefficient(0, 0, k);
    report.sum_margin = std::abs(1.0 - sum);
    if (*report.sum_margin < thresholds.nonzero) report.failures.push_back("coefficients sum to 1");
  }
  const StateSpaceMatrices m = assemble_matrices(model);
  const Eigen::MatrixXd a = m.transition.map();
  const Eigen::MatrixXd i_minus_a = Eigen::MatrixXd::Identity(a.rows(), a.cols()) - a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(i_minus_a);
  report.min_singular_i_minus_a = svd.singularValues().minCoeff();
  if (*report.min_singular_i_minus_a < thresholds.singular) report.failures.push_back("I - A is singular");
  Eigen::EigenSolver<Eigen::MatrixXd> eig(a, false);
  report.spectral_radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (*report.spectral_radius > thresholds.spectral_flag) {
    report.stability_flag = true;
    report.warnings.push_back("spectral radius " + std::to_string(*report.spectral_radius) + " exceeds " +
                              std::to_string(thresholds.spectral_flag));
  }
  report.pass = report.failures.empty();
  return report;
}

AssumptionReport check_assumptions(const AffineCanonicalModel& model, const AssumptionThresholds& thresholds) {
  model.validate();
  AssumptionReport report;
  report.thresholds = thresholds;
  const std::size_t n = model.order;
  const std::size_t d = model.inputs;
  const std::size_t nd = model.state_dim();
  // Probe points are drawn from a fixed stream so the report is a pure
  // function of the model.
  SeededRng probe_rng(0x5eedULL);
  report.a1_margin.assign(d, std::numeric_limits<double>::infinity());
  report.b_margin.assign(d, std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < thresholds.coefficient_probes; ++p) {
    const auto z = random_point(probe_rng, nd, thresholds.equilibrium_box);
    const CoefficientValues c = model.evaluate(z);
    for (std::size_t i = 0; i < d; ++i) {
      report.a1_margin[i] = std::min(report.a1_margin[i], std::abs(c.a(i, i * n)));
      report.b_margin[i] = std::min(report.b_margin[i], std::abs(c.gains[i]));
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (report.a1_margin[i] < thresholds.nonzero) {
      report.failures.push_back("a_1 of subsystem " + std::to_string(i + 1) + " reaches zero");
    }
    if (report.b_margin[i] < thresholds.nonzero) {
      report.failures.push_back("b of subsystem " + std::to_string(i + 1) + " reaches zero");
    }
  }

  // Damped Newton on F(c) = c - A(c) c from random starts; the smallest
  // relative residual seen away from the origin is reported.
  const std::vector<double> zero_u(d, 0.0);
  auto residual = [&](std::span<const double> c) {
    const LatentState next = step_affine(model, c, zero_u);
    std::vector<double> r(nd);
    for (std::size_t k = 0; k < nd; ++k) r[k] = c[k] - next[k];
    return r;
  };
  double best = std::numeric_limits<double>::infinity();
  constexpr double kAwayFromOrigin = 0.05;
  for (std::size_t s = 0; s < thresholds.equilibrium_starts; ++s) {
    std::vector<double> c = random_point(probe_rng, nd, thresholds.equilibrium_box);
    for (int iter = 0; iter < 40; ++iter) {
      const std::vector<double> r = residual(c);
      const double cn = norm(c);
      if (cn < kAwayFromOrigin) break;
      best = std::min(best, norm(r) / cn);
      Eigen::MatrixXd jac(nd, nd);
      constexpr double h = 1e-6;
      for (std::size_t k = 0; k < nd; ++k) {
        std::vector<double> cp = c;
        std::vector<double> cm = c;
        cp[k] += h;
        cm[k] -= h;
        const auto rp = residual(cp);
        const auto rm = residual(cm);
        for (std::size_t q = 0; q < nd; ++q) jac(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) =
            (rp[q] - rm[q]) / (2 * h);
      }
      const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(nd));
      const Eigen::VectorXd delta = jac.completeOrthogonalDecomposition().solve(rv);
      if (!delta.allFinite()) break;
      double step_scale = 1.0;
      const double dn = delta.norm();
      if (dn > 1.0) step_scale = 1.0 / dn;
      for (std::size_t k = 0; k < nd; ++k) c[k] -= step_scale * delta(static_cast<Eigen::Index>(k));
      if (norm(c) > 10.0 * thresholds.equilibrium_box) break;
    }
  }
  report.equilibrium_residual = best;
  if (best < thresholds.nonzero) {
    report.warnings.push_back("a non-origin equilibrium candidate was found (relative residual " +
                              std::to_string(best) + ")");
  }
  report.pass = report.failures.empty();
  return report;
}

AssumptionReport check_assumptions(const CanonicalSystem& system, const AssumptionThresholds& thresholds) {
  return std::visit([&](const auto& m) { return check_assumptions(m, thresholds); }, system);
}

LinearCanonicalModel sample_random_linear(std::size_t order, std::size_t inputs, SeededRng& rng,
                                          std::size_t max_attempts) {
  if (order < 1 || inputs < 1) fail(ErrorKind::InvalidArgument, "order and input count must be >= 1");
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    LinearCanonicalModel model;
    model.order = order;
    model.inputs = inputs;
    model.coefficients = rng_uniform(rng, -2.0, 2.0, inputs, inputs * order);
    for (std::size_t i = 0; i < inputs; ++i) model.gains.push_back(rng.uniform(0.2, 2.0));
    if (check_assumptions(model).pass) return model;
  }
  fail(ErrorKind::Assumption, "no admissible linear system after " + std::to_string(max_attempts) + " attempts");
}

AffineCanonicalModel sample_random_affine(std::size_t order, std::size_t inputs, SeededRng& rng,
                                          const AffineSamplingOptions& options) {
  if (order < 1 || inputs < 1) fail(ErrorKind::InvalidArgument, "order and input count must be >= 1");
  if (!(options.floor_a > 0.0) || !(options.floor_b > 0.0)) {
    fail(ErrorKind::InvalidArgument, "coefficient floors h_a and h_b must be positive");
  }
  if (!(options.floor_a < options.coefficient_bound) || !(options.floor_b < options.coefficient_bound)) {
    fail(ErrorKind::InvalidArgument, "coefficient floors must lie below the coefficient bound");
  }
  const std::size_t nd = order * inputs;
  const std::size_t outputs = inputs * nd + inputs;
  AffineCanonicalModel model;
  model.order = order;
  model.inputs = inputs;
  model.floor_a = options.floor_a;
  model.floor_b = options.floor_b;
  const std::size_t widths[] = {nd, options.hidden_width, options.hidden_width, outputs};
  model.network = glorot_mlp(widths, rng);
  // Output offsets spread the operating point of each coefficient over its range.
  for (double& b : model.network.layers.back().bias.data()) b = rng.uniform(-1.0, 1.0);
  const double bound = options.coefficient_bound;
  model.heads.assign(outputs, CoefficientHead::squash(bound));
  for (std::size_t i = 0; i < inputs; ++i) {
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    model.heads[i * nd + i * order] = CoefficientHead::floored(sign, options.floor_a, bound - options.floor_a);
    model.heads[inputs * nd + i] = CoefficientHead::floored(1.0, options.floor_b, bound - options.floor_b);
  }
  return model;
}

LinearCanonicalModel mechanical_example() {
  LinearCanonicalModel model;
  model.order = 2;
  model.inputs = 1;
  model.coefficients = Tensor2{{-1.0, 2.0}};
  model.gains = {1.0};
  return model;
}

}  // namespace latentid
