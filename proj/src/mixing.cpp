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

#include "latentid/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace latentid {

namespace {

double activation(double v, double alpha, double beta) { return v + alpha * std::tanh(beta * v); }

double activation_slope(double v, double alpha, double beta) {
  const double t = std::tanh(beta * v);
  return 1.0 + alpha * beta * (1.0 - t * t);
}

Eigen::VectorXd singular_values(const Tensor2& w) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(w.map()));
  return svd.singularValues();
}

}  // namespace

void MixingFunction::validate() const {
  if (input_dim == 0) fail(ErrorKind::InvalidArgument, "mixing input dimension must be positive");
  if (output_dim < input_dim) fail(ErrorKind::InvalidArgument, "mixing output dimension must be >= input dimension");
  if (!(alpha * beta > -1.0)) fail(ErrorKind::InvalidArgument, "activation must be strictly increasing (alpha*beta > -1)");
  if (layers.empty()) fail(ErrorKind::InvalidArgument, "mixing needs at least one layer");
  for (const auto& layer : layers) {
    if (layer.weight.rows() != input_dim || layer.weight.cols() != input_dim || layer.bias.size() != input_dim) {
      fail(ErrorKind::ShapeMismatch, "mixing layers must be square with matching bias");
    }
  }
  if (output_dim > input_dim && (embedding.rows() != output_dim || embedding.cols() != input_dim)) {
    fail(ErrorKind::ShapeMismatch, "mixing embedding must be m x nd");
  }
}

std::vector<double> MixingFunction::apply(std::span<const double> z) const {
  if (z.size() != input_dim) {
    fail(ErrorKind::ShapeMismatch, "mixing expects " + std::to_string(input_dim) + " inputs, got " +
                                       std::to_string(z.size()));
  }
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd pre = layers[l].weight.map() * h;
    for (Eigen::Index k = 0; k < pre.size(); ++k) pre(k) += layers[l].bias[static_cast<std::size_t>(k)];
    if (l + 1 < layers.size()) {
      for (Eigen::Index k = 0; k < pre.size(); ++k) pre(k) = activation(pre(k), alpha, beta);
    }
    h = std::move(pre);
  }
  if (output_dim > input_dim) h = embedding.map() * h;
  return {h.data(), h.data() + h.size()};
}

Tensor2 MixingFunction::apply(const Tensor2& z) const {
  Tensor2 out(z.rows(), output_dim);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const auto x = apply(z.row_span(r));
    std::copy(x.begin(), x.end(), out.row_span(r).begin());
  }
  return out;
}

Tensor2 MixingFunction::jacobian(std::span<const double> z) const {
  if (z.size() != input_dim) fail(ErrorKind::ShapeMismatch, "mixing jacobian input has wrong length");
  const auto n = static_cast<Eigen::Index>(input_dim);
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(z.data(), n);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd pre = layers[l].weight.map() * h;
    for (Eigen::Index k = 0; k < n; ++k) pre(k) += layers[l].bias[static_cast<std::size_t>(k)];
    jac = layers[l].weight.map() * jac;
    if (l + 1 < layers.size()) {
      for (Eigen::Index k = 0; k < n; ++k) {
        jac.row(k) *= activation_slope(pre(k), alpha, beta);
        pre(k) = activation(pre(k), alpha, beta);
      }
    }
    h = std::move(pre);
  }
  if (output_dim > input_dim) jac = embedding.map() * jac;
  return Tensor2::from_eigen(jac);
}

double MixingFunction::min_activation_slope() const { return std::min(1.0, 1.0 + alpha * beta); }
double MixingFunction::max_activation_slope() const { return std::max(1.0, 1.0 + alpha * beta); }

double MixingFunction::distance_lower_bound() const {
  double bound = 1.0;
  for (const auto& layer : layers) bound *= singular_values(layer.weight).minCoeff();
  const auto hidden = static_cast<double>(layers.size() - 1);
  return bound * std::pow(min_activation_slope(), hidden);
}

Tensor2 clamp_singular_values(const Tensor2& w, double lo, double hi) {
  if (!(0.0 < lo && lo <= hi)) fail(ErrorKind::InvalidArgument, "singular value range must satisfy 0 < lo <= hi");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(w.map()), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::VectorXd s = svd.singularValues().cwiseMax(lo).cwiseMin(hi);
  const Eigen::MatrixXd out = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  return Tensor2::from_eigen(out);
}

MixingFunction sample_mixing(std::size_t nd, std::size_t m, SeededRng& rng, const MixingOptions& options) {
  if (nd == 0) fail(ErrorKind::InvalidArgument, "mixing input dimension must be positive");
  if (m < nd) {
    fail(ErrorKind::InvalidArgument, "observation dimension m=" + std::to_string(m) + " is smaller than nd=" +
                                         std::to_string(nd));
  }
  if (options.layers < 1) fail(ErrorKind::InvalidArgument, "mixing needs at least one layer");
  MixingFunction g;
  g.input_dim = nd;
  g.output_dim = m;
  g.alpha = options.alpha;
  g.beta = options.beta;
  g.sigma_min = options.sigma_min;
  g.sigma_max = options.sigma_max;
  g.seed = rng.seed();
  const double sd = 1.0 / std::sqrt(static_cast<double>(nd));
  for (std::size_t l = 0; l < options.layers; ++l) {
    Tensor2 raw = options.identity_init ? Tensor2::identity(nd) : rng_normal(rng, 0.0, sd, nd, nd);
    MixingLayer layer{clamp_singular_values(raw, options.sigma_min, options.sigma_max), std::vector<double>(nd)};
    for (double& b : layer.bias) b = options.bias_scale > 0 ? rng.uniform(-options.bias_scale, options.bias_scale) : 0.0;
    g.layers.push_back(std::move(layer));
  }
  if (m > nd) {
    const Tensor2 raw = rng_normal(rng, 0.0, 1.0, m, nd);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(raw.map()));
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m),
                                                                             static_cast<Eigen::Index>(nd));
    g.embedding = Tensor2::from_eigen(q);
  }
  g.validate();
  return g;
}

MixingConditionReport condition_report(const MixingFunction& g, const Tensor2& samples) {
  if (samples.rows() < 2) fail(ErrorKind::InvalidArgument, "condition report needs at least two samples");
  g.validate();
  MixingConditionReport report;
  const Tensor2 x = g.apply(samples);
  report.min_pairwise_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    for (std::size_t j = i + 1; j < samples.rows(); ++j) {
      const double dz = (samples.map().row(static_cast<Eigen::Index>(i)) -
                         samples.map().row(static_cast<Eigen::Index>(j))).norm();
      if (dz == 0.0) continue;
      const double dx = (x.map().row(static_cast<Eigen::Index>(i)) - x.map().row(static_cast<Eigen::Index>(j))).norm();
      report.min_pairwise_distance = std::min(report.min_pairwise_distance, dx);
      ++report.pairs_considered;
    }
  }
  for (const auto& layer : g.layers) {
    const Eigen::VectorXd s = singular_values(layer.weight);
    report.layer_sigma_min.push_back(s.minCoeff());
    report.layer_sigma_max.push_back(s.maxCoeff());
  }
  report.jacobian_sigma_min_low = std::numeric_limits<double>::infinity();
  report.jacobian_sigma_min_high = 0.0;
  constexpr double h = 1e-6;
  const auto n = static_cast<Eigen::Index>(g.input_dim);
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(g.output_dim), n);
    std::vector<double> z(samples.row_span(r).begin(), samples.row_span(r).end());
    for (Eigen::Index k = 0; k < n; ++k) {
      std::vector<double> zp = z;
      std::vector<double> zm = z;
      zp[static_cast<std::size_t>(k)] += h;
      zm[static_cast<std::size_t>(k)] -= h;
      const auto xp = g.apply(zp);
      const auto xm = g.apply(zm);
      for (Eigen::Index q = 0; q < jac.rows(); ++q) {
        jac(q, k) = (xp[static_cast<std::size_t>(q)] - xm[static_cast<std::size_t>(q)]) / (2 * h);
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    const double smin = svd.singularValues().minCoeff();
    report.jacobian_sigma_min_low = std::min(report.jacobian_sigma_min_low, smin);
    report.jacobian_sigma_min_high = std::max(report.jacobian_sigma_min_high, smin);
  }
  return report;
}

}  // namespace latentid
