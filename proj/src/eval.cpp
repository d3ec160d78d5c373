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

#include "latentid/eval.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include <Eigen/Dense>

#include "latentid/archive.hpp"

namespace latentid {

namespace {

void note(Warnings* sink, std::string message) {
  if (sink != nullptr) {
    sink->push_back(std::move(message));
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

void check_pair(const Tensor2& a, const Tensor2& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::ShapeMismatch, std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
  if (a.rows() < 3) fail(ErrorKind::InvalidArgument, std::string(what) + " needs at least 3 samples");
}

Eigen::MatrixXd centered(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.rowwise() - m.colwise().mean();
}

// Orthonormal basis of the column space of a centered block, with its rank.
std::pair<Eigen::MatrixXd, Eigen::Index> column_basis(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double tol = std::max(1e-12, s.size() > 0 ? s(0) * 1e-9 : 0.0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;
  return {svd.matrixU().leftCols(rank), rank};
}

}  // namespace

double mcc(const Tensor2& z_hat, const Tensor2& z, Warnings* warnings) {
  check_pair(z_hat, z, "mcc");
  const Eigen::MatrixXd a = centered(z_hat.map());
  const Eigen::MatrixXd b = centered(z.map());
  double total = 0.0;
  // A column is constant when centring removes all but rounding residue.
  const auto flat = [](double centred, double raw) { return centred <= 1e-12 * raw || centred <= 1e-300; };
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double na = a.col(k).norm();
    const double nb = b.col(k).norm();
    if (flat(na, z_hat.map().col(k).norm()) || flat(nb, z.map().col(k).norm())) {
      note(warnings, "mcc: dimension " + std::to_string(k) + " has zero variance and counts as 0");
      continue;
    }
    total += std::min(1.0, std::abs(a.col(k).dot(b.col(k))) / (na * nb));
  }
  return total / static_cast<double>(a.cols());
}

double blockwise_mcc(const Tensor2& z_hat, const Tensor2& z, std::size_t order, std::size_t inputs,
                     Warnings* warnings) {
  check_pair(z_hat, z, "blockwise_mcc");
  if (order == 0 || inputs == 0 || order * inputs != z.cols()) {
    fail(ErrorKind::ShapeMismatch, "blockwise_mcc: " + std::to_string(z.cols()) + " columns do not split into " +
                                       std::to_string(inputs) + " blocks of " + std::to_string(order));
  }
  const Eigen::MatrixXd a = centered(z_hat.map());
  const Eigen::MatrixXd b = centered(z.map());
  const auto n = static_cast<Eigen::Index>(order);
  double total = 0.0;
  for (std::size_t i = 0; i < inputs; ++i) {
    const Eigen::Index start = static_cast<Eigen::Index>(i) * n;
    const auto [qa, ra] = column_basis(a.middleCols(start, n));
    const auto [qb, rb] = column_basis(b.middleCols(start, n));
    if (ra < n || rb < n) {
      note(warnings, "blockwise_mcc: block " + std::to_string(i) + " is rank deficient (" + std::to_string(std::min(ra, rb)) +
                         " of " + std::to_string(n) + "); missing correlations count as 0");
    }
    double block = 0.0;
    if (ra > 0 && rb > 0) {
      const Eigen::VectorXd rho = (qa.transpose() * qb).jacobiSvd().singularValues();
      for (Eigen::Index k = 0; k < rho.size(); ++k) block += std::min(1.0, rho(k));
    }
    total += block / static_cast<double>(n);
  }
  return total / static_cast<double>(inputs);
}

Tensor2 aligned_coefficients(const LinearDynamicsEstimate& est, const LinearCanonicalModel& truth) {
  if (est.order != truth.order || est.inputs != truth.inputs) {
    fail(ErrorKind::ShapeMismatch, "estimate and truth have different (n, d)");
  }
  const std::size_t n = truth.order;
  const std::size_t d = truth.inputs;
  Tensor2 out(d, n * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (truth.gains[i] == 0.0 || truth.gains[j] == 0.0 || est.gains[i] == 0.0) {
        fail(ErrorKind::InvalidArgument, "param_error: gains must be nonzero");
      }
      const double factor = truth.gains[i] * est.gains[j] / (est.gains[i] * truth.gains[j]);
      for (std::size_t k = 0; k < n; ++k) out(i, j * n + k) = factor * est.coefficients(i, j * n + k);
    }
  }
  return out;
}

double param_error(const LinearDynamicsEstimate& est, const LinearCanonicalModel& truth) {
  const Tensor2 aligned = aligned_coefficients(est, truth);
  const double denom = truth.coefficients.map().squaredNorm();
  if (denom == 0.0) fail(ErrorKind::InvalidArgument, "param_error: truth coefficients are all zero");
  return std::sqrt((aligned.map() - truth.coefficients.map()).squaredNorm() / denom);
}

double prediction_mcc(const TrainedModel& model, const TransitionDataset& dataset, Warnings* warnings) {
  const auto& obs = dataset.observed();
  return mcc(predict_next(model, obs.x, obs.u), dataset.hidden().z_next, warnings);
}

AffineFit affine_fit(const Tensor2& z_hat, const Tensor2& z, std::size_t order, std::size_t inputs) {
  const std::size_t nd = order * inputs;
  if (z.cols() != nd || z_hat.cols() != nd || z.rows() != z_hat.rows()) {
    fail(ErrorKind::ShapeMismatch, "affine_fit: expected two N x " + std::to_string(nd) + " arrays, got " +
                                       z_hat.shape_string() + " and " + z.shape_string());
  }
  if (z.rows() <= nd + 1) fail(ErrorKind::InvalidArgument, "affine_fit needs more than nd + 1 samples");
  const auto rows = static_cast<Eigen::Index>(z.rows());
  const auto cols = static_cast<Eigen::Index>(nd);
  Eigen::MatrixXd design(rows, cols + 1);
  design.leftCols(cols) = z.map();
  design.col(cols).setOnes();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols + 1) fail(ErrorKind::InvalidArgument, "affine_fit: latent samples are rank deficient");
  const Eigen::MatrixXd target = z_hat.map();
  const Eigen::MatrixXd beta = qr.solve(target);

  AffineFit fit;
  fit.transform = Tensor2::from_eigen(beta.topRows(cols).transpose());
  const Eigen::VectorXd c = beta.row(cols).transpose();
  fit.offset.assign(c.data(), c.data() + c.size());
  const Eigen::MatrixXd residual = target - design * beta;
  const Eigen::MatrixXd ct = centered(target);
  fit.min_r_squared = 1.0;
  for (Eigen::Index k = 0; k < cols; ++k) {
    const double tot = ct.col(k).squaredNorm();
    const double r2 = tot > 0.0 ? 1.0 - residual.col(k).squaredNorm() / tot : 0.0;
    fit.r_squared.push_back(r2);
    fit.min_r_squared = std::min(fit.min_r_squared, r2);
  }

  const auto& t = fit.transform;
  double total = 0.0, off_block = 0.0, off_diag = 0.0, diag_sq = 0.0;
  for (std::size_t r = 0; r < nd; ++r) {
    for (std::size_t q = 0; q < nd; ++q) {
      const double v = std::abs(t(r, q));
      total += v;
      if (r / order != q / order) off_block += v;
      if (r != q) off_diag += v;
    }
    diag_sq += t(r, r) * t(r, r);
  }
  fit.off_block_mass = total > 0.0 ? off_block / total : 0.0;
  fit.off_diagonal_mass = total > 0.0 ? off_diag / total : 0.0;
  fit.diagonal_norm = std::sqrt(diag_sq);
  fit.offset_norm = c.norm();
  for (std::size_t i = 0; i < inputs; ++i) {
    double lo = t(i * order, i * order), hi = lo, mean_abs = 0.0;
    for (std::size_t k = 0; k < order; ++k) {
      const double v = t(i * order + k, i * order + k);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      mean_abs += std::abs(v);
    }
    mean_abs /= static_cast<double>(order);
    const double spread = mean_abs > 0.0 ? (hi - lo) / mean_abs : std::numeric_limits<double>::infinity();
    fit.diagonal_spread = std::max(fit.diagonal_spread, spread);
  }
  return fit;
}

EvalReport evaluate(const TrainedModel& model, const TransitionDataset& dataset, const CanonicalSystem& truth) {
  const std::size_t n = system_order(truth);
  const std::size_t d = input_dim(truth);
  if (model.order() != n || model.inputs() != d) {
    fail(ErrorKind::ShapeMismatch, "model (n, d) does not match the true system");
  }
  EvalReport report;
  const Tensor2 z_hat = model.encoder.encode(dataset.observed().x);
  const Tensor2& z = dataset.hidden().z;
  report.mcc_repr = mcc(z_hat, z, &report.warnings);
  report.mcc_model = prediction_mcc(model, dataset, &report.warnings);
  report.blockwise_mcc = blockwise_mcc(z_hat, z, n, d, &report.warnings);
  const auto* lin_truth = std::get_if<LinearCanonicalModel>(&truth);
  const auto* lin_est = std::get_if<LinearDynamicsEstimate>(&model.dynamics);
  if (lin_truth != nullptr && lin_est != nullptr) {
    report.param_error = param_error(*lin_est, *lin_truth);
    report.aligned_coefficients = aligned_coefficients(*lin_est, *lin_truth);
  }
  try {
    report.affine_fit = affine_fit(z_hat, z, n, d);
  } catch (const Error& e) {
    report.warnings.push_back(std::string("affine_fit skipped: ") + e.what());
  }
  report.metadata = {{"records", dataset.observed().size()},
                     {"dataset", metadata_to_json(dataset.metadata())},
                     {"training_seed", model.trace.seed}};
  return report;
}

nlohmann::json eval_report_to_json(const EvalReport& r) {
  const AffineFit& f = r.affine_fit;
  nlohmann::json fit = {{"transform", encode_tensor(f.transform)},
                        {"offset", f.offset},
                        {"r_squared", f.r_squared},
                        {"min_r_squared", f.min_r_squared},
                        {"off_block_mass", f.off_block_mass},
                        {"off_diagonal_mass", f.off_diagonal_mass},
                        {"diagonal_spread", f.diagonal_spread},
                        {"offset_norm", f.offset_norm},
                        {"diagonal_norm", f.diagonal_norm}};
  nlohmann::json j = {{"mcc_repr", r.mcc_repr},
                      {"mcc_model", r.mcc_model},
                      {"blockwise_mcc", r.blockwise_mcc},
                      {"param_error", r.param_error ? nlohmann::json(*r.param_error) : nlohmann::json(nullptr)},
                      {"affine_fit", fit},
                      {"metadata", r.metadata},
                      {"warnings", r.warnings}};
  if (r.aligned_coefficients) j["aligned_coefficients"] = encode_tensor(*r.aligned_coefficients);
  return j;
}

std::string eval_csv_header() {
  return "label,mcc_repr,mcc_model,blockwise_mcc,param_error,min_r_squared,off_block_mass,diagonal_spread,offset_norm,"
         "diagonal_norm";
}

std::string eval_csv_row(const EvalReport& r, const std::string& label) {
  char buf[512];
  const AffineFit& f = r.affine_fit;
  const std::string err = r.param_error ? std::to_string(*r.param_error) : "";
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%s,%.6f,%.6f,%.6f,%.6f,%.6f", label.c_str(), r.mcc_repr,
                r.mcc_model, r.blockwise_mcc, err.c_str(), f.min_r_squared, f.off_block_mass, f.diagonal_spread,
                f.offset_norm, f.diagonal_norm);
  return buf;
}

}  // namespace latentid
