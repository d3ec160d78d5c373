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

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "latentid/error.hpp"
#include "latentid/eval.hpp"
#include "support.hpp"

namespace latentid {
namespace {

using testing_support::identity_mixing;

Tensor2 gaussian(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  SeededRng rng(seed);
  return rng_normal(rng, 0.0, 1.0, rows, cols);
}

// Encoder z_hat = x * diag(scale), exact for identity mixing.
EncoderModel scaled_encoder(const std::vector<double>& scale) {
  EncoderModel e = identity_encoder(scale.size());
  for (std::size_t k = 0; k < scale.size(); ++k) e.network.layers[0].weight(k, k) = scale[k];
  return e;
}

TEST(Mcc, IdentityAndScaling) {
  const Tensor2 z = gaussian(1, 200, 3);
  EXPECT_DOUBLE_EQ(mcc(z, z), 1.0);
  Tensor2 neg = z;
  neg.map() *= -2.0;
  EXPECT_NEAR(mcc(neg, z), 1.0, 1e-15);
}

TEST(Mcc, PermutationIsNotForgiven) {
  const Tensor2 z = gaussian(2, 5000, 2);
  Tensor2 swapped(5000, 2);
  swapped.map().col(0) = z.map().col(1);
  swapped.map().col(1) = z.map().col(0);
  EXPECT_LT(mcc(swapped, z), 0.1);
}

TEST(Mcc, ZeroVarianceColumnCountsAsZero) {
  Tensor2 z = gaussian(3, 100, 2);
  Tensor2 zh = z;
  for (std::size_t r = 0; r < 100; ++r) zh(r, 1) = 4.0;
  Warnings w;
  EXPECT_NEAR(mcc(zh, z, &w), 0.5, 1e-15);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("dimension 1"), std::string::npos);
  EXPECT_THROW(mcc(Tensor2(2, 2), Tensor2(2, 2)), Error);
  EXPECT_THROW(mcc(Tensor2(5, 2), Tensor2(5, 3)), Error);
}

TEST(Mcc, InvariantUnderPerDimensionAffineMaps) {
  SeededRng rng(4);
  const Tensor2 z = gaussian(5, 300, 4);
  const Tensor2 zh = gaussian(6, 300, 4);
  const double base = mcc(zh, z);
  for (int t = 0; t < 20; ++t) {
    Tensor2 mapped = zh;
    for (std::size_t k = 0; k < 4; ++k) {
      double slope = rng.uniform(0.1, 5.0) * (rng.below(2) ? 1.0 : -1.0);
      const double shift = rng.uniform(-10, 10);
      mapped.map().col(static_cast<Eigen::Index>(k)) =
          (mapped.map().col(static_cast<Eigen::Index>(k)).array() * slope + shift).matrix();
    }
    EXPECT_NEAR(mcc(mapped, z), base, 1e-12);
    EXPECT_GE(mcc(mapped, z), 0.0);
    EXPECT_LE(mcc(mapped, z), 1.0);
  }
}

TEST(BlockwiseMcc, IdentityAndBlockInvertibleMaps) {
  const std::size_t n = 3, d = 2;
  const Tensor2 z = gaussian(7, 2000, n * d);
  EXPECT_NEAR(blockwise_mcc(z, z, n, d), 1.0, 1e-12);
  SeededRng rng(8);
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd block_map = Eigen::MatrixXd::Zero(6, 6);
    for (std::size_t i = 0; i < d; ++i) {
      block_map.block(static_cast<Eigen::Index>(i * n), static_cast<Eigen::Index>(i * n), 3, 3) =
          rng_normal(rng, 0.0, 1.0, 3, 3).map() + 2.0 * Eigen::MatrixXd::Identity(3, 3);
    }
    Tensor2 zh(2000, 6);
    zh.map() = z.map() * block_map.transpose();
    EXPECT_NEAR(blockwise_mcc(zh, z, n, d), 1.0, 1e-9);
  }
}

TEST(BlockwiseMcc, IndependentLatentsScoreNearZero) {
  const Tensor2 z = gaussian(9, 20000, 4);
  const Tensor2 zh = gaussian(10, 20000, 4);
  EXPECT_LT(blockwise_mcc(zh, z, 2, 2), 0.03);
}

TEST(BlockwiseMcc, RankDeficientBlockWarns) {
  const Tensor2 z = gaussian(11, 500, 4);
  Tensor2 zh = z;
  zh.map().col(1) = zh.map().col(0);  // learned block 0 has rank 1
  Warnings w;
  const double v = blockwise_mcc(zh, z, 2, 2, &w);
  EXPECT_NEAR(v, 0.75, 1e-9);
  EXPECT_FALSE(w.empty());
  EXPECT_THROW(blockwise_mcc(z, z, 3, 2), Error);
}

TEST(ParamError, Examples) {
  const LinearCanonicalModel truth{1, 1, Tensor2{{2.0}}, {1.0}};
  EXPECT_DOUBLE_EQ(param_error(LinearDynamicsEstimate{1, 1, Tensor2{{2.0}}, {1.0}}, truth), 0.0);
  EXPECT_DOUBLE_EQ(param_error(LinearDynamicsEstimate{1, 1, Tensor2{{1.0}}, {1.0}}, truth), 0.5);
  EXPECT_THROW(param_error(LinearDynamicsEstimate{1, 1, Tensor2{{1.0}}, {1.0}},
                           LinearCanonicalModel{1, 1, Tensor2{{0.0}}, {1.0}}),
               Error);
}

TEST(ParamError, GainScaledEstimateHasZeroError) {
  SeededRng rng(12);
  const auto truth = sample_random_linear(3, 3, rng);
  const std::vector<double> b_hat{1.0, -0.4, 2.5};
  LinearDynamicsEstimate est{3, 3, truth.coefficients, b_hat};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 3; ++k) {
        est.coefficients(i, j * 3 + k) *= (b_hat[i] * truth.gains[j]) / (truth.gains[i] * b_hat[j]);
      }
    }
  }
  EXPECT_LE(param_error(est, truth), 1e-14);
  const Tensor2 aligned = aligned_coefficients(est, truth);
  EXPECT_LE((aligned.map() - truth.coefficients.map()).cwiseAbs().maxCoeff(), 1e-14);
  est.coefficients(1, 4) += 0.1;
  EXPECT_GT(param_error(est, truth), 0.0);
}

struct Witness {
  LinearCanonicalModel truth;
  TransitionDataset data;
};

Witness witness_data(std::size_t n, std::size_t d, std::uint64_t seed, double zero_probability = 0.5) {
  SeededRng rng(seed);
  auto sr = rng.split(0);
  auto truth = sample_random_linear(n, d, sr);
  CollectionOptions o;
  o.input_zero_probability = zero_probability;
  auto data = collect_passive(truth, identity_mixing(n * d), 2000, 0.0, rng.split(1), o);
  return {std::move(truth), std::move(data)};
}

TEST(PredictionMcc, GroundTruthWitnessIsExact) {
  const auto w = witness_data(2, 2, 13);
  const TrainedModel model{identity_encoder(4), LinearDynamicsEstimate{2, 2, w.truth.coefficients, w.truth.gains}, {}};
  EXPECT_NEAR(prediction_mcc(model, w.data), 1.0, 1e-12);
}

TEST(PredictionMcc, ConstantEncoderScoresZero) {
  const auto w = witness_data(2, 1, 14, 1.0);
  EncoderModel constant = identity_encoder(2);
  constant.network.layers[0].weight = Tensor2(2, 2);
  constant.network.layers[0].bias = Tensor2{{0.3, -0.1}};
  const TrainedModel model{constant, LinearDynamicsEstimate{2, 1, w.truth.coefficients, {1.0}}, {}};
  Warnings warn;
  EXPECT_EQ(prediction_mcc(model, w.data, &warn), 0.0);
  EXPECT_EQ(warn.size(), 2u);
}

// z_hat = diag(delta_i I_n) z with b_hat^i = delta_i b^i and coefficients
// scaled as in the alignment identity predicts delta_i * z^{t+1} exactly.
TrainedModel scaled_witness(const LinearCanonicalModel& truth, const std::vector<double>& delta) {
  const std::size_t n = truth.order, d = truth.inputs;
  std::vector<double> scale, b_hat;
  for (std::size_t i = 0; i < d; ++i) {
    b_hat.push_back(delta[i] * truth.gains[i]);
    for (std::size_t k = 0; k < n; ++k) scale.push_back(delta[i]);
  }
  LinearDynamicsEstimate est{n, d, truth.coefficients, b_hat};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        est.coefficients(i, j * n + k) *= (b_hat[i] * truth.gains[j]) / (truth.gains[i] * b_hat[j]);
      }
    }
  }
  return TrainedModel{scaled_encoder(scale), est, {}};
}

TEST(PredictionMcc, GainScaledWitnessIsExact) {
  const auto w = witness_data(3, 2, 15);
  const auto model = scaled_witness(w.truth, {-1.7, 0.35});
  EXPECT_NEAR(prediction_mcc(model, w.data), 1.0, 1e-9);
  // The prediction equals delta_i * z^{t+1} componentwise.
  const Tensor2 pred = predict_next(model, w.data.observed().x, w.data.observed().u);
  for (std::size_t r = 0; r < 50; ++r) {
    for (std::size_t k = 0; k < 6; ++k) {
      const double delta = k < 3 ? -1.7 : 0.35;
      EXPECT_NEAR(pred(r, k), delta * w.data.hidden().z_next(r, k), 1e-12);
    }
  }
  EXPECT_LE(param_error(std::get<LinearDynamicsEstimate>(model.dynamics), w.truth), 1e-14);
}

TEST(AffineFit, ScaledLatents) {
  const Tensor2 z = gaussian(16, 100, 4);
  Tensor2 zh = z;
  zh.map() *= 3.0;
  const auto f = affine_fit(zh, z, 2, 2);
  EXPECT_LE((f.transform.map() - 3.0 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  for (double c : f.offset) EXPECT_NEAR(c, 0.0, 1e-12);
  EXPECT_NEAR(f.min_r_squared, 1.0, 1e-12);
  EXPECT_NEAR(f.off_block_mass, 0.0, 1e-12);
  EXPECT_NEAR(f.diagonal_spread, 0.0, 1e-12);
  EXPECT_NEAR(f.diagonal_norm, 6.0, 1e-12);
}

TEST(AffineFit, OffsetRecovered) {
  const Tensor2 z = gaussian(17, 100, 2);
  Tensor2 zh = z;
  zh.map() = (2.0 * zh.map().array() + 1.0).matrix();
  const auto f = affine_fit(zh, z, 2, 1);
  EXPECT_LE((f.transform.map() - 2.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(f.offset[0], 1.0, 1e-12);
  EXPECT_NEAR(f.offset[1], 1.0, 1e-12);
  EXPECT_NEAR(f.offset_norm, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(f.min_r_squared, 1.0, 1e-12);
}

TEST(AffineFit, BlockwiseScalingAtTenTimesDimension) {
  const std::size_t n = 3, d = 2, nd = 6;
  const Tensor2 z = gaussian(18, 10 * nd, nd);
  Eigen::VectorXd diag(6);
  diag << 2, 2, 2, -0.5, -0.5, -0.5;
  Tensor2 zh(z.rows(), nd);
  zh.map() = z.map() * diag.asDiagonal();
  const auto f = affine_fit(zh, z, n, d);
  EXPECT_LE((Eigen::MatrixXd(f.transform.map()) - Eigen::MatrixXd(diag.asDiagonal())).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(f.offset_norm, 1e-9);
  EXPECT_NEAR(f.off_diagonal_mass, 0.0, 1e-9);
}

TEST(AffineFit, SmallNoiseGivesSmallError) {
  const Tensor2 z = gaussian(19, 4000, 4);
  Eigen::MatrixXd t(4, 4);
  t << 1.0, 0.2, 0, 0, -0.3, 0.8, 0, 0, 0, 0, 1.5, 0.1, 0, 0, 0.4, -1.2;
  for (double eps : {1e-2, 1e-4}) {
    const Tensor2 noise = gaussian(20, 4000, 4);
    Tensor2 zh(4000, 4);
    zh.map() = z.map() * t.transpose() + eps * noise.map();
    zh.map().rowwise() += Eigen::RowVector4d(0.5, -1, 0, 2);
    const auto f = affine_fit(zh, z, 2, 2);
    EXPECT_LE((Eigen::MatrixXd(f.transform.map()) - t).norm(), 10 * eps);
    EXPECT_NEAR(f.offset[3], 2.0, 10 * eps);
  }
}

TEST(AffineFit, RejectsDegenerateInput) {
  Tensor2 z = gaussian(21, 50, 2);
  z.map().col(1) = 2.0 * z.map().col(0);
  EXPECT_THROW(affine_fit(z, z, 2, 1), Error);
  const Tensor2 few = gaussian(22, 3, 2);
  EXPECT_THROW(affine_fit(few, few, 2, 1), Error);
}

TEST(Evaluate, ReportForTheWitness) {
  const auto w = witness_data(2, 2, 23);
  const auto model = scaled_witness(w.truth, {0.5, -2.0});
  const EvalReport r = evaluate(model, w.data, w.truth);
  EXPECT_NEAR(r.mcc_repr, 1.0, 1e-12);
  EXPECT_NEAR(r.mcc_model, 1.0, 1e-9);
  EXPECT_NEAR(r.blockwise_mcc, 1.0, 1e-9);
  ASSERT_TRUE(r.param_error.has_value());
  EXPECT_LE(*r.param_error, 1e-14);
  EXPECT_LE(r.affine_fit.off_block_mass, 1e-12);
  EXPECT_LE(r.affine_fit.diagonal_spread, 1e-12);
  const auto j = eval_report_to_json(r);
  for (const char* key : {"mcc_repr", "mcc_model", "blockwise_mcc", "param_error", "affine_fit", "metadata"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(count(eval_csv_row(r, "w")), count(eval_csv_header()));
}

}  // namespace
}  // namespace latentid
