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

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "latentid/error.hpp"
#include "latentid/mixing.hpp"
#include "latentid/serialize.hpp"

namespace latentid {
namespace {

Eigen::VectorXd singular_values(const Tensor2& w) {
  return Eigen::MatrixXd(w.map()).jacobiSvd().singularValues();
}

TEST(SampleMixing, IdentitySeededUnitSpectrumIsOrthogonal) {
  SeededRng rng(1);
  MixingOptions o;
  o.identity_init = true;
  o.sigma_min = o.sigma_max = 1.0;
  const auto g = sample_mixing(4, 4, rng, o);
  for (const auto& layer : g.layers) {
    const Eigen::MatrixXd w = layer.weight.map();
    EXPECT_LE((w.transpose() * w - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
  }
}

TEST(SampleMixing, LayerSpectraWithinBounds) {
  SeededRng rng(2);
  const auto g = sample_mixing(6, 6, rng);
  ASSERT_EQ(g.layers.size(), 3u);
  for (const auto& layer : g.layers) {
    const auto s = singular_values(layer.weight);
    EXPECT_GE(s.minCoeff(), 0.5 - 1e-12);
    EXPECT_LE(s.maxCoeff(), 2.0 + 1e-12);
  }
}

TEST(SampleMixing, ReproducibleAndRejectsNarrowOutput) {
  SeededRng a(3), b(3);
  const auto ga = sample_mixing(4, 4, a);
  const auto gb = sample_mixing(4, 4, b);
  const std::vector<double> z{0.1, 0.2, -0.3, 0.9};
  EXPECT_EQ(ga.apply(z), gb.apply(z));
  SeededRng c(3);
  EXPECT_THROW(sample_mixing(4, 3, c), Error);
}

TEST(Apply, DistinctInputsDistinctOutputs) {
  SeededRng rng(4);
  const auto g = sample_mixing(3, 3, rng);
  const std::vector<double> z1{0.2, -0.1, 0.5};
  std::vector<double> z2 = z1;
  z2[1] += 1.0;
  const auto x1 = g.apply(z1);
  const auto x2 = g.apply(z2);
  double d = 0.0;
  for (std::size_t i = 0; i < 3; ++i) d += (x1[i] - x2[i]) * (x1[i] - x2[i]);
  EXPECT_GT(d, 0.0);
  EXPECT_EQ(g.apply(z1), x1);
  EXPECT_THROW(g.apply(std::vector<double>{1.0, 2.0}), Error);
}

TEST(Apply, IdentityWeightsMapOriginToBiasImage) {
  // Identity weights: v1 = b1, then s(v1), v2 = s(v1) + b2, and so on; the last layer has no activation.
  SeededRng rng(5);
  MixingOptions o;
  o.identity_init = true;
  o.sigma_min = o.sigma_max = 1.0;
  const auto g = sample_mixing(2, 2, rng, o);
  const auto s = [&](double v) { return v + g.alpha * std::tanh(g.beta * v); };
  std::vector<double> expect(2);
  for (std::size_t k = 0; k < 2; ++k) {
    double v = g.layers[0].bias[k];
    for (std::size_t l = 1; l < g.layers.size(); ++l) v = s(v) + g.layers[l].bias[k];
    expect[k] = v;
  }
  const auto x = g.apply(std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(x[0], expect[0], 1e-15);
  EXPECT_NEAR(x[1], expect[1], 1e-15);
}

TEST(Apply, WideOutputUsesOrthonormalEmbedding) {
  SeededRng rng(6);
  const auto g = sample_mixing(3, 7, rng);
  EXPECT_EQ(g.apply(std::vector<double>{0.1, 0.2, 0.3}).size(), 7u);
  const Eigen::MatrixXd e = g.embedding.map();
  EXPECT_LE((e.transpose() * e - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-12);
}

TEST(ConditionReport, LinearMixingMatchesSpectrumProduct) {
  // alpha = 0 makes g linear: J = W3 W2 W1, whose singular values are known exactly.
  SeededRng rng(7);
  MixingOptions o;
  o.alpha = 0.0;
  const auto g = sample_mixing(3, 3, rng, o);
  Eigen::MatrixXd product = Eigen::MatrixXd::Identity(3, 3);
  for (const auto& layer : g.layers) product = Eigen::MatrixXd(layer.weight.map()) * product;
  const double smallest = product.jacobiSvd().singularValues().minCoeff();
  const Tensor2 samples = rng_uniform(rng, -1, 1, 20, 3);
  const auto r = condition_report(g, samples);
  EXPECT_NEAR(r.jacobian_sigma_min_low, smallest, 1e-9);
  EXPECT_NEAR(r.jacobian_sigma_min_high, smallest, 1e-9);
}

TEST(ConditionReport, DuplicatePairsExcluded) {
  SeededRng rng(8);
  const auto g = sample_mixing(2, 2, rng);
  Tensor2 samples{{0.1, 0.2}, {0.1, 0.2}, {0.5, -0.5}};
  const auto r = condition_report(g, samples);
  EXPECT_EQ(r.pairs_considered, 2u);
  EXPECT_GT(r.min_pairwise_distance, 0.0);
}

TEST(ConditionReport, SampledMixingHasPositiveJacobianFloor) {
  SeededRng rng(9);
  const auto g = sample_mixing(4, 4, rng);
  const auto r = condition_report(g, rng_uniform(rng, -2, 2, 50, 4));
  EXPECT_GT(r.jacobian_sigma_min_low, 0.0);
  for (std::size_t l = 0; l < r.layer_sigma_min.size(); ++l) {
    EXPECT_GE(r.layer_sigma_min[l], 0.5 - 1e-12);
    EXPECT_LE(r.layer_sigma_max[l], 2.0 + 1e-12);
  }
}

TEST(Properties, EmpiricalInjectivityBound) {
  SeededRng rng(10);
  const auto g = sample_mixing(4, 4, rng);
  const double bound = g.distance_lower_bound();
  const double expected = std::pow(0.5, 3.0) * g.min_activation_slope();
  EXPECT_GE(bound, expected - 1e-15);
  for (int i = 0; i < 10000; ++i) {
    const auto a = rng_uniform(rng, -3, 3, 1, 4).values();
    const auto b = rng_uniform(rng, -3, 3, 1, 4).values();
    double dz = 0.0, dx = 0.0;
    const auto ga = g.apply(a);
    const auto gb = g.apply(b);
    for (std::size_t k = 0; k < 4; ++k) {
      dz += (a[k] - b[k]) * (a[k] - b[k]);
      dx += (ga[k] - gb[k]) * (ga[k] - gb[k]);
    }
    if (std::sqrt(dz) < 1e-3) continue;
    ASSERT_GT(dx, 0.0);
    ASSERT_GE(std::sqrt(dx), expected * std::sqrt(dz) * (1 - 1e-12));
  }
}

TEST(Properties, AnalyticJacobianMatchesNumeric) {
  SeededRng rng(11);
  const auto g = sample_mixing(3, 5, rng);
  constexpr double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    auto z = rng_uniform(rng, -2, 2, 1, 3).values();
    const Tensor2 j = g.jacobian(z);
    Eigen::MatrixXd numeric(5, 3);
    for (std::size_t c = 0; c < 3; ++c) {
      const double keep = z[c];
      z[c] = keep + h;
      const auto up = g.apply(z);
      z[c] = keep - h;
      const auto down = g.apply(z);
      z[c] = keep;
      for (std::size_t r = 0; r < 5; ++r) numeric(r, c) = (up[r] - down[r]) / (2 * h);
    }
    ASSERT_TRUE(numeric.allFinite());
    EXPECT_LE((Eigen::MatrixXd(j.map()) - numeric).norm() / numeric.norm(), 1e-5);
  }
}

TEST(Serialize, MixingRoundTripIsBitExact) {
  SeededRng rng(12);
  const auto g = sample_mixing(3, 4, rng);
  const auto back = mixing_from_json(mixing_to_json(g));
  const std::vector<double> z{0.3, -0.7, 1.1};
  EXPECT_EQ(g.apply(z), back.apply(z));
}

}  // namespace
}  // namespace latentid
