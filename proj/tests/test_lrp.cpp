// Copyright 2026 The eagrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "eagrs/lrp.hpp"
#include "oracles.hpp"

namespace eagrs::lrp {
namespace {

using nn::Activation;
using nn::activate;
using testing::random_fc;
using testing::random_vector;
using testing::toy_sae;
using testing::absorption_oracle;
using testing::path_of;
using testing::random_net;
using testing::sum;

TEST(Lrp, SingleLinearLayerClosedForm) {
  DenseLayer l(2, 1, Activation::kIdentity, false);
  l.weights() = Matrix(1, 2, {2.0, -1.0});
  const std::vector<const DenseLayer*> path{&l};
  const Vector x{1.0, 1.0};
  const auto trace = trace_forward(path, x);
  EXPECT_EQ(trace.output, (Vector{1.0}));
  const Vector rel = propagate(path, trace, trace.output, RelevanceRule::zero());
  EXPECT_EQ(rel, (Vector{2.0, -1.0}));
  EXPECT_EQ(sum(rel), 1.0);
}

TEST(Lrp, ConservationBiasFreeZeroRule) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    RngStream rng(seed);
    const auto layers = random_net(rng, false);
    const auto path = path_of(layers);
    const Vector x = random_vector(rng, layers.front().in_dim());
    const auto trace = trace_forward(path, x);
    const std::size_t unit = rng.uniform_index(trace.output.size());
    Vector seed_rel(trace.output.size(), 0.0);
    seed_rel[unit] = trace.output[unit];
    const Vector rel = propagate(path, trace, seed_rel, RelevanceRule::zero());
    EXPECT_NEAR(sum(rel), trace.output[unit], 1e-9) << "seed " << seed;
  }
}

TEST(Lrp, EpsilonRuleMatchesAbsorptionAccounting) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    RngStream rng(1000 + seed);
    const auto layers = random_net(rng, true);
    const auto path = path_of(layers);
    const Vector x = random_vector(rng, layers.front().in_dim());
    const auto trace = trace_forward(path, x);
    const std::size_t unit = rng.uniform_index(trace.output.size());
    Vector seed_rel(trace.output.size(), 0.0);
    seed_rel[unit] = trace.output[unit];
    const Vector rel = propagate(path, trace, seed_rel, RelevanceRule::eps(1e-6));
    EXPECT_NEAR(sum(rel), absorption_oracle(layers, x, unit, 1e-6), 1e-7) << "seed " << seed;
  }
}

TEST(Lrp, ZeroRuleSkipsDeadUnits) {
  DenseLayer l(2, 2, Activation::kIdentity, false);
  l.weights() = Matrix(2, 2, {1.0, -1.0, 1.0, 1.0});
  const std::vector<const DenseLayer*> path{&l};
  const auto trace = trace_forward(path, Vector{1.0, 1.0});
  EXPECT_EQ(trace.pres[0][0], 0.0);
  const Vector rel = propagate(path, trace, Vector{1.0, 0.0}, RelevanceRule::zero());
  EXPECT_EQ(rel, (Vector{0.0, 0.0}));
}

TEST(Lrp, BackwardErrors) {
  auto m = toy_sae(4, {5, 3}, 1);
  try {
    lrp_backward(m, ForwardTrace{}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMissingForwardCache);
  }
  const auto trace = trace_forward(m, Vector(6, 0.1));
  try {
    lrp_backward(m, trace, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnitOutOfRange);
  }
}

TEST(Lrp, TraceMatchesModelForward) {
  auto m = toy_sae(6, {8, 4}, 2);
  RngStream rng(3);
  const Vector x = random_vector(rng, 15);
  EXPECT_EQ(trace_forward(m, x).output, m.forward(x));
}

TEST(Phi, DiagonalIsZero) {
  auto m = toy_sae(6, {8, 4}, 4);
  RngStream rng(5);
  const Matrix fc = random_fc(rng, 6);
  const auto trace = trace_forward(m, seed_masked_input(fc, 3));
  EXPECT_EQ(phi(m, trace, 3, 3), Matrix(6, 6));
}

TEST(Phi, ComposesBackwardAndUnflatten) {
  auto m = toy_sae(6, {8, 4}, 6);
  RngStream rng(7);
  const Matrix fc = random_fc(rng, 6);
  const auto trace = trace_forward(m, seed_masked_input(fc, 2));
  Matrix expected = unflatten_upper(lrp_backward(m, trace, upper_index(2, 4, 6)), 6);
  for (std::size_t k = 0; k < 6; ++k) expected(2, k) = 0.0;
  EXPECT_EQ(phi(m, trace, 2, 4), expected);
}

TEST(RelevanceForSeed, ZeroInputBiasFreeTanhGivesZero) {
  auto m = toy_sae(6, {8, 4}, 8);
  for (std::size_t l = 0; l < m.depth(); ++l) {
    m.encoder(l).disable_bias();
    m.generator(l).disable_bias();
  }
  // SELU(0) = tanh(0) = 0, so every activation is zero.
  const Matrix zero(6, 6);
  for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(relevance_for_seed(m, zero, r), Matrix(6, 6));
}

TEST(RelevanceForSeed, MatchesBruteForceLoop) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = toy_sae(6, {8, 4}, 100 + seed);
    RngStream rng(seed);
    const Matrix fc = random_fc(rng, 6);
    for (std::size_t r = 0; r < 6; ++r) {
      const Matrix brute = testing::brute_relevance_for_seed(m, fc, r);
      const Matrix fast = relevance_for_seed(m, fc, r);
      for (std::size_t k = 0; k < 36; ++k) EXPECT_NEAR(fast.data()[k], brute.data()[k], 1e-12);
    }
  }
}

TEST(GlobalRelevance, SlicesEqualSeedMaps) {
  auto m = toy_sae(4, {5, 3}, 9);
  RngStream rng(10);
  const Matrix fc = random_fc(rng, 4);
  const auto t = global_relevance(m, fc);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(t.slice(r), relevance_for_seed(m, fc, r));
}

TEST(GlobalRelevance, WorkerCountInvariant) {
  auto m = toy_sae(8, {10, 4}, 11);
  RngStream rng(12);
  const Matrix fc = random_fc(rng, 8);
  EXPECT_EQ(global_relevance(m, fc, RelevanceRule::eps(), 1).values,
            global_relevance(m, fc, RelevanceRule::eps(), 4).values);
}

// Recorded from the first implementation; guards against silent drift.
TEST(GlobalRelevance, GoldenTensorSeed7) {
  auto m = toy_sae(6, {8, 4}, 7);
  RngStream rng(7);
  const Matrix fc = random_fc(rng, 6);
  const auto t = global_relevance(m, fc);
  double total = 0.0, abs_total = 0.0;
  for (double v : t.values) {
    total += v;
    abs_total += std::abs(v);
  }
  EXPECT_NEAR(total, -5.9636559287533197, 1e-12);
  EXPECT_NEAR(abs_total, 16.746198272872729, 1e-12);
  EXPECT_NEAR(t.at(0, 1, 2), -0.00049734551774234612, 1e-14);
  EXPECT_NEAR(t.at(5, 3, 4), 0.26771508296683788, 1e-14);
  EXPECT_EQ(global_relevance(m, fc).values, t.values);
}

TEST(MeanRelevance, Axes) {
  RelevanceTensor t{2, "x", {1, 2, 3, 4, 5, 6, 7, 8}};
  EXPECT_EQ(mean_relevance(t, MeanAxis::kTarget), Matrix(2, 2, {1.5, 3.5, 5.5, 7.5}));
  EXPECT_EQ(mean_relevance(t, MeanAxis::kSource), Matrix(2, 2, {2, 3, 6, 7}));
}

TEST(RelevanceFile, RoundTripAtFloatPrecision) {
  auto m = toy_sae(4, {5, 3}, 13);
  RngStream rng(14);
  std::vector<RelevanceTensor> ts{global_relevance(m, random_fc(rng, 4)), global_relevance(m, random_fc(rng, 4))};
  const auto bytes = serialize_tensors(ts);
  EXPECT_EQ(bytes.size(), 16u + 2 * 64 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EAGR");
  const auto back = deserialize_tensors(bytes);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t k = 0; k < 64; ++k)
      EXPECT_EQ(back[n].values[k], static_cast<double>(static_cast<float>(ts[n].values[k])));
  EXPECT_EQ(serialize_tensors(back), bytes);
}

}  // namespace
}  // namespace eagrs::lrp
