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
#include <filesystem>

#include "eagrs/nn/activation.hpp"
#include "eagrs/nn/adam.hpp"
#include "eagrs/nn/checkpoint.hpp"
#include "eagrs/nn/dense.hpp"
#include "eagrs/nn/gradcheck.hpp"
#include "eagrs/nn/gumbel.hpp"
#include "eagrs/nn/loss.hpp"
#include "test_util.hpp"

namespace eagrs::nn {
namespace {

using testing::random_vector;

TEST(Activation, SeluConstants) {
  EXPECT_DOUBLE_EQ(selu(1.0), kSeluLambda);
  EXPECT_DOUBLE_EQ(selu(0.0), 0.0);
  EXPECT_NEAR(selu(-1.0), kSeluLambda * kSeluAlpha * (std::exp(-1.0) - 1.0), 1e-15);
  EXPECT_NEAR(selu(-50.0), -kSeluLambda * kSeluAlpha, 1e-12);
}

TEST(Activation, SoftmaxSumsToOne) {
  RngStream rng(4);
  for (int t = 0; t < 100; ++t) {
    const Vector z = random_vector(rng, 1 + t % 9, -30.0, 30.0);
    const Vector p = activate(Activation::kSoftmax, z);
    double s = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  // Large logits stay finite.
  const Vector p = activate(Activation::kSoftmax, Vector{1000.0, 0.0});
  EXPECT_DOUBLE_EQ(p[0], 1.0);
}

TEST(Activation, JacobianMatchesFiniteDifference) {
  RngStream rng(8);
  for (Activation a : {Activation::kIdentity, Activation::kSelu, Activation::kTanh, Activation::kRelu,
                       Activation::kSigmoid, Activation::kSoftmax}) {
    Vector z = random_vector(rng, 5, -2.0, 2.0);
    for (double& v : z)
      if (std::abs(v) < 0.05) v = 0.5;  // keep away from kinks
    const auto res = activation_and_grad(a, z);
    const double h = 1e-6;
    for (std::size_t j = 0; j < z.size(); ++j) {
      Vector zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      const Vector yp = activate(a, zp), ym = activate(a, zm);
      for (std::size_t i = 0; i < z.size(); ++i) {
        EXPECT_NEAR(res.jacobian(i, j), (yp[i] - ym[i]) / (2 * h), 1e-8) << activation_name(a);
      }
    }
  }
}

TEST(Activation, TanhAndSigmoidDerivatives) {
  const auto t = activation_and_grad(Activation::kTanh, Vector{0.3});
  EXPECT_NEAR(t.jacobian(0, 0), 1.0 - std::tanh(0.3) * std::tanh(0.3), 1e-15);
  const auto s = activation_and_grad(Activation::kSigmoid, Vector{-0.7});
  const double sg = 1.0 / (1.0 + std::exp(0.7));
  EXPECT_NEAR(s.jacobian(0, 0), sg * (1 - sg), 1e-15);
}

TEST(Activation, NameAndTagRoundTrip) {
  for (std::uint32_t tag = 0; tag < 6; ++tag) {
    const Activation a = activation_from_tag(tag);
    EXPECT_EQ(activation_from_name(activation_name(a)), a);
  }
  EXPECT_THROW(activation_from_tag(17), Error);
  EXPECT_THROW(activation_from_name("gelu"), Error);
  EXPECT_THROW(activation_and_grad(Activation::kTanh, Vector{std::nan("")}), Error);
}

TEST(Dense, IdentityLayer) {
  DenseLayer l(2, 2, Activation::kIdentity);
  l.weights() = Matrix::identity(2);
  EXPECT_EQ(l.forward(Vector{1, 2}), (Vector{1, 2}));
}

TEST(Dense, ReluClipsNegative) {
  DenseLayer l(2, 1, Activation::kRelu);
  l.weights() = Matrix(1, 2, {1.0, -1.0});
  EXPECT_EQ(l.forward(Vector{1, 2}), (Vector{0.0}));
}

TEST(Dense, DimensionMismatchAndMissingCache) {
  DenseLayer l(3, 2, Activation::kTanh);
  EXPECT_THROW(l.forward(Vector{1, 2}), Error);
  try {
    l.backward(Vector{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMissingForwardCache);
  }
}

std::pair<double, Vector> mse_to(const Vector& target, std::span<const double> out) {
  return {mse_loss(target, out), mse_grad(target, out)};
}

TEST(GradCheck, LinearNetQuadraticLoss) {
  RngStream rng(1);
  const std::size_t dims[] = {4, 3, 2};
  const Activation acts[] = {Activation::kIdentity, Activation::kIdentity};
  Mlp net = Mlp::build(dims, acts, rng);
  const Vector x = random_vector(rng, 4), y = random_vector(rng, 2);
  const double err = gradient_check(net, [&](auto out) { return mse_to(y, out); }, x, 1e-4, Stencil::kFourPoint);
  EXPECT_LT(err, 1e-9);
}

TEST(GradCheck, TwoLayerTanh) {
  RngStream rng(2);
  const std::size_t dims[] = {5, 4, 3};
  const Activation acts[] = {Activation::kTanh, Activation::kTanh};
  Mlp net = Mlp::build(dims, acts, rng);
  const Vector x = random_vector(rng, 5), y = random_vector(rng, 3);
  EXPECT_LT(gradient_check(net, [&](auto out) { return mse_to(y, out); }, x, 1e-5), 1e-6);
}

/// Random architecture per seed; ReLU probes avoid pre-activations near zero.
TEST(GradCheck, RandomNetworksManySeeds) {
  const Activation hidden_kinds[] = {Activation::kSelu, Activation::kTanh, Activation::kSigmoid, Activation::kRelu,
                                     Activation::kIdentity};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    RngStream rng(seed);
    const std::size_t depth = 1 + rng.uniform_index(3);
    std::vector<std::size_t> dims{2 + rng.uniform_index(6)};
    std::vector<Activation> acts;
    for (std::size_t l = 0; l < depth; ++l) {
      dims.push_back(2 + rng.uniform_index(6));
      acts.push_back(hidden_kinds[rng.uniform_index(5)]);
    }
    const bool softmax_head = seed % 2 == 0;
    dims.push_back(softmax_head ? 2 : 3);
    acts.push_back(softmax_head ? Activation::kSoftmax : Activation::kTanh);
    Mlp net = Mlp::build(dims, acts, rng);
    for (auto& l : net.layers())
      for (double& b : l.bias()) b = rng.uniform(-0.3, 0.3);
    Vector x;
    bool clear = false;
    for (int attempt = 0; attempt < 50 && !clear; ++attempt) {
      x = random_vector(rng, dims.front());
      net.forward(x);
      clear = true;
      for (const auto& l : net.layers())
        for (double z : l.cached_pre()) clear = clear && std::abs(z) > 1e-3;
    }
    ASSERT_TRUE(clear);
    double err = 0.0;
    if (softmax_head) {
      const Vector y = seed % 4 == 0 ? Vector{1.0, 0.0} : Vector{0.0, 1.0};
      err = gradient_check(
          net, [&](auto p) { return std::pair{cross_entropy_loss(y, p), cross_entropy_grad(y, p)}; }, x, 1e-4,
          Stencil::kFourPoint);
    } else {
      const Vector y = random_vector(rng, 3);
      err = gradient_check(net, [&](auto out) { return mse_to(y, out); }, x, 1e-4, Stencil::kFourPoint);
    }
    worst = std::max(worst, err);
    EXPECT_LT(err, 1e-5) << "seed " << seed;
  }
  RecordProperty("worst_rel_error", std::to_string(worst));
}

TEST(GradCheck, ConvMerge) {
  RngStream rng(3);
  Conv1DChannelMerge conv(0.4, -0.9, 0.1);
  const Vector in = random_vector(rng, 10), w = random_vector(rng, 5);
  auto loss = [&] {
    const Vector out = conv.forward(in);
    return dot(out, w) + 0.5 * dot(out, out);
  };
  conv.zero_grad();
  Vector out = conv.forward(in);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[i];
  conv.backward(out);
  const auto blocks = conv.params();
  EXPECT_LT(gradient_check_blocks(blocks, loss, 1e-5).max_rel_error, 1e-8);
}

TEST(GradCheck, NonFiniteLossThrows) {
  RngStream rng(3);
  const std::size_t dims[] = {2, 1};
  const Activation acts[] = {Activation::kIdentity};
  Mlp net = Mlp::build(dims, acts, rng);
  try {
    gradient_check(net, [](auto) { return std::pair{std::nan(""), Vector{0.0}}; }, Vector{1, 1}, 1e-5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNonFiniteLoss);
  }
}

TEST(Loss, MseExamples) {
  EXPECT_EQ(mse_loss(Vector{1, 2}, Vector{1, 2}), 0.0);
  EXPECT_EQ(mse_loss(Vector{0, 0}, Vector{1, 1}), 1.0);
  RngStream rng(6);
  const Vector a = random_vector(rng, 13), b = random_vector(rng, 13);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(mse_loss(a, b), s / 13.0, 1e-15);
}

TEST(Loss, CrossEntropyExamples) {
  EXPECT_NEAR(cross_entropy_loss(Vector{1, 0}, Vector{1 - 1e-12, 1e-12}), 0.0, 1e-11);
  EXPECT_NEAR(cross_entropy_loss(Vector{1, 0}, Vector{0.5, 0.5}), std::log(2.0), 1e-15);
  const std::vector<Vector> y{{1, 0}, {0, 1}};
  const std::vector<Vector> p{{0.7, 0.3}, {0.6, 0.4}};
  EXPECT_NEAR(cross_entropy_loss(y, p), 0.5 * (-std::log(0.7) - std::log(0.4)), 1e-15);
  // Clamped at 1e-12 rather than infinite.
  EXPECT_NEAR(cross_entropy_loss(Vector{1, 0}, Vector{0.0, 1.0}), -std::log(1e-12), 1e-9);
}

TEST(Loss, InvalidProbability) {
  try {
    cross_entropy_loss(Vector{1, 0}, Vector{0.7, 0.7});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidProbability);
  }
  EXPECT_THROW(cross_entropy_loss(Vector{1, 0}, Vector{1.5, -0.5}), Error);
}

TEST(Adam, FirstStepMovesByLr) {
  Vector theta{1.0, -2.0}, grad{0.3, -5.0};
  std::vector<ParamBlock> blocks{{theta, grad}};
  AdamState adam({0.01, 0.9, 0.999, 1e-8, 0.0});
  adam.step(blocks);
  EXPECT_NEAR(theta[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(theta[1], -2.0 + 0.01, 1e-9);
}

TEST(Adam, ZeroGradientNoDecayIsFixedPoint) {
  Vector theta{1.0, -2.0}, grad{0.0, 0.0};
  std::vector<ParamBlock> blocks{{theta, grad}};
  AdamState adam({0.01, 0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 5; ++i) adam.step(blocks);
  EXPECT_EQ(theta, (Vector{1.0, -2.0}));
}

TEST(Adam, ThreeStepScalarOracle) {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  const double gs[] = {0.5, -1.0, 2.0};
  // Hand-rolled recurrence.
  double th = 0.7, m = 0, v = 0;
  for (int t = 1; t <= 3; ++t) {
    const double g = gs[t - 1] + wd * th;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    th -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }
  Vector theta{0.7}, grad{0.0};
  std::vector<ParamBlock> blocks{{theta, grad}};
  AdamState adam({lr, b1, b2, eps, wd});
  for (double g : gs) {
    grad[0] = g;
    adam.step(blocks);
  }
  EXPECT_NEAR(theta[0], th, 1e-15);
}

TEST(Gumbel, VanishingTemperatureIsHardThreshold) {
  const Vector logits{0.3, -0.2, 1.0, -1.0};
  const Vector noise{0.1, 0.4, -1.5, 0.8};
  GumbelGate gate(1e-6);
  const Vector y = gate.forward(logits, noise);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], logits[i] + noise[i] > 0 ? 1.0 : 0.0);
}

TEST(Gumbel, HardEval) { EXPECT_EQ(GumbelGate(0.01).hard(Vector{10, -10}), (Vector{1, 0})); }

TEST(Gumbel, NonPositiveTemperature) {
  try {
    GumbelGate g(0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNonPositiveTemperature);
  }
}

// Values from an independent SplitMix64 + closed-form computation.
TEST(Gumbel, GoldenVectorSeed7) {
  const Vector zeros(8, 0.0);
  RngStream a(7);
  const Vector cold = GumbelGate(0.01).forward(zeros, a);
  const Vector cold_expected{1.0, 1.0, 1.0, 1.0, 2.3301119666317807e-36, 4.6991837298751416e-175, 1.0, 1.0};
  RngStream b(7);
  const Vector warm = GumbelGate(1.0).forward(zeros, b);
  const Vector warm_expected{0.8126818516759448, 0.8377598099195499, 0.6364724736941179, 0.5947545896357052,
                             0.3056635890056728, 0.017739721853780727, 0.6168902030370876, 0.8043529492532624};
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(cold[i], cold_expected[i], 1e-12 * std::max(1.0, cold_expected[i]));
    EXPECT_NEAR(warm[i], warm_expected[i], 1e-12);
  }
  // Closed form recomputed from the stream.
  RngStream c(7);
  for (std::size_t i = 0; i < 8; ++i) {
    const double g1 = c.gumbel(), g0 = c.gumbel();
    EXPECT_NEAR(warm[i], 1.0 / (1.0 + std::exp(-(g1 - g0))), 1e-14);
  }
}

TEST(Gumbel, BackwardMatchesFiniteDifference) {
  const Vector logits{0.3, -0.2, 1.0}, noise{0.1, -0.4, 0.2};
  GumbelGate gate(0.7);
  const Vector y = gate.forward(logits, noise);
  const Vector dl = gate.backward(Vector{1.0, 1.0, 1.0});
  for (std::size_t i = 0; i < 3; ++i) {
    Vector lp = logits, lm = logits;
    lp[i] += 1e-6;
    lm[i] -= 1e-6;
    GumbelGate g2(0.7);
    const double fd = (g2.forward(lp, noise)[i] - g2.forward(lm, noise)[i]) / 2e-6;
    EXPECT_NEAR(dl[i], fd, 1e-8);
  }
  (void)y;
}

TEST(Checkpoint, RoundTrip) {
  RngStream rng(12);
  const std::size_t dims[] = {6, 4, 2};
  const Activation acts[] = {Activation::kSelu, Activation::kSoftmax};
  Mlp net = Mlp::build(dims, acts, rng);
  net.layers()[1].disable_bias();
  std::vector<DenseLayer> layers = net.layers();
  for (auto& l : layers) l.clear_cache();
  const auto bytes = serialize_layers(layers);
  const auto back = deserialize_layers(bytes);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].weights(), layers[i].weights());
    EXPECT_EQ(back[i].bias(), layers[i].bias());
    EXPECT_EQ(back[i].activation(), layers[i].activation());
    EXPECT_EQ(back[i].bias_enabled(), layers[i].bias_enabled());
  }
  EXPECT_EQ(serialize_layers(back), bytes);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(deserialize_layers(truncated), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_layers(bad_magic), Error);
}

}  // namespace
}  // namespace eagrs::nn
