// Copyright 2026 The Detbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "detbench/trainmath.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.h"

namespace detbench {
namespace {

TEST(BceTest, ClosedForms) {
  EXPECT_NEAR(BceLoss(0.999999, 1), 0.0, 1e-5);
  EXPECT_NEAR(BceLoss(0.5, 0), std::log(2.0), 1e-12);
  EXPECT_NEAR(BceLoss(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(BceLoss(0.1, 1), 2.302585, 1e-6);
  EXPECT_NEAR(BceLoss(1.0, 1), 0.0, 1e-11);
  EXPECT_TRUE(std::isfinite(BceLoss(0.0, 1)));
  EXPECT_THROW(BceLoss(1.2, 1), Error);
  EXPECT_THROW(BceLoss(0.5, 0.5), Error);
}

TEST(SmoothL1Test, BranchesAndContinuity) {
  EXPECT_EQ(SmoothL1Loss({1, 2, 3, 4}, {1, 2, 3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(SmoothL1Loss({0.5, 0, 0, 0}, {0, 0, 0, 0}), 0.125);
  EXPECT_DOUBLE_EQ(SmoothL1Loss({0, 0, 2, 0}, {0, 0, 0, 0}), 1.5);
  EXPECT_NEAR(SmoothL1(1.0), 0.5, 1e-12);
  EXPECT_NEAR(SmoothL1(std::nextafter(1.0, 0.0)), 0.5, 1e-12);
  EXPECT_NEAR(SmoothL1(-1.0), 0.5, 1e-12);
  EXPECT_NEAR(SmoothL1Gradient(std::nextafter(1.0, 0.0)), SmoothL1Gradient(1.0), 1e-12);
}

TEST(SoftmaxTest, ClosedFormsAndShiftInvariance) {
  const std::vector<double> uniform(6, 0.3);
  EXPECT_NEAR(SoftmaxCrossEntropy(uniform, 2), std::log(6.0), 1e-12);
  EXPECT_NEAR(SoftmaxCrossEntropy(std::vector<double>{1, 0}, 0), 0.3132617, 1e-7);
  EXPECT_NEAR(SoftmaxCrossEntropy(std::vector<double>{800, 0, 0}, 0), 0.0, 1e-12);
  EXPECT_THROW(SoftmaxCrossEntropy(std::vector<double>{1, 0}, 2), Error);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> l(5);
    for (double& v : l) v = n(rng);
    const double base = SoftmaxCrossEntropy(l, i % 5);
    for (double& v : l) v += 17.25;
    EXPECT_NEAR(SoftmaxCrossEntropy(l, i % 5), base, 1e-12);
  }
}

TEST(FastRcnnTest, Composition) {
  const std::vector<double> logits = {0.2, 1.0, -0.5};
  const double ce0 = SoftmaxCrossEntropy(logits, 0);
  const double ce1 = SoftmaxCrossEntropy(logits, 1);
  EXPECT_DOUBLE_EQ(FastRcnnLoss(logits, 0, {5, 5, 5, 5}, {0, 0, 0, 0}), ce0);
  EXPECT_DOUBLE_EQ(FastRcnnLoss(logits, 1, {1, 2, 3, 4}, {1, 2, 3, 4}), ce1);
  EXPECT_NEAR(FastRcnnLoss(logits, 1, {2, 0, 0, 0}, {0, 0, 0, 0}), ce1 + 1.5, 1e-12);
  EXPECT_NEAR(FastRcnnLoss(logits, 1, {2, 0, 0, 0}, {0, 0, 0, 0}, 3.0), ce1 + 4.5, 1e-12);
}

TEST(CombineLossesTest, ReferenceSumAndLinearity) {
  const LossParts parts{0.0593, 0.0598, 0.2015, 0.0564};
  EXPECT_NEAR(CombineLosses(parts).total, 0.3770, 1e-4);
  LossWeights w;
  w.cls_classification = 2;
  EXPECT_NEAR(CombineLosses(parts, w).total - CombineLosses(parts).total, 0.2015, 1e-12);
  w = {};
  w.rpn_objectness = -1;
  EXPECT_THROW(CombineLosses(parts, w), Error);
  EXPECT_THROW(CombineLosses({-0.1, 0, 0, 0}), Error);
}

TEST(ReluTest, Examples) {
  EXPECT_EQ(Relu(-3), 0.0);
  EXPECT_EQ(Relu(0), 0.0);
  EXPECT_EQ(Relu(2.5), 2.5);
}

TEST(GradientCheckTest, AllLossesMatchFiniteDifferences) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> prob(0.02, 0.98), d(-3, 3);
  for (int i = 0; i < 300; ++i) {
    const double p = prob(rng);
    const double star = i % 2;
    EXPECT_TRUE(oracle::RelClose(
        BceLossGradient(p, star),
        oracle::NumericDerivative([&](double x) { return BceLoss(x, star); }, p), 1e-5));

    double x = d(rng);
    if (std::abs(std::abs(x) - 1) < 1e-3) x += 0.01;  // kink
    EXPECT_TRUE(oracle::RelClose(SmoothL1Gradient(x),
                                 oracle::NumericDerivative(SmoothL1, x), 1e-5));

    const BoxDelta t{d(rng), d(rng), d(rng), d(rng)}, ts{d(rng), d(rng), d(rng), d(rng)};
    const BoxDelta g = SmoothL1LossGradient(t, ts);
    auto along = [&](int k) {
      return oracle::NumericDerivative(
          [&](double v) {
            BoxDelta u = t;
            (k == 0 ? u.dx : k == 1 ? u.dy : k == 2 ? u.dw : u.dh) = v;
            return SmoothL1Loss(u, ts);
          },
          k == 0 ? t.dx : k == 1 ? t.dy : k == 2 ? t.dw : t.dh);
    };
    const double coords[4] = {t.dx - ts.dx, t.dy - ts.dy, t.dw - ts.dw, t.dh - ts.dh};
    const double grads[4] = {g.dx, g.dy, g.dw, g.dh};
    for (int k = 0; k < 4; ++k) {
      if (std::abs(std::abs(coords[k]) - 1) < 1e-3) continue;
      EXPECT_TRUE(oracle::RelClose(grads[k], along(k), 1e-5));
    }

    std::vector<double> logits(6);
    for (double& v : logits) v = d(rng);
    const size_t u = i % 6;
    const std::vector<double> sg = SoftmaxCrossEntropyGradient(logits, u);
    for (size_t k = 0; k < logits.size(); ++k) {
      const double num = oracle::NumericDerivative(
          [&](double v) {
            std::vector<double> l = logits;
            l[k] = v;
            return SoftmaxCrossEntropy(l, u);
          },
          logits[k]);
      EXPECT_TRUE(oracle::RelClose(sg[k], num, 1e-5)) << sg[k] << " vs " << num;
    }
  }
}

TEST(AdamTest, FirstStepMagnitudeIsLearningRate) {
  AdamState adam(3, {0.01});
  const std::vector<double> g = {0.5, -2.0, 7.0};
  const std::vector<double> step = adam.Step(g);
  for (size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(std::abs(step[i]), 0.01 * std::abs(g[i]) / (std::abs(g[i]) + 1e-8), 1e-15);
    EXPECT_LT(step[i] * g[i], 0);
  }
  EXPECT_EQ(adam.step(), 1);
}

TEST(AdamTest, ZeroGradientNeverMoves) {
  AdamState adam(2, {0.1});
  std::vector<double> theta = {1.5, -2.0};
  const std::vector<double> zero = {0, 0};
  for (int i = 0; i < 50; ++i) adam.Apply(theta, zero);
  EXPECT_EQ(theta, (std::vector<double>{1.5, -2.0}));
  for (double v : adam.second_moment()) EXPECT_EQ(v, 0.0);
}

TEST(AdamTest, QuadraticConvergesAndMatchesScalarOracle) {
  AdamState adam(1, {0.1});
  oracle::ScalarAdam ref{0.1};
  std::vector<double> theta = {1.0};
  double theta_ref = 1.0;
  int reached = 0;
  for (int t = 1; t <= 200; ++t) {
    const double g = 2 * theta[0];
    adam.Apply(theta, std::span<const double>(&g, 1));
    theta_ref += ref.Update(2 * theta_ref);
    ASSERT_NEAR(theta[0], theta_ref, 1e-10) << "step " << t;
    if (!reached && std::abs(theta[0]) < 1e-3) reached = t;
  }
  EXPECT_GT(reached, 0);
  EXPECT_LE(reached, 200);
}

TEST(AdamTest, ReferenceRateTenDimQuadratic) {
  const size_t n = 10;
  AdamState adam(n, {kReferenceLearningRate});
  std::vector<oracle::ScalarAdam> ref(n, oracle::ScalarAdam{kReferenceLearningRate});
  std::vector<double> theta(n), theta_ref(n), scale(n);
  for (size_t i = 0; i < n; ++i) {
    theta[i] = theta_ref[i] = 0.3 * (static_cast<double>(i) - 4.5);
    scale[i] = 1.0 + i;
  }
  for (int t = 0; t < 500; ++t) {
    std::vector<double> g(n);
    for (size_t i = 0; i < n; ++i) g[i] = 2 * scale[i] * theta[i];
    adam.Apply(theta, g);
    for (size_t i = 0; i < n; ++i) {
      theta_ref[i] += ref[i].Update(2 * scale[i] * theta_ref[i]);
      ASSERT_NEAR(theta[i], theta_ref[i], 1e-10);
    }
  }
}

TEST(AdamTest, EpsilonInsideSqrtVariant) {
  AdamConfig config{0.1};
  config.epsilon = 1e-2;
  config.placement = EpsilonPlacement::kInsideSqrt;
  AdamState adam(1, config);
  const double g = 0.05;
  const double step = adam.Step(std::span<const double>(&g, 1))[0];
  EXPECT_NEAR(step, -0.1 * g / std::sqrt(g * g + 1e-2), 1e-15);
}

}  // namespace
}  // namespace detbench
