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

#ifndef DETBENCH_TRAINMATH_H_
#define DETBENCH_TRAINMATH_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "detbench/geometry.h"

namespace detbench {

// Predictions are clamped to [kProbabilityClamp, 1 - kProbabilityClamp].
inline constexpr double kProbabilityClamp = 1e-12;

// Binary log loss. p must lie in [0, 1]; p_star must be 0 or 1.
double BceLoss(double p, double p_star);
double BceLossGradient(double p, double p_star);  // d/dp

// Sum over the four box coordinates of 0.5 d^2 (|d| < 1) or |d| - 0.5.
double SmoothL1(double d);
double SmoothL1Gradient(double d);
double SmoothL1Loss(const BoxDelta& t, const BoxDelta& t_star);
// d/dt for each coordinate.
BoxDelta SmoothL1LossGradient(const BoxDelta& t, const BoxDelta& t_star);

// -log softmax(logits)[target], max-subtracted. K >= 2.
double SoftmaxCrossEntropy(std::span<const double> logits, size_t target);
std::vector<double> SoftmaxCrossEntropyGradient(std::span<const double> logits,
                                                size_t target);

// Classification plus lambda-weighted regression; class 0 is background and
// contributes no regression term.
double FastRcnnLoss(std::span<const double> logits, size_t target,
                    const BoxDelta& t_u, const BoxDelta& v, double lambda = 1.0);

struct LossParts {
  double rpn_objectness = 0;
  double rpn_localisation = 0;
  double cls_classification = 0;
  double cls_localisation = 0;
};

struct LossWeights {
  double rpn_objectness = 1;
  double rpn_localisation = 1;
  double cls_classification = 1;
  double cls_localisation = 1;
};

struct LossBreakdown {
  LossParts parts;
  LossWeights weights;
  double total = 0;
};

LossBreakdown CombineLosses(const LossParts& parts, const LossWeights& weights = {});

inline double Relu(double x) { return x > 0 ? x : 0.0; }

enum class EpsilonPlacement {
  // lr * m_hat / (sqrt(v_hat) + eps)
  kOutsideSqrt,
  // lr * m_hat / sqrt(v_hat + eps)
  kInsideSqrt,
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  EpsilonPlacement placement = EpsilonPlacement::kOutsideSqrt;
};

// Training learning rate of the reference detector.
inline constexpr double kReferenceLearningRate = 0.0004;

// Per-parameter moment accumulators. Single owner; not thread-safe.
class AdamState {
 public:
  AdamState(size_t num_params, const AdamConfig& config = {});

  // Advances one step and returns the parameter update (to be added to the
  // parameters). grads must have num_params() finite entries.
  std::vector<double> Step(std::span<const double> grads);

  // Step() then add the update in place.
  void Apply(std::span<double> params, std::span<const double> grads);

  size_t num_params() const { return m_.size(); }
  int64_t step() const { return t_; }
  const AdamConfig& config() const { return config_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  int64_t t_ = 0;
};

}  // namespace detbench

#endif  // DETBENCH_TRAINMATH_H_
