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

#include <algorithm>
#include <cmath>

namespace detbench {
namespace {

void CheckBceArgs(double p, double p_star) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("probability outside [0, 1]");
  if (p_star != 0.0 && p_star != 1.0) {
    throw InvalidArgument("binary label must be 0 or 1");
  }
}

double ClampProbability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

void CheckLogits(std::span<const double> logits, size_t target) {
  if (logits.size() < 2) throw InvalidArgument("softmax needs at least two classes");
  if (target >= logits.size()) throw InvalidArgument("class index out of range");
}

}  // namespace

double BceLoss(double p, double p_star) {
  CheckBceArgs(p, p_star);
  const double q = ClampProbability(p);
  return -(p_star * std::log(q) + (1.0 - p_star) * std::log(1.0 - q));
}

double BceLossGradient(double p, double p_star) {
  CheckBceArgs(p, p_star);
  const double q = ClampProbability(p);
  return -p_star / q + (1.0 - p_star) / (1.0 - q);
}

double SmoothL1(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double SmoothL1Gradient(double d) {
  if (std::abs(d) < 1.0) return d;
  return d > 0 ? 1.0 : -1.0;
}

double SmoothL1Loss(const BoxDelta& t, const BoxDelta& t_star) {
  return SmoothL1(t.dx - t_star.dx) + SmoothL1(t.dy - t_star.dy) +
         SmoothL1(t.dw - t_star.dw) + SmoothL1(t.dh - t_star.dh);
}

BoxDelta SmoothL1LossGradient(const BoxDelta& t, const BoxDelta& t_star) {
  return {SmoothL1Gradient(t.dx - t_star.dx), SmoothL1Gradient(t.dy - t_star.dy),
          SmoothL1Gradient(t.dw - t_star.dw), SmoothL1Gradient(t.dh - t_star.dh)};
}

double SoftmaxCrossEntropy(std::span<const double> logits, size_t target) {
  CheckLogits(logits, target);
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (double z : logits) sum += std::exp(z - top);
  return std::log(sum) - (logits[target] - top);
}

std::vector<double> SoftmaxCrossEntropyGradient(std::span<const double> logits,
                                                size_t target) {
  CheckLogits(logits, target);
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> grad(logits.size());
  double sum = 0;
  for (size_t j = 0; j < logits.size(); ++j) {
    grad[j] = std::exp(logits[j] - top);
    sum += grad[j];
  }
  for (double& g : grad) g /= sum;
  grad[target] -= 1.0;
  return grad;
}

double FastRcnnLoss(std::span<const double> logits, size_t target,
                    const BoxDelta& t_u, const BoxDelta& v, double lambda) {
  double loss = SoftmaxCrossEntropy(logits, target);
  if (target >= 1) loss += lambda * SmoothL1Loss(t_u, v);
  return loss;
}

LossBreakdown CombineLosses(const LossParts& parts, const LossWeights& weights) {
  const double p[] = {parts.rpn_objectness, parts.rpn_localisation,
                      parts.cls_classification, parts.cls_localisation};
  const double w[] = {weights.rpn_objectness, weights.rpn_localisation,
                      weights.cls_classification, weights.cls_localisation};
  LossBreakdown out{parts, weights, 0.0};
  for (int i = 0; i < 4; ++i) {
    if (!(p[i] >= 0)) throw InvalidArgument("loss terms must be non-negative");
    if (!(w[i] >= 0)) throw InvalidArgument("loss weights must be non-negative");
    out.total += w[i] * p[i];
  }
  return out;
}

AdamState::AdamState(size_t num_params, const AdamConfig& config)
    : config_(config), m_(num_params, 0.0), v_(num_params, 0.0) {
  if (!(config.beta1 >= 0 && config.beta1 < 1) ||
      !(config.beta2 >= 0 && config.beta2 < 1)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (!(config.epsilon > 0)) throw InvalidArgument("Adam epsilon must be positive");
}

std::vector<double> AdamState::Step(std::span<const double> grads) {
  if (grads.size() != m_.size()) {
    throw InvalidArgument("gradient size does not match the optimizer state");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw InvalidArgument("non-finite gradient");
  }
  ++t_;
  const double t = static_cast<double>(t_);
  const double m_correction = 1.0 - std::pow(config_.beta1, t);
  const double v_correction = 1.0 - std::pow(config_.beta2, t);
  std::vector<double> update(m_.size());
  for (size_t i = 0; i < m_.size(); ++i) {
    const double g = grads[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    const double m_hat = m_[i] / m_correction;
    const double v_hat = v_[i] / v_correction;
    const double denom = config_.placement == EpsilonPlacement::kOutsideSqrt
                             ? std::sqrt(v_hat) + config_.epsilon
                             : std::sqrt(v_hat + config_.epsilon);
    update[i] = -config_.learning_rate * m_hat / denom;
  }
  return update;
}

void AdamState::Apply(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size()) {
    throw InvalidArgument("parameter size does not match the optimizer state");
  }
  const std::vector<double> update = Step(grads);
  for (size_t i = 0; i < params.size(); ++i) params[i] += update[i];
}

}  // namespace detbench
