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

// Anchor tiling, first- and second-stage target assignment, balanced
// minibatch sampling and RoI crop/pool on a synthetic feature grid.

#ifndef DETBENCH_ANCHORS_H_
#define DETBENCH_ANCHORS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "detbench/geometry.h"

namespace detbench {

struct AnchorConfig {
  double stride = 16;
  std::vector<double> scales = {128, 256, 512};
  // Height:width ratios. Anchors of one scale share area s*s.
  std::vector<double> ratios = {0.5, 1.0, 2.0};
};

struct AnchorGrid {
  double stride = 0;
  std::vector<double> scales;
  std::vector<double> ratios;
  int image_w = 0;
  int image_h = 0;
  int cells_x = 0;
  int cells_y = 0;
  // Cell-major (row, then column), then ratio, then scale.
  std::vector<Box> anchors;

  size_t AnchorsPerCell() const { return scales.size() * ratios.size(); }
};

AnchorGrid GenerateAnchors(int image_w, int image_h, const AnchorConfig& config);

enum class AnchorLabel { kForeground, kBackground, kIgnore };

struct TargetAssignment {
  size_t anchor_index = 0;
  AnchorLabel label = AnchorLabel::kIgnore;
  std::optional<size_t> matched_gt;
  // Present iff label is kForeground.
  std::optional<BoxDelta> deltas;
  // Second-stage only: class of the matched ground truth.
  std::optional<ClassId> class_id;
  // Highest IoU against any ground truth.
  double max_iou = 0;
};

// Proposals kept per image after NMS when feeding the second stage.
inline constexpr int kDefaultTopNProposals = 300;

struct RpnThresholds {
  double foreground = 0.5;
  double background = 0.1;

  static RpnThresholds Default() { return {0.5, 0.1}; }
  // Stricter 0.7 / 0.3 pair.
  static RpnThresholds NmsParagraph() { return {0.7, 0.3}; }
};

struct RpnAssignOptions {
  RpnThresholds thresholds;
  // Anchors that cross the image border are labeled kIgnore and never forced.
  bool exclude_outside = false;
};

// Rules: max IoU > fg -> foreground (deltas to the argmax gt); max IoU < bg
// -> background; otherwise ignore. Each gt left without a foreground anchor
// claims its highest-IoU anchor, provided that IoU is positive.
std::vector<TargetAssignment> AssignRpnTargets(
    const AnchorGrid& grid, std::span<const LabeledBox> gts,
    const RpnAssignOptions& options = {});

std::vector<TargetAssignment> AssignRpnTargets(
    std::span<const Box> anchors, std::span<const LabeledBox> gts,
    const RpnAssignOptions& options, int image_w, int image_h);

struct MinibatchOptions {
  size_t batch_size = 256;
  double fg_fraction = 0.5;
  uint64_t seed = 0;
};

// Uniform sampling without replacement: up to fg_fraction * batch_size
// foreground indices, the rest background. Returns assignment positions,
// foreground first, each group ascending.
std::vector<size_t> SampleMinibatch(std::span<const TargetAssignment> assignments,
                                    const MinibatchOptions& options,
                                    Warnings* warnings = nullptr);

struct ProposalThresholds {
  double foreground = 0.5;
  double background_low = 0.1;
};

// IoU > fg -> class of the gt with deltas; [bg_low, fg] -> background;
// below bg_low -> ignore.
std::vector<TargetAssignment> AssignProposalTargets(
    std::span<const Box> proposals, std::span<const LabeledBox> gts,
    const ProposalThresholds& thresholds = {});

// Dense H x W x C tensor, channel fastest.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }

  double at(int x, int y, int c) const { return values_[Offset(x, y, c)]; }
  double& at(int x, int y, int c) { return values_[Offset(x, y, c)]; }

  std::span<const double> values() const { return values_; }

 private:
  size_t Offset(int x, int y, int c) const {
    return (static_cast<size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

struct RoiPoolOptions {
  double stride = 16;
  int crop_size = 14;
  int pool_kernel = 2;
};

// Bilinear crop to crop_size x crop_size (sample points at sub-cell centers,
// edge-replicated), then non-overlapping max pooling. Proposal coordinates
// are image pixels; feature cell (i, j) covers [i*stride, (i+1)*stride).
FeatureGrid RoiCropPool(const FeatureGrid& feature, const Box& proposal,
                        const RoiPoolOptions& options = {});

// The bilinear crop stage on its own.
FeatureGrid RoiCrop(const FeatureGrid& feature, const Box& proposal,
                    double stride, int crop_size);

FeatureGrid MaxPool(const FeatureGrid& input, int kernel);

}  // namespace detbench

#endif  // DETBENCH_ANCHORS_H_
