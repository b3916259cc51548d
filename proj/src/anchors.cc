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

#include "detbench/anchors.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace detbench {
namespace {

struct BestMatch {
  double iou = 0;
  std::optional<size_t> gt;
};

BestMatch BestGt(const Box& anchor, std::span<const LabeledBox> gts) {
  BestMatch best;
  for (size_t g = 0; g < gts.size(); ++g) {
    const double iou = Iou(anchor, gts[g].box);
    if (iou > best.iou) {
      best.iou = iou;
      best.gt = g;
    }
  }
  return best;
}

bool InsideImage(const Box& b, int image_w, int image_h) {
  return b.xmin >= 0 && b.ymin >= 0 && b.xmax <= image_w && b.ymax <= image_h;
}

// Partial Fisher-Yates: the first `count` entries of `pool` become a uniform
// sample without replacement.
std::vector<size_t> SampleWithoutReplacement(std::vector<size_t> pool,
                                             size_t count, std::mt19937_64& rng) {
  count = std::min(count, pool.size());
  for (size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double SampleBilinear(const FeatureGrid& f, double u, double v, int c) {
  u = std::clamp(u, 0.0, static_cast<double>(f.width() - 1));
  v = std::clamp(v, 0.0, static_cast<double>(f.height() - 1));
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const int x1 = std::min(x0 + 1, f.width() - 1);
  const int y1 = std::min(y0 + 1, f.height() - 1);
  const double ax = u - x0;
  const double ay = v - y0;
  const double top = (1 - ax) * f.at(x0, y0, c) + ax * f.at(x1, y0, c);
  const double bottom = (1 - ax) * f.at(x0, y1, c) + ax * f.at(x1, y1, c);
  return (1 - ay) * top + ay * bottom;
}

}  // namespace

AnchorGrid GenerateAnchors(int image_w, int image_h,
                           const AnchorConfig& config) {
  if (!(config.stride > 0)) throw InvalidArgument("anchor stride must be positive");
  if (image_w <= 0 || image_h <= 0) {
    throw InvalidArgument("image dimensions must be positive");
  }
  if (config.scales.empty() || config.ratios.empty()) {
    throw InvalidArgument("anchor scales and ratios must be non-empty");
  }
  for (double s : config.scales) {
    if (!(s > 0)) throw InvalidArgument("anchor scales must be positive");
  }
  for (double r : config.ratios) {
    if (!(r > 0)) throw InvalidArgument("anchor ratios must be positive");
  }

  AnchorGrid grid;
  grid.stride = config.stride;
  grid.scales = config.scales;
  grid.ratios = config.ratios;
  grid.image_w = image_w;
  grid.image_h = image_h;
  grid.cells_x = static_cast<int>(std::floor(image_w / config.stride));
  grid.cells_y = static_cast<int>(std::floor(image_h / config.stride));
  grid.anchors.reserve(static_cast<size_t>(grid.cells_x) * grid.cells_y *
                       grid.AnchorsPerCell());
  for (int cy = 0; cy < grid.cells_y; ++cy) {
    for (int cx = 0; cx < grid.cells_x; ++cx) {
      const double center_x = (cx + 0.5) * config.stride;
      const double center_y = (cy + 0.5) * config.stride;
      for (double ratio : config.ratios) {
        const double root = std::sqrt(ratio);
        for (double scale : config.scales) {
          grid.anchors.push_back(
              Box::FromCenter(center_x, center_y, scale / root, scale * root));
        }
      }
    }
  }
  return grid;
}

std::vector<TargetAssignment> AssignRpnTargets(
    std::span<const Box> anchors, std::span<const LabeledBox> gts,
    const RpnAssignOptions& options, int image_w, int image_h) {
  const RpnThresholds& thr = options.thresholds;
  if (!(thr.foreground > thr.background)) {
    throw InvalidArgument("foreground threshold must exceed background threshold");
  }
  std::vector<TargetAssignment> out(anchors.size());
  std::vector<bool> eligible(anchors.size(), true);

  for (size_t a = 0; a < anchors.size(); ++a) {
    TargetAssignment& t = out[a];
    t.anchor_index = a;
    if (options.exclude_outside && !InsideImage(anchors[a], image_w, image_h)) {
      eligible[a] = false;
      t.label = AnchorLabel::kIgnore;
      continue;
    }
    const BestMatch best = BestGt(anchors[a], gts);
    t.max_iou = best.iou;
    if (best.gt && best.iou > thr.foreground) {
      t.label = AnchorLabel::kForeground;
      t.matched_gt = best.gt;
    } else if (best.iou < thr.background) {
      t.label = AnchorLabel::kBackground;
    } else {
      t.label = AnchorLabel::kIgnore;
    }
  }

  // Forcing pass, in gt order.
  std::vector<size_t> fg_per_gt(gts.size(), 0);
  for (const TargetAssignment& t : out) {
    if (t.label == AnchorLabel::kForeground) ++fg_per_gt[*t.matched_gt];
  }
  for (size_t g = 0; g < gts.size(); ++g) {
    if (fg_per_gt[g] > 0) continue;
    std::optional<size_t> free_best;
    std::optional<size_t> any_best;
    double free_iou = 0;
    double any_iou = 0;
    for (size_t a = 0; a < anchors.size(); ++a) {
      if (!eligible[a]) continue;
      const double iou = Iou(anchors[a], gts[g].box);
      if (iou <= 0) continue;
      const TargetAssignment& t = out[a];
      // Stealing is only allowed from a gt that keeps another anchor.
      const bool stealable = t.label != AnchorLabel::kForeground ||
                             fg_per_gt[*t.matched_gt] > 1;
      if (iou > any_iou) {
        any_iou = iou;
        any_best = a;
      }
      if (stealable && t.label != AnchorLabel::kForeground && iou > free_iou) {
        free_iou = iou;
        free_best = a;
      }
    }
    std::optional<size_t> chosen = free_best;
    if (!chosen && any_best) {
      const TargetAssignment& t = out[*any_best];
      if (fg_per_gt[*t.matched_gt] > 1) chosen = any_best;
    }
    if (!chosen) continue;
    TargetAssignment& t = out[*chosen];
    if (t.label == AnchorLabel::kForeground) --fg_per_gt[*t.matched_gt];
    t.label = AnchorLabel::kForeground;
    t.matched_gt = g;
    ++fg_per_gt[g];
  }

  for (size_t a = 0; a < out.size(); ++a) {
    TargetAssignment& t = out[a];
    if (t.label == AnchorLabel::kForeground) {
      t.deltas = EncodeDeltas(anchors[a], gts[*t.matched_gt].box);
    } else {
      t.matched_gt.reset();
    }
  }
  return out;
}

std::vector<TargetAssignment> AssignRpnTargets(
    const AnchorGrid& grid, std::span<const LabeledBox> gts,
    const RpnAssignOptions& options) {
  return AssignRpnTargets(grid.anchors, gts, options, grid.image_w,
                          grid.image_h);
}

std::vector<size_t> SampleMinibatch(std::span<const TargetAssignment> assignments,
                                    const MinibatchOptions& options,
                                    Warnings* warnings) {
  if (options.batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (!(options.fg_fraction >= 0.0 && options.fg_fraction <= 1.0)) {
    throw InvalidArgument("foreground fraction must lie in [0, 1]");
  }
  std::vector<size_t> fg_pool;
  std::vector<size_t> bg_pool;
  for (size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i].label == AnchorLabel::kForeground) fg_pool.push_back(i);
    if (assignments[i].label == AnchorLabel::kBackground) bg_pool.push_back(i);
  }
  if (fg_pool.empty()) {
    Warn(warnings, "no foreground anchors; minibatch is all background");
  }
  std::mt19937_64 rng(options.seed);
  const auto fg_quota = static_cast<size_t>(
      std::floor(options.fg_fraction * static_cast<double>(options.batch_size)));
  std::vector<size_t> batch =
      SampleWithoutReplacement(std::move(fg_pool), fg_quota, rng);
  const size_t bg_quota = options.batch_size - batch.size();
  std::vector<size_t> bg = SampleWithoutReplacement(std::move(bg_pool), bg_quota, rng);
  batch.insert(batch.end(), bg.begin(), bg.end());
  return batch;
}

std::vector<TargetAssignment> AssignProposalTargets(
    std::span<const Box> proposals, std::span<const LabeledBox> gts,
    const ProposalThresholds& thresholds) {
  if (!(thresholds.foreground > thresholds.background_low)) {
    throw InvalidArgument("foreground threshold must exceed background threshold");
  }
  std::vector<TargetAssignment> out(proposals.size());
  for (size_t p = 0; p < proposals.size(); ++p) {
    TargetAssignment& t = out[p];
    t.anchor_index = p;
    const BestMatch best = BestGt(proposals[p], gts);
    t.max_iou = best.iou;
    if (best.gt && best.iou > thresholds.foreground) {
      t.label = AnchorLabel::kForeground;
      t.matched_gt = best.gt;
      t.class_id = gts[*best.gt].class_id;
      t.deltas = EncodeDeltas(proposals[p], gts[*best.gt].box);
    } else if (best.iou >= thresholds.background_low) {
      t.label = AnchorLabel::kBackground;
    } else {
      t.label = AnchorLabel::kIgnore;
    }
  }
  return out;
}

FeatureGrid::FeatureGrid(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw InvalidArgument("feature grid dimensions must be positive");
  }
  values_.assign(static_cast<size_t>(width) * height * channels, fill);
}

FeatureGrid RoiCrop(const FeatureGrid& feature, const Box& proposal,
                    double stride, int crop_size) {
  if (!(stride > 0) || crop_size <= 0) {
    throw InvalidArgument("stride and crop size must be positive");
  }
  if (!proposal.IsValid()) throw InvalidArgument("degenerate proposal box");
  const Box extent{0, 0, feature.width() * stride, feature.height() * stride};
  if (IntersectionArea(proposal, extent) <= 0) {
    throw InvalidArgument("proposal lies outside the feature grid");
  }
  FeatureGrid out(crop_size, crop_size, feature.channels());
  const double step_x = proposal.Width() / crop_size;
  const double step_y = proposal.Height() / crop_size;
  for (int j = 0; j < crop_size; ++j) {
    const double v = (proposal.ymin + (j + 0.5) * step_y) / stride - 0.5;
    for (int i = 0; i < crop_size; ++i) {
      const double u = (proposal.xmin + (i + 0.5) * step_x) / stride - 0.5;
      for (int c = 0; c < feature.channels(); ++c) {
        out.at(i, j, c) = SampleBilinear(feature, u, v, c);
      }
    }
  }
  return out;
}

FeatureGrid MaxPool(const FeatureGrid& input, int kernel) {
  if (kernel <= 0) throw InvalidArgument("pool kernel must be positive");
  const int out_w = input.width() / kernel;
  const int out_h = input.height() / kernel;
  if (out_w == 0 || out_h == 0) {
    throw InvalidArgument("pool kernel larger than input");
  }
  FeatureGrid out(out_w, out_h, input.channels());
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < input.channels(); ++c) {
        double m = input.at(x * kernel, y * kernel, c);
        for (int dy = 0; dy < kernel; ++dy) {
          for (int dx = 0; dx < kernel; ++dx) {
            m = std::max(m, input.at(x * kernel + dx, y * kernel + dy, c));
          }
        }
        out.at(x, y, c) = m;
      }
    }
  }
  return out;
}

FeatureGrid RoiCropPool(const FeatureGrid& feature, const Box& proposal,
                        const RoiPoolOptions& options) {
  return MaxPool(RoiCrop(feature, proposal, options.stride, options.crop_size),
                 options.pool_kernel);
}

}  // namespace detbench
