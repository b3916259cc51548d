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

// Detection scoring against ground truth.
//
// Matching is greedy per image and class: detections are visited in
// descending confidence (ties broken by input index) and each claims the
// highest-IoU unmatched ground truth of its class with IoU >= the threshold.
// Everything downstream (per-class P/R/F1, confidence sweeps, AP, the COCO
// style mAP/AR family, PR curves) is built on that single matcher.

#ifndef DETBENCH_EVAL_H_
#define DETBENCH_EVAL_H_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detbench/dataset.h"
#include "detbench/geometry.h"

namespace detbench {

struct DetectionOutcome {
  // Index into the detection list passed to MatchDetections.
  size_t detection_index = 0;
  bool true_positive = false;
  // Set for true positives: index into the image's ground-truth list.
  std::optional<size_t> gt_index;
  double iou = 0;
  // False positive whose best same-class IoU is below the threshold.
  bool outside_iou = false;
};

struct MissedGroundTruth {
  std::string image_id;
  size_t gt_index = 0;
  ClassId class_id = ClassId::kCategoryI;
};

struct MatchCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t fp_outside = 0;
  int64_t support = 0;
};

struct MatchResult {
  double iou_threshold = 0.5;
  double confidence_threshold = 0;
  // One entry per detection that survived the confidence filter, in input
  // order.
  std::vector<DetectionOutcome> outcomes;
  std::vector<MissedGroundTruth> missed;
  std::array<MatchCounts, kNumClasses> per_class{};
};

// Detections with confidence < cs_threshold are discarded first. A detection
// whose image_id is absent from `gts` throws an invariant Error.
MatchResult MatchDetections(std::span<const Detection> detections,
                            const GroundTruthMap& gts, double iou_threshold,
                            double cs_threshold = 0.0);

struct ClassMetrics {
  ClassId class_id = ClassId::kCategoryI;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  int64_t support = 0;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t fp_outside = 0;
};

// 2PR / (P + R), or 0 when P + R == 0.
double F1Score(double precision, double recall);

// Metrics from raw counts; zero denominators give 0.
ClassMetrics MetricsFromCounts(ClassId id, const MatchCounts& counts);

// One entry per class in kAllClasses order.
std::vector<ClassMetrics> ComputeClassMetrics(const MatchResult& match);

struct MeanAverage {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double support = 0;
  int classes = 0;
};

// Arithmetic means over classes with support > 0. Throws an empty-result
// Error when no class has support.
MeanAverage ComputeMeanAverage(std::span<const ClassMetrics> metrics);

struct EvalReport {
  double iou_threshold = 0.5;
  double confidence_threshold = 0;
  std::vector<ClassMetrics> per_class;
  std::optional<MeanAverage> mean;
  int64_t total_fp = 0;
  int64_t total_fp_outside = 0;
  int64_t detections_scored = 0;
};

EvalReport Evaluate(std::span<const Detection> detections,
                    const GroundTruthMap& gts, double iou_threshold,
                    double cs_threshold);

inline const std::vector<double> kDefaultConfidenceSweep = {0.30, 0.50, 0.75,
                                                            0.90};

// One report per confidence threshold; cs_list must be ascending.
std::vector<EvalReport> Sweep(std::span<const Detection> detections,
                              const GroundTruthMap& gts, double iou_threshold = 0.5,
                              std::span<const double> cs_list = kDefaultConfidenceSweep);

// Ranked TP/FP flags for one class over the whole set, with the class's
// ground-truth count. Ranking: confidence desc, then image_id, then input
// index.
struct RankedDetections {
  std::vector<bool> true_positive;
  std::vector<double> confidence;
  int64_t num_gt = 0;
};

RankedDetections RankClass(std::span<const Detection> detections,
                           const GroundTruthMap& gts, ClassId class_id,
                           double iou_threshold);

// 101-point interpolated AP from a ranked list; nullopt when num_gt == 0.
std::optional<double> InterpolatedAp101(const RankedDetections& ranked);

std::optional<double> AveragePrecision(std::span<const Detection> detections,
                                       const GroundTruthMap& gts,
                                       ClassId class_id, double iou_threshold);

// COCO-style area ranges on ground-truth area.
enum class SizeBucket { kAll, kSmall, kMedium, kLarge };
inline constexpr double kSmallAreaMax = 32.0 * 32.0;
inline constexpr double kMediumAreaMax = 96.0 * 96.0;
bool InBucket(double area, SizeBucket bucket);

// 0.50, 0.55, ..., 0.95.
std::array<double, 10> CocoIouThresholds();

// Entries are nullopt when no class has ground truth in that bucket.
struct CocoMapSuite {
  std::optional<double> map;
  std::optional<double> map50;
  std::optional<double> map75;
  std::optional<double> map_small;
  std::optional<double> map_medium;
  std::optional<double> map_large;
};

// AP for one bucket: ground truths outside the bucket are ignored, as are
// detections matched to them and unmatched detections whose own area falls
// outside the bucket. Averaged over classes with ground truth in the bucket.
std::optional<double> MeanAveragePrecision(std::span<const Detection> detections,
                                           const GroundTruthMap& gts,
                                           double iou_threshold,
                                           SizeBucket bucket = SizeBucket::kAll);

CocoMapSuite ComputeCocoMapSuite(std::span<const Detection> detections,
                                 const GroundTruthMap& gts);

// Keeps the top-k detections per image and class, then averages recall over
// the ten COCO IoU thresholds and over classes with ground truth in the
// bucket. nullopt when there is no such class.
std::optional<double> AverageRecallAt(std::span<const Detection> detections,
                                      const GroundTruthMap& gts, int k,
                                      SizeBucket bucket = SizeBucket::kAll);

struct PrPoint {
  double recall = 0;
  double precision = 0;
  double confidence = 0;
};

struct PrCurve {
  ClassId class_id = ClassId::kCategoryI;
  // One point per distinct confidence cutoff, descending cutoff; recall is
  // non-decreasing along the list.
  std::vector<PrPoint> points;
  // Trapezoidal area over recall under the monotone precision envelope,
  // starting from recall 0.
  double auc = 0;
};

// Throws an empty-result Error when the class has no ground truth.
PrCurve ComputePrCurve(std::span<const Detection> detections,
                       const GroundTruthMap& gts, ClassId class_id,
                       double iou_threshold = 0.5);

}  // namespace detbench

#endif  // DETBENCH_EVAL_H_
