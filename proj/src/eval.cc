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

#include "detbench/eval.h"

#include <algorithm>
#include <map>
#include <numeric>

namespace detbench {
namespace {

void CheckThreshold(double value, const char* what) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvalidArgument(std::string(what) + " must lie in [0, 1]");
  }
}

void CheckDetection(const Detection& d) {
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw InvalidArgument("detection confidence outside [0, 1] for image '" +
                          d.image_id + "'");
  }
  if (!d.box.IsValid()) {
    throw InvalidArgument("degenerate detection box for image '" + d.image_id + "'");
  }
}

// Detection indices grouped by image, each group in visiting order
// (confidence desc, input index asc).
std::map<std::string, std::vector<size_t>> GroupByImage(
    std::span<const Detection> detections, std::span<const size_t> selected) {
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i : selected) groups[detections[i].image_id].push_back(i);
  for (auto& [image, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return detections[a].confidence > detections[b].confidence;
    });
  }
  return groups;
}

// Shared matcher over an arbitrary subset of detections.
MatchResult MatchSubset(std::span<const Detection> detections,
                        std::span<const size_t> selected,
                        const GroundTruthMap& gts, double iou_threshold) {
  MatchResult result;
  result.iou_threshold = iou_threshold;
  for (const auto& [image, boxes] : gts) {
    for (const LabeledBox& b : boxes) ++result.per_class[Index(b.class_id)].support;
  }

  std::map<size_t, DetectionOutcome> outcomes;
  std::map<std::string, std::vector<bool>> matched_by_image;
  for (const auto& [image, order] : GroupByImage(detections, selected)) {
    auto gt_it = gts.find(image);
    if (gt_it == gts.end()) {
      throw InvariantError("detection references unknown image '" + image + "'");
    }
    const std::vector<LabeledBox>& boxes = gt_it->second;
    std::vector<bool>& matched = matched_by_image[image];
    matched.assign(boxes.size(), false);
    for (size_t d : order) {
      const Detection& det = detections[d];
      DetectionOutcome out;
      out.detection_index = d;
      double best_iou = -1;
      std::optional<size_t> best_gt;
      double max_same_class = 0;
      for (size_t g = 0; g < boxes.size(); ++g) {
        if (boxes[g].class_id != det.class_id) continue;
        const double iou = Iou(det.box, boxes[g].box);
        max_same_class = std::max(max_same_class, iou);
        if (matched[g] || iou < iou_threshold) continue;
        if (iou > best_iou) {
          best_iou = iou;
          best_gt = g;
        }
      }
      MatchCounts& counts = result.per_class[Index(det.class_id)];
      if (best_gt) {
        matched[*best_gt] = true;
        out.true_positive = true;
        out.gt_index = best_gt;
        out.iou = best_iou;
        ++counts.tp;
      } else {
        out.iou = max_same_class;
        out.outside_iou = max_same_class < iou_threshold;
        ++counts.fp;
        if (out.outside_iou) ++counts.fp_outside;
      }
      outcomes.emplace(d, out);
    }
  }

  for (const auto& [image, boxes] : gts) {
    auto it = matched_by_image.find(image);
    for (size_t g = 0; g < boxes.size(); ++g) {
      if (it != matched_by_image.end() && it->second[g]) continue;
      result.missed.push_back({image, g, boxes[g].class_id});
      ++result.per_class[Index(boxes[g].class_id)].fn;
    }
  }
  result.outcomes.reserve(outcomes.size());
  for (auto& [idx, out] : outcomes) result.outcomes.push_back(out);
  return result;
}

std::vector<size_t> AllIndices(size_t n) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  return idx;
}

// Ranked outcomes for one class and size bucket, built from a full match.
RankedDetections RankFromMatch(std::span<const Detection> detections,
                               const MatchResult& match, const GroundTruthMap& gts,
                               ClassId class_id, SizeBucket bucket) {
  struct Entry {
    size_t index;
    bool tp;
  };
  std::vector<Entry> entries;
  for (const DetectionOutcome& o : match.outcomes) {
    const Detection& d = detections[o.detection_index];
    if (d.class_id != class_id) continue;
    if (o.true_positive) {
      const LabeledBox& gt = gts.at(d.image_id)[*o.gt_index];
      if (!InBucket(gt.box.Area(), bucket)) continue;
    } else if (!InBucket(d.box.Area(), bucket)) {
      continue;
    }
    entries.push_back({o.detection_index, o.true_positive});
  }
  std::stable_sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
    const Detection& da = detections[a.index];
    const Detection& db = detections[b.index];
    if (da.confidence != db.confidence) return da.confidence > db.confidence;
    if (da.image_id != db.image_id) return da.image_id < db.image_id;
    return a.index < b.index;
  });
  RankedDetections ranked;
  for (const Entry& e : entries) {
    ranked.true_positive.push_back(e.tp);
    ranked.confidence.push_back(detections[e.index].confidence);
  }
  for (const auto& [image, boxes] : gts) {
    for (const LabeledBox& b : boxes) {
      if (b.class_id == class_id && InBucket(b.box.Area(), bucket)) ++ranked.num_gt;
    }
  }
  return ranked;
}

std::optional<double> MeanOf(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

}  // namespace

MatchResult MatchDetections(std::span<const Detection> detections,
                            const GroundTruthMap& gts, double iou_threshold,
                            double cs_threshold) {
  CheckThreshold(iou_threshold, "IoU threshold");
  CheckThreshold(cs_threshold, "confidence threshold");
  std::vector<size_t> selected;
  for (size_t i = 0; i < detections.size(); ++i) {
    CheckDetection(detections[i]);
    if (detections[i].confidence >= cs_threshold) selected.push_back(i);
  }
  MatchResult result = MatchSubset(detections, selected, gts, iou_threshold);
  result.confidence_threshold = cs_threshold;
  return result;
}

double F1Score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0 ? 2.0 * precision * recall / sum : 0.0;
}

ClassMetrics MetricsFromCounts(ClassId id, const MatchCounts& c) {
  ClassMetrics m;
  m.class_id = id;
  m.tp = c.tp;
  m.fp = c.fp;
  m.fn = c.fn;
  m.fp_outside = c.fp_outside;
  m.support = c.support;
  m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  m.f1 = F1Score(m.precision, m.recall);
  return m;
}

std::vector<ClassMetrics> ComputeClassMetrics(const MatchResult& match) {
  std::vector<ClassMetrics> out;
  for (ClassId id : kAllClasses) {
    out.push_back(MetricsFromCounts(id, match.per_class[Index(id)]));
  }
  return out;
}

MeanAverage ComputeMeanAverage(std::span<const ClassMetrics> metrics) {
  MeanAverage mean;
  for (const ClassMetrics& m : metrics) {
    if (m.support <= 0) continue;
    mean.precision += m.precision;
    mean.recall += m.recall;
    mean.f1 += m.f1;
    mean.support += static_cast<double>(m.support);
    ++mean.classes;
  }
  if (mean.classes == 0) {
    throw EmptyResultError("mean average is undefined: no class has support");
  }
  mean.precision /= mean.classes;
  mean.recall /= mean.classes;
  mean.f1 /= mean.classes;
  mean.support /= mean.classes;
  return mean;
}

EvalReport Evaluate(std::span<const Detection> detections,
                    const GroundTruthMap& gts, double iou_threshold,
                    double cs_threshold) {
  const MatchResult match =
      MatchDetections(detections, gts, iou_threshold, cs_threshold);
  EvalReport report;
  report.iou_threshold = iou_threshold;
  report.confidence_threshold = cs_threshold;
  report.per_class = ComputeClassMetrics(match);
  for (const ClassMetrics& m : report.per_class) {
    report.total_fp += m.fp;
    report.total_fp_outside += m.fp_outside;
  }
  report.detections_scored = static_cast<int64_t>(match.outcomes.size());
  const bool any_support =
      std::any_of(report.per_class.begin(), report.per_class.end(),
                  [](const ClassMetrics& m) { return m.support > 0; });
  if (any_support) report.mean = ComputeMeanAverage(report.per_class);
  return report;
}

std::vector<EvalReport> Sweep(std::span<const Detection> detections,
                              const GroundTruthMap& gts, double iou_threshold,
                              std::span<const double> cs_list) {
  if (!std::is_sorted(cs_list.begin(), cs_list.end())) {
    throw InvalidArgument("confidence thresholds must be ascending");
  }
  std::vector<EvalReport> reports;
  for (double cs : cs_list) {
    reports.push_back(Evaluate(detections, gts, iou_threshold, cs));
  }
  return reports;
}

RankedDetections RankClass(std::span<const Detection> detections,
                           const GroundTruthMap& gts, ClassId class_id,
                           double iou_threshold) {
  const MatchResult match = MatchDetections(detections, gts, iou_threshold, 0.0);
  return RankFromMatch(detections, match, gts, class_id, SizeBucket::kAll);
}

std::optional<double> InterpolatedAp101(const RankedDetections& ranked) {
  if (ranked.num_gt <= 0) return std::nullopt;
  const size_t n = ranked.true_positive.size();
  std::vector<int64_t> tp_at(n);
  std::vector<double> precision(n);
  int64_t tp = 0;
  for (size_t i = 0; i < n; ++i) {
    if (ranked.true_positive[i]) ++tp;
    tp_at[i] = tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Suffix maximum turns precision into its interpolated envelope.
  for (size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0;
  size_t rank = 0;
  for (int r = 0; r <= 100; ++r) {
    // First rank whose recall >= r / 100, compared in integers.
    while (rank < n && 100 * tp_at[rank] < r * ranked.num_gt) ++rank;
    if (rank == n) break;
    sum += precision[rank];
  }
  return sum / 101.0;
}

std::optional<double> AveragePrecision(std::span<const Detection> detections,
                                       const GroundTruthMap& gts,
                                       ClassId class_id, double iou_threshold) {
  return InterpolatedAp101(RankClass(detections, gts, class_id, iou_threshold));
}

bool InBucket(double area, SizeBucket bucket) {
  switch (bucket) {
    case SizeBucket::kAll:
      return true;
    case SizeBucket::kSmall:
      return area < kSmallAreaMax;
    case SizeBucket::kMedium:
      return area >= kSmallAreaMax && area <= kMediumAreaMax;
    case SizeBucket::kLarge:
      return area > kMediumAreaMax;
  }
  return true;
}

std::array<double, 10> CocoIouThresholds() {
  std::array<double, 10> t{};
  for (int i = 0; i < 10; ++i) t[i] = (50 + 5 * i) / 100.0;
  return t;
}

std::optional<double> MeanAveragePrecision(std::span<const Detection> detections,
                                           const GroundTruthMap& gts,
                                           double iou_threshold,
                                           SizeBucket bucket) {
  const MatchResult match = MatchDetections(detections, gts, iou_threshold, 0.0);
  std::vector<double> aps;
  for (ClassId id : kAllClasses) {
    const std::optional<double> ap =
        InterpolatedAp101(RankFromMatch(detections, match, gts, id, bucket));
    if (ap) aps.push_back(*ap);
  }
  return MeanOf(aps);
}

CocoMapSuite ComputeCocoMapSuite(std::span<const Detection> detections,
                                 const GroundTruthMap& gts) {
  auto averaged = [&](SizeBucket bucket) -> std::optional<double> {
    std::vector<double> per_threshold;
    for (double t : CocoIouThresholds()) {
      if (auto m = MeanAveragePrecision(detections, gts, t, bucket)) {
        per_threshold.push_back(*m);
      }
    }
    return MeanOf(per_threshold);
  };
  CocoMapSuite suite;
  suite.map = averaged(SizeBucket::kAll);
  suite.map50 = MeanAveragePrecision(detections, gts, 0.50);
  suite.map75 = MeanAveragePrecision(detections, gts, 0.75);
  suite.map_small = averaged(SizeBucket::kSmall);
  suite.map_medium = averaged(SizeBucket::kMedium);
  suite.map_large = averaged(SizeBucket::kLarge);
  return suite;
}

std::optional<double> AverageRecallAt(std::span<const Detection> detections,
                                      const GroundTruthMap& gts, int k,
                                      SizeBucket bucket) {
  if (k <= 0) throw InvalidArgument("AR@k needs k > 0");
  for (const Detection& d : detections) CheckDetection(d);

  // Top-k per (image, class).
  std::map<std::pair<std::string, int>, std::vector<size_t>> groups;
  for (size_t i = 0; i < detections.size(); ++i) {
    groups[{detections[i].image_id, Index(detections[i].class_id)}].push_back(i);
  }
  std::vector<size_t> selected;
  for (auto& [key, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return detections[a].confidence > detections[b].confidence;
    });
    if (idx.size() > static_cast<size_t>(k)) idx.resize(k);
    selected.insert(selected.end(), idx.begin(), idx.end());
  }
  std::sort(selected.begin(), selected.end());

  std::array<int64_t, kNumClasses> num_gt{};
  for (const auto& [image, boxes] : gts) {
    for (const LabeledBox& b : boxes) {
      if (InBucket(b.box.Area(), bucket)) ++num_gt[Index(b.class_id)];
    }
  }
  std::vector<double> recalls;
  for (double t : CocoIouThresholds()) {
    const MatchResult match = MatchSubset(detections, selected, gts, t);
    std::array<int64_t, kNumClasses> hits{};
    for (const DetectionOutcome& o : match.outcomes) {
      if (!o.true_positive) continue;
      const Detection& d = detections[o.detection_index];
      const LabeledBox& gt = gts.at(d.image_id)[*o.gt_index];
      if (InBucket(gt.box.Area(), bucket)) ++hits[Index(gt.class_id)];
    }
    for (int c = 0; c < kNumClasses; ++c) {
      if (num_gt[c] > 0) {
        recalls.push_back(static_cast<double>(hits[c]) / static_cast<double>(num_gt[c]));
      }
    }
  }
  return MeanOf(recalls);
}

PrCurve ComputePrCurve(std::span<const Detection> detections,
                       const GroundTruthMap& gts, ClassId class_id,
                       double iou_threshold) {
  const RankedDetections ranked = RankClass(detections, gts, class_id, iou_threshold);
  if (ranked.num_gt == 0) {
    throw EmptyResultError("class " + std::string(ClassName(class_id)) +
                           " has no ground truth; PR curve undefined");
  }
  PrCurve curve;
  curve.class_id = class_id;
  const size_t n = ranked.true_positive.size();
  int64_t tp = 0;
  for (size_t i = 0; i < n; ++i) {
    if (ranked.true_positive[i]) ++tp;
    // Emit once per distinct confidence, after its last detection.
    if (i + 1 < n && ranked.confidence[i + 1] == ranked.confidence[i]) continue;
    curve.points.push_back({static_cast<double>(tp) / static_cast<double>(ranked.num_gt),
                            static_cast<double>(tp) / static_cast<double>(i + 1),
                            ranked.confidence[i]});
  }
  if (curve.points.empty()) return curve;

  std::vector<double> envelope(curve.points.size());
  double running = 0;
  for (size_t i = curve.points.size(); i-- > 0;) {
    running = std::max(running, curve.points[i].precision);
    envelope[i] = running;
  }
  double prev_r = 0;
  double prev_p = envelope.front();
  for (size_t i = 0; i < curve.points.size(); ++i) {
    const double r = curve.points[i].recall;
    curve.auc += (r - prev_r) * 0.5 * (envelope[i] + prev_p);
    prev_r = r;
    prev_p = envelope[i];
  }
  return curve;
}

}  // namespace detbench
