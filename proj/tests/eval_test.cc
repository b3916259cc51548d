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
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.h"

namespace detbench {
namespace {

Detection Det(const std::string& img, ClassId c, double conf, Box b) {
  return {b, c, conf, img};
}

TEST(MatchTest, BasicCases) {
  GroundTruthMap gts = {{"a", {{{0, 0, 10, 10}, ClassId::kCategoryII}}}};
  // IoU 0.6.
  std::vector<Detection> d = {Det("a", ClassId::kCategoryII, 0.8, {0, 0, 10, 6})};
  MatchResult m = MatchDetections(d, gts, 0.5);
  EXPECT_TRUE(m.outcomes[0].true_positive);
  EXPECT_EQ(m.per_class[Index(ClassId::kCategoryII)].tp, 1);

  d = {Det("a", ClassId::kDti, 0.8, {0, 0, 10, 9})};
  m = MatchDetections(d, gts, 0.5);
  EXPECT_EQ(m.per_class[Index(ClassId::kDti)].fp, 1);
  EXPECT_EQ(m.per_class[Index(ClassId::kDti)].fp_outside, 1);
  EXPECT_EQ(m.per_class[Index(ClassId::kCategoryII)].fn, 1);

  d = {Det("a", ClassId::kCategoryII, 0.7, {0, 0, 10, 9}),
       Det("a", ClassId::kCategoryII, 0.9, {0, 0, 10, 8})};
  m = MatchDetections(d, gts, 0.5);
  EXPECT_FALSE(m.outcomes[0].true_positive);
  EXPECT_FALSE(m.outcomes[0].outside_iou);  // overlaps, but the gt was taken
  EXPECT_TRUE(m.outcomes[1].true_positive);

  d = {Det("zzz", ClassId::kCategoryII, 0.7, {0, 0, 10, 9})};
  EXPECT_THROW(MatchDetections(d, gts, 0.5), Error);
}

TEST(MatchTest, ConfidenceFilterBoundaries) {
  GroundTruthMap gts = {{"a", {{{0, 0, 10, 10}, ClassId::kCategoryI}}}};
  std::vector<Detection> d = {Det("a", ClassId::kCategoryI, 0.95, {0, 0, 10, 10})};
  const EvalReport none = Evaluate(d, gts, 0.5, 1.0);
  EXPECT_EQ(none.detections_scored, 0);
  EXPECT_EQ(none.per_class[0].fn, 1);
  const MatchResult all = MatchDetections(d, gts, 0.5, 0.0);
  const MatchResult unfiltered = MatchDetections(d, gts, 0.5);
  EXPECT_EQ(all.per_class[0].tp, unfiltered.per_class[0].tp);
}

// Independent greedy matcher: per image and class, visit detections by
// confidence then index and take the best free gt.
std::array<MatchCounts, kNumClasses> ReferenceCounts(const std::vector<Detection>& dets,
                                                     const GroundTruthMap& gts, double thr,
                                                     double cs) {
  std::array<MatchCounts, kNumClasses> out{};
  for (const auto& [img, boxes] : gts) {
    for (const auto& b : boxes) ++out[Index(b.class_id)].support;
    std::vector<bool> taken(boxes.size(), false);
    std::vector<size_t> order;
    for (size_t i = 0; i < dets.size(); ++i) {
      if (dets[i].image_id == img && dets[i].confidence >= cs) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return dets[a].confidence > dets[b].confidence;
    });
    for (size_t i : order) {
      double best = -1;
      size_t arg = 0;
      double any = 0;
      for (size_t g = 0; g < boxes.size(); ++g) {
        if (boxes[g].class_id != dets[i].class_id) continue;
        const double v = oracle::PlainIou(dets[i].box, boxes[g].box);
        any = std::max(any, v);
        if (!taken[g] && v >= thr && v > best) best = v, arg = g;
      }
      MatchCounts& c = out[Index(dets[i].class_id)];
      if (best >= 0) {
        taken[arg] = true;
        ++c.tp;
      } else {
        ++c.fp;
        if (any < thr) ++c.fp_outside;
      }
    }
  }
  for (auto& c : out) c.fn = c.support - c.tp;
  return out;
}

struct Instance {
  GroundTruthMap gts;
  std::vector<Detection> dets;
};

Instance RandomInstance(std::mt19937_64& rng, int images, int max_gt, int max_det,
                        int classes = 3) {
  Instance inst;
  std::uniform_int_distribution<int> ng(0, max_gt), nd(0, max_det), conf(1, 20);
  std::uniform_int_distribution<int> jitter(-6, 6);
  for (int i = 0; i < images; ++i) {
    const std::string img = "im" + std::to_string(i);
    auto& boxes = inst.gts[img];
    const int g = ng(rng);
    for (int k = 0; k < g; ++k) {
      boxes.push_back({oracle::RandomIntBox(rng, 60), oracle::RandomClass(rng, classes)});
    }
    const int n = nd(rng);
    for (int k = 0; k < n; ++k) {
      Box b = oracle::RandomIntBox(rng, 60);
      ClassId c = oracle::RandomClass(rng, classes);
      if (!boxes.empty() && k % 3 != 0) {
        const auto& src = boxes[k % boxes.size()];
        b = src.box;
        b.xmin += jitter(rng), b.xmax += jitter(rng);
        if (b.xmax <= b.xmin) b.xmax = b.xmin + 1;
        c = src.class_id;
      }
      inst.dets.push_back(Det(img, c, conf(rng) / 20.0, b));
    }
  }
  return inst;
}

TEST(MatchTest, AgreesWithReferenceAndConserves) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const Instance inst = RandomInstance(rng, 4, 5, 8);
    const double thr = 0.3 + 0.1 * (trial % 6);
    const double cs = 0.25 * (trial % 4);
    const MatchResult m = MatchDetections(inst.dets, inst.gts, thr, cs);
    const auto ref = ReferenceCounts(inst.dets, inst.gts, thr, cs);
    for (int c = 0; c < kNumClasses; ++c) {
      const MatchCounts& got = m.per_class[c];
      EXPECT_EQ(got.tp, ref[c].tp);
      EXPECT_EQ(got.fp, ref[c].fp);
      EXPECT_EQ(got.fn, ref[c].fn);
      EXPECT_EQ(got.fp_outside, ref[c].fp_outside);
      EXPECT_EQ(got.tp + got.fn, got.support);
    }
    int64_t surviving = 0;
    for (const auto& d : inst.dets) surviving += d.confidence >= cs;
    int64_t scored = 0;
    for (const auto& c : m.per_class) scored += c.tp + c.fp;
    EXPECT_EQ(scored, surviving);
  }
}

TEST(MetricsTest, F1AndDegenerateConvention) {
  EXPECT_NEAR(F1Score(0.3750, 0.6000), 0.4615, 1e-4);
  EXPECT_NEAR(F1Score(0.2222, 0.4444), 0.2962, 1e-4);
  EXPECT_EQ(F1Score(0, 0), 0.0);
  const ClassMetrics m = MetricsFromCounts(ClassId::kCategoryI, {0, 0, 5, 0, 5});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.support, 5);
}

ClassMetrics Row(ClassId id, double p, double r, double f1, int64_t support) {
  ClassMetrics m;
  m.class_id = id;
  m.precision = p;
  m.recall = r;
  m.f1 = f1;
  m.support = support;
  return m;
}

TEST(MeanAverageTest, SkipsZeroSupport) {
  const std::vector<ClassMetrics> rows = {
      Row(ClassId::kCategoryI, 0.3750, 0.6000, 0.4615, 5),
      Row(ClassId::kCategoryII, 0.6595, 0.6666, 0.6630, 93),
      Row(ClassId::kCategoryIII, 0.5714, 0.7272, 0.6399, 11),
      Row(ClassId::kCategoryIV, 0, 0, 0, 0),
      Row(ClassId::kUnstageable, 0.8378, 0.8051, 0.8211, 70),
      Row(ClassId::kDti, 0.9545, 0.7000, 0.8076, 30)};
  const MeanAverage m = ComputeMeanAverage(rows);
  EXPECT_EQ(m.classes, 5);
  EXPECT_NEAR(m.precision, 0.6796, 1e-4);
  EXPECT_NEAR(m.recall, 0.6997, 1e-4);
  EXPECT_NEAR(m.f1, 0.6786, 1e-4);

  const std::vector<ClassMetrics> one = {Row(ClassId::kDti, 0.4, 0.5, 0.44, 3),
                                         Row(ClassId::kCategoryI, 0.9, 0.9, 0.9, 0)};
  EXPECT_DOUBLE_EQ(ComputeMeanAverage(one).precision, 0.4);
  const std::vector<ClassMetrics> none = {Row(ClassId::kDti, 0.4, 0.5, 0.44, 0)};
  EXPECT_THROW(ComputeMeanAverage(none), Error);
}

TEST(SweepTest, FalsePositivesAndRecallNonIncreasing) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance inst = RandomInstance(rng, 6, 4, 10);
    const auto reports = Sweep(inst.dets, inst.gts);
    ASSERT_EQ(reports.size(), 4u);
    for (size_t i = 1; i < reports.size(); ++i) {
      EXPECT_LE(reports[i].total_fp, reports[i - 1].total_fp);
      for (size_t c = 0; c < reports[i].per_class.size(); ++c) {
        EXPECT_LE(reports[i].per_class[c].recall, reports[i - 1].per_class[c].recall);
      }
    }
  }
  const std::vector<double> bad = {0.5, 0.3};
  EXPECT_THROW(Sweep({}, {}, 0.5, bad), Error);
}

TEST(SweepTest, TruePositivesNonIncreasingInIou) {
  std::mt19937_64 rng(43);
  int violations = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Instance inst = RandomInstance(rng, 3, 4, 8);
    int64_t prev = -1;
    for (double t = 0.1; t < 0.96; t += 0.05) {
      const MatchResult m = MatchDetections(inst.dets, inst.gts, t);
      int64_t tp = 0;
      for (const auto& c : m.per_class) tp += c.tp;
      if (prev >= 0 && tp > prev) ++violations;
      prev = tp;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(SweepTest, ReportsOneEntryPerClassWithMean) {
  GroundTruthMap gts = {{"a", {{{0, 0, 10, 10}, ClassId::kDti}}}};
  const EvalReport r = Evaluate({}, gts, 0.5, 0.3);
  ASSERT_EQ(r.per_class.size(), 6u);
  for (size_t i = 0; i < kAllClasses.size(); ++i) {
    EXPECT_EQ(r.per_class[i].class_id, kAllClasses[i]);
  }
  ASSERT_TRUE(r.mean.has_value());
  EXPECT_EQ(r.mean->recall, 0.0);
  EXPECT_EQ(r.total_fp, 0);
}

TEST(AveragePrecisionTest, WorkedCases) {
  RankedDetections ranked;
  ranked.true_positive = {true, false, true};
  ranked.confidence = {0.9, 0.8, 0.7};
  ranked.num_gt = 2;
  EXPECT_NEAR(*InterpolatedAp101(ranked), (51 + 50 * 2.0 / 3.0) / 101, 1e-12);
  EXPECT_NEAR(*InterpolatedAp101(ranked), 0.8350, 1e-4);

  ranked.true_positive = {true, true};
  ranked.confidence = {0.9, 0.8};
  EXPECT_DOUBLE_EQ(*InterpolatedAp101(ranked), 1.0);
  ranked.true_positive = {false, false};
  EXPECT_DOUBLE_EQ(*InterpolatedAp101(ranked), 0.0);
  ranked.num_gt = 0;
  EXPECT_FALSE(InterpolatedAp101(ranked).has_value());
}

TEST(AveragePrecisionTest, EndToEndWorkedCaseAndCurve) {
  GroundTruthMap gts = {{"a", {{{0, 0, 10, 10}, ClassId::kCategoryI},
                               {{20, 20, 30, 30}, ClassId::kCategoryI}}}};
  const std::vector<Detection> d = {Det("a", ClassId::kCategoryI, 0.9, {0, 0, 10, 10}),
                                    Det("a", ClassId::kCategoryI, 0.8, {50, 50, 60, 60}),
                                    Det("a", ClassId::kCategoryI, 0.7, {20, 20, 30, 30})};
  EXPECT_NEAR(*AveragePrecision(d, gts, ClassId::kCategoryI, 0.5), 0.8350, 1e-4);
  const PrCurve curve = ComputePrCurve(d, gts, ClassId::kCategoryI);
  EXPECT_NEAR(curve.auc, 0.8350, 0.02);
  EXPECT_FALSE(AveragePrecision(d, gts, ClassId::kDti, 0.5).has_value());
}

TEST(AveragePrecisionTest, WithinBoundOfExhaustiveOracle) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> nd(0, 20), ng(1, 10), coin(0, 1);
  double worst = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    RankedDetections r;
    const int n = nd(rng);
    r.num_gt = ng(rng);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const bool tp = coin(rng) && hits < r.num_gt;
      hits += tp;
      r.true_positive.push_back(tp);
      r.confidence.push_back(1.0 - i * 0.01);
    }
    const double got = *InterpolatedAp101(r);
    const double want = oracle::ExhaustiveCutoffAp(r.true_positive, static_cast<int>(r.num_gt));
    worst = std::max(worst, std::abs(got - want));
  }
  EXPECT_LE(worst, 0.01);
}

TEST(CocoTest, PerfectDetectionsScoreOne) {
  GroundTruthMap gts = {{"a", {{{0, 0, 20, 20}, ClassId::kCategoryI},
                               {{100, 100, 200, 200}, ClassId::kDti}}},
                        {"b", {{{0, 0, 50, 60}, ClassId::kCategoryII}}}};
  std::vector<Detection> d;
  for (const auto& [img, boxes] : gts) {
    for (const auto& b : boxes) d.push_back(Det(img, b.class_id, 0.9, b.box));
  }
  const CocoMapSuite s = ComputeCocoMapSuite(d, gts);
  EXPECT_DOUBLE_EQ(*s.map, 1.0);
  EXPECT_DOUBLE_EQ(*s.map50, 1.0);
  EXPECT_DOUBLE_EQ(*s.map75, 1.0);
  EXPECT_DOUBLE_EQ(*s.map_small, 1.0);
  EXPECT_DOUBLE_EQ(*s.map_medium, 1.0);
  EXPECT_DOUBLE_EQ(*s.map_large, 1.0);
  for (int k : {1, 10, 100}) EXPECT_DOUBLE_EQ(*AverageRecallAt(d, gts, k), 1.0);
  EXPECT_DOUBLE_EQ(*AverageRecallAt({}, gts, 10), 0.0);
}

TEST(CocoTest, OnlyLargeGroundTruth) {
  GroundTruthMap gts = {{"a", {{{0, 0, 200, 200}, ClassId::kCategoryI}}}};
  std::vector<Detection> d = {Det("a", ClassId::kCategoryI, 0.9, {0, 0, 200, 170}),
                              Det("a", ClassId::kCategoryI, 0.5, {300, 300, 310, 310})};
  const CocoMapSuite s = ComputeCocoMapSuite(d, gts);
  EXPECT_FALSE(s.map_small.has_value());
  EXPECT_FALSE(s.map_medium.has_value());
  ASSERT_TRUE(s.map_large.has_value());
  EXPECT_NEAR(*s.map_large, *s.map, 1e-12);
}

TEST(CocoTest, ThresholdAndTopKOrderings) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance inst = RandomInstance(rng, 4, 4, 12);
    const CocoMapSuite s = ComputeCocoMapSuite(inst.dets, inst.gts);
    if (s.map50) {
      EXPECT_GE(*s.map50 + 1e-12, *s.map75);
      EXPECT_GE(*s.map50 + 1e-12, *s.map);
    }
    const auto ar1 = AverageRecallAt(inst.dets, inst.gts, 1);
    const auto ar10 = AverageRecallAt(inst.dets, inst.gts, 10);
    const auto ar100 = AverageRecallAt(inst.dets, inst.gts, 100);
    if (ar1) {
      EXPECT_LE(*ar1, *ar10 + 1e-12);
      EXPECT_LE(*ar10, *ar100 + 1e-12);
    }
  }
}

TEST(CocoTest, MetricsIgnoreImageAndDetectionOrder) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    Instance inst = RandomInstance(rng, 4, 3, 6);
    // Distinct confidences so reordering cannot change the visit order.
    for (size_t i = 0; i < inst.dets.size(); ++i) inst.dets[i].confidence = 0.01 + 0.001 * i;
    const CocoMapSuite a = ComputeCocoMapSuite(inst.dets, inst.gts);
    const auto sweep_a = Sweep(inst.dets, inst.gts);
    std::shuffle(inst.dets.begin(), inst.dets.end(), rng);
    const CocoMapSuite b = ComputeCocoMapSuite(inst.dets, inst.gts);
    const auto sweep_b = Sweep(inst.dets, inst.gts);
    EXPECT_EQ(a.map, b.map);
    EXPECT_EQ(a.map50, b.map50);
    for (size_t i = 0; i < sweep_a.size(); ++i) {
      EXPECT_EQ(sweep_a[i].total_fp, sweep_b[i].total_fp);
      for (size_t c = 0; c < sweep_a[i].per_class.size(); ++c) {
        EXPECT_EQ(sweep_a[i].per_class[c].f1, sweep_b[i].per_class[c].f1);
      }
    }
  }
}

TEST(PrCurveTest, PerfectAllFpAndZeroSupport) {
  GroundTruthMap gts = {{"a", {{{0, 0, 10, 10}, ClassId::kCategoryI},
                               {{20, 20, 30, 30}, ClassId::kCategoryI}}}};
  std::vector<Detection> perfect = {Det("a", ClassId::kCategoryI, 0.9, {0, 0, 10, 10}),
                                    Det("a", ClassId::kCategoryI, 0.8, {20, 20, 30, 30})};
  const PrCurve p = ComputePrCurve(perfect, gts, ClassId::kCategoryI);
  EXPECT_DOUBLE_EQ(p.auc, 1.0);
  for (const auto& pt : p.points) EXPECT_DOUBLE_EQ(pt.precision, 1.0);

  std::vector<Detection> wrong = {Det("a", ClassId::kCategoryI, 0.9, {50, 50, 60, 60})};
  EXPECT_DOUBLE_EQ(ComputePrCurve(wrong, gts, ClassId::kCategoryI).auc, 0.0);
  EXPECT_THROW(ComputePrCurve(perfect, gts, ClassId::kDti), Error);
}

TEST(PrCurveTest, RecallNonDecreasingAndAucInUnitRange) {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance inst = RandomInstance(rng, 3, 4, 10, 1);
    bool has_gt = false;
    for (const auto& [img, b] : inst.gts) has_gt |= !b.empty();
    if (!has_gt) continue;
    const PrCurve c = ComputePrCurve(inst.dets, inst.gts, ClassId::kCategoryI);
    for (size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].recall, c.points[i - 1].recall);
    }
    EXPECT_GE(c.auc, 0.0);
    EXPECT_LE(c.auc, 1.0 + 1e-12);
  }
}

}  // namespace
}  // namespace detbench
