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

#include "detbench/report.h"

#include <random>

#include <gtest/gtest.h>

#include "detbench/text.h"
#include "json.hpp"

namespace detbench {
namespace {

TEST(TextTest, TruncatedFormatting) {
  EXPECT_EQ(FormatTruncated4(0.67969), "0.6796");
  EXPECT_EQ(FormatTruncated4(0.3770), "0.3770");
  EXPECT_EQ(FormatTruncated4(1.0), "1.0000");
  EXPECT_EQ(FormatTruncated4(0.0), "0.0000");
  EXPECT_EQ(FormatTruncated4(2.0 / 3.0), "0.6666");
  EXPECT_EQ(FormatShortest(0.1), "0.1");
  EXPECT_EQ(std::stod(FormatShortest(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(TextTest, CsvSplitting) {
  EXPECT_EQ(SplitCsvRow("a,\"b,c\",d"), (std::vector<std::string>{"a", "b,c", "d"}));
  EXPECT_EQ(SplitCsvRow("\"x\"\"y\""), (std::vector<std::string>{"x\"y"}));
  EXPECT_THROW(ParseDouble("1.5x", "v"), Error);
  EXPECT_THROW(ParseInt("", "v"), Error);
}

TEST(DetectionsCsvTest, RoundTripAndHeaderOptional) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 500);
  std::vector<Detection> dets;
  for (int i = 0; i < 50; ++i) {
    const double x = u(rng), y = u(rng);
    dets.push_back({{x, y, x + 1 + u(rng), y + 1 + u(rng)},
                    kAllClasses[i % kNumClasses],
                    std::uniform_real_distribution<double>(0, 1)(rng),
                    "img," + std::to_string(i % 7)});
  }
  const std::string csv = ToDetectionsCsv(dets);
  EXPECT_EQ(ParseDetectionsCsv(csv), dets);
  const std::string body = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(ParseDetectionsCsv(body), dets);
}

TEST(DetectionsCsvTest, ClassMismatchGivesMappingHint) {
  try {
    ParseDetectionsCsv("a.jpg,Stage 2,0.9,1,1,5,5\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("CategoryII"), std::string::npos);
  }
  EXPECT_THROW(ParseDetectionsCsv("a.jpg,DTI,1.3,1,1,5,5\n"), Error);
  EXPECT_THROW(ParseDetectionsCsv("a.jpg,DTI,0.3,5,1,1,5\n"), Error);
  EXPECT_THROW(ParseDetectionsCsv("a.jpg,DTI,0.3\n"), Error);
}

EvalReport CroppedCs75Report() {
  // Per-class counts whose ratios reproduce the cropped CS@.75 table.
  struct Counts {
    ClassId id;
    int64_t tp, fp, fn;
  };
  const Counts counts[] = {{ClassId::kCategoryI, 3, 5, 2},
                           {ClassId::kCategoryII, 62, 32, 31},
                           {ClassId::kCategoryIII, 8, 6, 3},
                           {ClassId::kCategoryIV, 0, 0, 0},
                           {ClassId::kUnstageable, 165, 32, 40},
                           {ClassId::kDti, 21, 1, 9}};
  EvalReport r;
  r.iou_threshold = 0.5;
  r.confidence_threshold = 0.75;
  for (const Counts& c : counts) {
    MatchCounts mc{c.tp, c.fp, c.fn, 0, c.tp + c.fn};
    r.per_class.push_back(MetricsFromCounts(c.id, mc));
    r.total_fp += c.fp;
  }
  r.mean = ComputeMeanAverage(r.per_class);
  return r;
}

TEST(ReportTableTest, LayoutAndMeanRow) {
  const std::string table = FormatReportTable(CroppedCs75Report());
  EXPECT_EQ(table.substr(0, table.find('\n')), "IoU@.50 CS@.75");
  EXPECT_NE(table.find("Mean Average"), std::string::npos);
  EXPECT_NE(table.find("0.6796     0.6997     0.6786"), std::string::npos) << table;
  EXPECT_NE(table.find("CategoryI          0.3750     0.6000     0.4615          5"),
            std::string::npos)
      << table;
  EXPECT_NE(table.find("False positives: 76 (outside IoU@.50: 0)"), std::string::npos);
  // Unstageable precedes DTI.
  EXPECT_LT(table.find("Unstageable"), table.find("DTI"));
}

TEST(ReportTableTest, RenderersAreDeterministic) {
  const std::vector<EvalReport> reports = {CroppedCs75Report(), CroppedCs75Report()};
  for (ReportFormat f : {ReportFormat::kTable, ReportFormat::kCsv, ReportFormat::kStructured}) {
    EXPECT_EQ(RenderReports(reports, f), RenderReports(reports, f));
  }
  const auto doc = nlohmann::json::parse(FormatReportsStructured(reports));
  ASSERT_EQ(doc.size(), 2u);
  EXPECT_EQ(doc[0]["classes"].size(), 6u);
  EXPECT_NEAR(doc[0]["mean_average"]["precision"].get<double>(), 0.6796, 1e-4);
  const std::string csv = FormatReportsCsv(reports);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "iou,cs,class,precision,recall,f1,support,tp,fp,fn,fp_outside");
  for (std::string_view line : SplitLines(csv)) {
    if (!line.empty()) EXPECT_EQ(SplitCsvRow(line).size(), 11u) << line;
  }
  EXPECT_EQ(ParseReportFormat("json"), ReportFormat::kStructured);
  EXPECT_THROW(ParseReportFormat("xml"), Error);
}

TEST(PrCurveRenderTest, SvgLegendAndPoints) {
  PrCurve c;
  c.class_id = ClassId::kCategoryII;
  c.points = {{0.5, 1.0, 0.9}, {0.5, 0.5, 0.8}, {1.0, 2.0 / 3.0, 0.7}};
  c.auc = 0.83333333;
  const std::string svg = RenderPrCurveSvg(c);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("CategoryII (AUC 0.8333)"), std::string::npos);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_EQ(FormatPrCurveCsv(c),
            "confidence,recall,precision\n0.9,0.5,1\n0.8,0.5,0.5\n0.7,1,0.6666666666666666\n");
}

}  // namespace
}  // namespace detbench
