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

#include <cstdio>

#include "detbench/text.h"
#include "json.hpp"

namespace detbench {
namespace {

using Json = nlohmann::ordered_json;

// 0.5 -> ".50", 1 -> "1.00".
std::string ThresholdLabel(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  std::string s = buf;
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return s;
}

std::string Pad(std::string_view s, size_t width, bool right_align) {
  std::string out(s);
  if (out.size() >= width) return out;
  const std::string fill(width - out.size(), ' ');
  return right_align ? fill + out : out + fill;
}

const ClassMetrics& FindClass(const EvalReport& report, ClassId id) {
  for (const ClassMetrics& m : report.per_class) {
    if (m.class_id == id) return m;
  }
  throw InvalidArgument("report is missing class " + std::string(ClassName(id)));
}

std::string FormatSupportMean(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string Coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::vector<Detection> ParseDetectionsCsv(std::string_view text) {
  std::vector<Detection> out;
  int line_no = 0;
  for (std::string_view line : SplitLines(text)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    if (out.empty() && Trim(line) == kDetectionsHeader) continue;
    const std::string where = "detections line " + std::to_string(line_no);
    const std::vector<std::string> f = SplitCsvRow(line);
    if (f.size() != 7) throw ParseError(where + ": expected 7 fields");
    Detection d;
    d.image_id = std::string(Trim(f[0]));
    if (d.image_id.empty()) throw ParseError(where + ": empty image_id");
    auto id = TryParseClassName(f[1]);
    if (!id) {
      throw ParseError(where + ": class '" + f[1] +
                       "' does not match the ground-truth classes (CategoryI, "
                       "CategoryII, CategoryIII, CategoryIV, DTI, Unstageable); "
                       "rename it to one of these");
    }
    d.class_id = *id;
    d.confidence = ParseDouble(f[2], "confidence");
    if (!(d.confidence >= 0 && d.confidence <= 1)) {
      throw ParseError(where + ": confidence outside [0, 1]");
    }
    d.box = {ParseDouble(f[3], "xmin"), ParseDouble(f[4], "ymin"),
             ParseDouble(f[5], "xmax"), ParseDouble(f[6], "ymax")};
    if (!d.box.IsValid()) throw ParseError(where + ": box has non-positive extent");
    out.push_back(std::move(d));
  }
  return out;
}

std::string ToDetectionsCsv(std::span<const Detection> detections) {
  std::string out(kDetectionsHeader);
  out += '\n';
  for (const Detection& d : detections) {
    out += CsvField(d.image_id) + ',' + std::string(ClassName(d.class_id)) + ',' +
           FormatShortest(d.confidence) + ',' + FormatShortest(d.box.xmin) + ',' +
           FormatShortest(d.box.ymin) + ',' + FormatShortest(d.box.xmax) + ',' +
           FormatShortest(d.box.ymax) + '\n';
  }
  return out;
}

ReportFormat ParseReportFormat(std::string_view name) {
  if (name == "table") return ReportFormat::kTable;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "structured" || name == "json") return ReportFormat::kStructured;
  throw InvalidArgument("unknown report format '" + std::string(name) +
                        "'; expected table, csv or structured");
}

std::string FormatReportTable(const EvalReport& report) {
  constexpr size_t kName = 14;
  constexpr size_t kCol = 11;
  std::string out = "IoU@" + ThresholdLabel(report.iou_threshold) + " CS@" +
                    ThresholdLabel(report.confidence_threshold) + "\n";
  out += Pad("Class", kName, false) + Pad("Precision", kCol, true) +
         Pad("Recall", kCol, true) + Pad("F1-Score", kCol, true) +
         Pad("Support", kCol, true) + "\n";
  for (ClassId id : kTableOrder) {
    const ClassMetrics& m = FindClass(report, id);
    out += Pad(ClassName(id), kName, false) +
           Pad(FormatTruncated4(m.precision), kCol, true) +
           Pad(FormatTruncated4(m.recall), kCol, true) +
           Pad(FormatTruncated4(m.f1), kCol, true) +
           Pad(std::to_string(m.support), kCol, true) + "\n";
  }
  if (report.mean) {
    out += Pad("Mean Average", kName, false) +
           Pad(FormatTruncated4(report.mean->precision), kCol, true) +
           Pad(FormatTruncated4(report.mean->recall), kCol, true) +
           Pad(FormatTruncated4(report.mean->f1), kCol, true) +
           Pad(FormatSupportMean(report.mean->support), kCol, true) + "\n";
  } else {
    out += Pad("Mean Average", kName, false) + Pad("-", kCol, true) +
           Pad("-", kCol, true) + Pad("-", kCol, true) + Pad("-", kCol, true) + "\n";
  }
  out += "False positives: " + std::to_string(report.total_fp) +
         " (outside IoU@" + ThresholdLabel(report.iou_threshold) +
         ": " + std::to_string(report.total_fp_outside) + ")\n";
  return out;
}

std::string FormatReportsCsv(std::span<const EvalReport> reports) {
  std::string out =
      "iou,cs,class,precision,recall,f1,support,tp,fp,fn,fp_outside\n";
  for (const EvalReport& r : reports) {
    const std::string prefix = ThresholdLabel(r.iou_threshold) + ',' +
                               ThresholdLabel(r.confidence_threshold) + ',';
    for (ClassId id : kTableOrder) {
      const ClassMetrics& m = FindClass(r, id);
      out += prefix + std::string(ClassName(id)) + ',' +
             FormatTruncated4(m.precision) + ',' + FormatTruncated4(m.recall) +
             ',' + FormatTruncated4(m.f1) + ',' + std::to_string(m.support) +
             ',' + std::to_string(m.tp) + ',' + std::to_string(m.fp) + ',' +
             std::to_string(m.fn) + ',' + std::to_string(m.fp_outside) + '\n';
    }
    if (r.mean) {
      out += prefix + "Mean Average," + FormatTruncated4(r.mean->precision) +
             ',' + FormatTruncated4(r.mean->recall) + ',' +
             FormatTruncated4(r.mean->f1) + ',' +
             FormatSupportMean(r.mean->support) + ",," +
             std::to_string(r.total_fp) + ",," +
             std::to_string(r.total_fp_outside) + '\n';
    }
  }
  return out;
}

std::string FormatReportsStructured(std::span<const EvalReport> reports) {
  Json doc = Json::array();
  for (const EvalReport& r : reports) {
    Json j;
    j["iou_threshold"] = r.iou_threshold;
    j["confidence_threshold"] = r.confidence_threshold;
    j["detections_scored"] = r.detections_scored;
    j["total_false_positives"] = r.total_fp;
    j["false_positives_outside_iou"] = r.total_fp_outside;
    j["classes"] = Json::array();
    for (ClassId id : kTableOrder) {
      const ClassMetrics& m = FindClass(r, id);
      Json c;
      c["class"] = std::string(ClassName(id));
      c["precision"] = m.precision;
      c["recall"] = m.recall;
      c["f1"] = m.f1;
      c["support"] = m.support;
      c["tp"] = m.tp;
      c["fp"] = m.fp;
      c["fn"] = m.fn;
      c["fp_outside"] = m.fp_outside;
      j["classes"].push_back(c);
    }
    if (r.mean) {
      j["mean_average"] = {{"precision", r.mean->precision},
                           {"recall", r.mean->recall},
                           {"f1", r.mean->f1},
                           {"support", r.mean->support},
                           {"classes", r.mean->classes}};
    } else {
      j["mean_average"] = nullptr;
    }
    doc.push_back(j);
  }
  return doc.dump(2) + "\n";
}

std::string RenderReports(std::span<const EvalReport> reports, ReportFormat format) {
  switch (format) {
    case ReportFormat::kTable: {
      std::string out;
      for (size_t i = 0; i < reports.size(); ++i) {
        if (i > 0) out += '\n';
        out += FormatReportTable(reports[i]);
      }
      return out;
    }
    case ReportFormat::kCsv:
      return FormatReportsCsv(reports);
    case ReportFormat::kStructured:
      return FormatReportsStructured(reports);
  }
  return {};
}

std::string FormatPrCurveCsv(const PrCurve& curve) {
  std::string out = "confidence,recall,precision\n";
  for (const PrPoint& p : curve.points) {
    out += FormatShortest(p.confidence) + ',' + FormatShortest(p.recall) + ',' +
           FormatShortest(p.precision) + '\n';
  }
  return out;
}

std::string RenderPrCurveSvg(const PrCurve& curve) {
  constexpr double kSize = 400;
  constexpr double kMargin = 60;
  auto sx = [&](double r) { return Coord(kMargin + r * kSize); };
  auto sy = [&](double p) { return Coord(kMargin + (1.0 - p) * kSize); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"520\" "
         "viewBox=\"0 0 520 520\">\n";
  out += "<rect width=\"520\" height=\"520\" fill=\"white\"/>\n";
  out += "<g stroke=\"black\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + sx(0) + "\" y1=\"" + sy(0) + "\" x2=\"" + sx(1) +
         "\" y2=\"" + sy(0) + "\"/>\n";
  out += "<line x1=\"" + sx(0) + "\" y1=\"" + sy(0) + "\" x2=\"" + sx(0) +
         "\" y2=\"" + sy(1) + "\"/>\n";
  out += "</g>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    const std::string label = Coord(v);
    out += "<text x=\"" + sx(v) + "\" y=\"" + Coord(kMargin + kSize + 18) +
           "\" text-anchor=\"middle\">" + label + "</text>\n";
    out += "<text x=\"" + Coord(kMargin - 8) + "\" y=\"" + sy(v) +
           "\" text-anchor=\"end\" dominant-baseline=\"middle\">" + label +
           "</text>\n";
  }
  out += "<text x=\"" + sx(0.5) + "\" y=\"" + Coord(kMargin + kSize + 40) +
         "\" text-anchor=\"middle\">Recall</text>\n";
  out += "<text x=\"18\" y=\"" + sy(0.5) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " + sy(0.5) +
         ")\">Precision</text>\n";
  out += "</g>\n";

  if (!curve.points.empty()) {
    // Monotone envelope, the same curve the AUC integrates.
    std::vector<double> envelope(curve.points.size());
    double running = 0;
    for (size_t i = curve.points.size(); i-- > 0;) {
      running = std::max(running, curve.points[i].precision);
      envelope[i] = running;
    }
    std::string pts = sx(0) + "," + sy(envelope.front());
    for (size_t i = 0; i < curve.points.size(); ++i) {
      pts += " " + sx(curve.points[i].recall) + "," + sy(envelope[i]);
    }
    out += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" +
           pts + "\"/>\n";
  }
  out += "<text x=\"" + Coord(kMargin + kSize - 4) + "\" y=\"" +
         Coord(kMargin - 16) +
         "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"end\">" +
         std::string(ClassName(curve.class_id)) + " (AUC " +
         FormatTruncated4(curve.auc) + ")</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace detbench
