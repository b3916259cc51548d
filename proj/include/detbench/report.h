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

// Detection file format and report renderers. Every renderer is a pure
// function of its input so identical inputs give byte-identical output.

#ifndef DETBENCH_REPORT_H_
#define DETBENCH_REPORT_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detbench/eval.h"

namespace detbench {

inline constexpr std::string_view kDetectionsHeader =
    "image_id,class,confidence,xmin,ymin,xmax,ymax";

// Line-delimited rows; the header line is optional on input and always
// written on output.
std::vector<Detection> ParseDetectionsCsv(std::string_view text);
std::string ToDetectionsCsv(std::span<const Detection> detections);

enum class ReportFormat { kTable, kCsv, kStructured };
ReportFormat ParseReportFormat(std::string_view name);

// Aligned per-class table (CategoryI..IV, Unstageable, DTI), a Mean Average
// row over supported classes and the false-positive totals. Values are
// truncated to 4 decimals.
std::string FormatReportTable(const EvalReport& report);
std::string FormatReportsCsv(std::span<const EvalReport> reports);
// JSON document with one entry per report.
std::string FormatReportsStructured(std::span<const EvalReport> reports);

std::string RenderReports(std::span<const EvalReport> reports, ReportFormat format);

std::string FormatPrCurveCsv(const PrCurve& curve);
// Unit-square axes, the curve as a step polyline, legend "<class> (AUC x)".
std::string RenderPrCurveSvg(const PrCurve& curve);

}  // namespace detbench

#endif  // DETBENCH_REPORT_H_
