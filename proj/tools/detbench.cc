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

// detbench: dataset ingestion, evaluation sweeps, figures and desk checks.
//
// Exit codes: 0 ok, 1 usage or I/O, 2 parse error, 3 invariant violation,
// 4 empty result.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "detbench/anchors.h"
#include "detbench/dataset.h"
#include "detbench/eval.h"
#include "detbench/gateway.h"
#include "detbench/geometry.h"
#include "detbench/report.h"
#include "detbench/status.h"
#include "detbench/text.h"
#include "detbench/trainmath.h"

namespace fs = std::filesystem;
using namespace detbench;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitEmpty = 4;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
      return kExitParse;
    case ErrorKind::kInvariant:
      return kExitInvariant;
    case ErrorKind::kEmptyResult:
      return kExitEmpty;
    default:
      return kExitUsage;
  }
}

// --out wins; otherwise DETBENCH_OUT_DIR/<fallback>; otherwise nothing
// (caller writes to stdout).
std::optional<std::string> ResolveOut(const std::string& out,
                                      const std::string& fallback) {
  if (!out.empty()) return out;
  if (const char* dir = std::getenv("DETBENCH_OUT_DIR"); dir && *dir) {
    fs::create_directories(dir);
    return (fs::path(dir) / fallback).string();
  }
  return std::nullopt;
}

void Emit(const std::optional<std::string>& path, const std::string& text) {
  if (path) {
    WriteFile(*path, text);
  } else {
    std::cout << text;
  }
}

double CheckThreshold(double v, const char* what) {
  if (!(v > 0.0 && v <= 1.0)) {
    throw InvalidArgument(std::string(what) + " must lie in (0, 1]");
  }
  return v;
}

std::vector<double> ParseCsList(const std::string& text) {
  std::vector<double> out;
  for (const std::string& part : SplitCsvRow(text)) {
    out.push_back(CheckThreshold(ParseDouble(part, "--cs"), "--cs"));
  }
  if (out.empty()) throw InvalidArgument("--cs must not be empty");
  if (!std::is_sorted(out.begin(), out.end()) ||
      std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw InvalidArgument("--cs must be strictly ascending");
  }
  return out;
}

std::vector<ImageRecord> LoadManifest(const std::string& path) {
  return ParseGroundTruthText(ReadFile(path));
}

void PrintHistogram(const ClassHistogram& h) {
  for (ClassId id : kAllClasses) {
    std::printf("  %-12s %lld\n", std::string(ClassName(id)).c_str(),
                static_cast<long long>(h[Index(id)]));
  }
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> paths;
  std::string format;
  std::string provenance = "web";
  std::string out;
  std::string csv_out;
  bool strict = false;
};

std::vector<std::string> ExpandInputs(const std::vector<std::string>& paths) {
  std::vector<std::string> files;
  for (const std::string& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> inner;
      for (const auto& entry : fs::directory_iterator(p)) {
        const std::string ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".xml" || ext == ".json")) {
          inner.push_back(entry.path().string());
        }
      }
      std::sort(inner.begin(), inner.end());
      files.insert(files.end(), inner.begin(), inner.end());
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw Error(ErrorKind::kNotFound, "no such input: " + p);
    }
  }
  return files;
}

int RunIngest(const IngestArgs& args) {
  const std::vector<std::string> files = ExpandInputs(args.paths);
  std::string format = args.format;
  if (format.empty()) {
    bool any_xml = false, any_json = false;
    for (const std::string& f : files) {
      const std::string ext = fs::path(f).extension().string();
      any_xml |= ext == ".xml";
      any_json |= ext == ".json";
    }
    if (any_xml && any_json) {
      throw InvalidArgument("inputs mix VOC (.xml) and Labelme (.json); pass --format");
    }
    format = any_json ? "labelme" : "voc";
  }
  if (format != "voc" && format != "labelme") {
    throw InvalidArgument("--format must be voc or labelme");
  }
  ParseOptions opts;
  opts.strictness = args.strict ? Strictness::kStrict : Strictness::kLenient;
  opts.provenance = ParseProvenance(args.provenance);

  Warnings warnings;
  std::vector<ImageRecord> records;
  for (const std::string& f : files) {
    try {
      const std::string text = ReadFile(f);
      records.push_back(format == "voc" ? ParseVoc(text, opts, &warnings, f)
                                        : ParseLabelme(text, opts, &warnings, f));
    } catch (const Error& e) {
      if (args.strict) throw Error(e.kind(), f + ": " + e.what());
      warnings.Add(f + ": skipped: " + e.what());
    }
  }
  std::sort(records.begin(), records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  for (size_t i = 1; i < records.size(); ++i) {
    if (records[i].image_id == records[i - 1].image_id) {
      const std::string msg = "duplicate image_id " + records[i].image_id;
      if (args.strict) throw InvariantError(msg);
      warnings.Add(msg);
    }
  }
  if (args.strict && !warnings.empty()) {
    throw InvariantError(warnings.messages.front());
  }
  DatasetManifest manifest = DatasetManifest::FromRecords(records);
  Emit(ResolveOut(args.out, "manifest.jsonl"), ToManifestLines(manifest.records));
  if (!args.csv_out.empty()) WriteFile(args.csv_out, ToCanonicalCsv(manifest.records));

  for (const std::string& w : warnings.messages) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("%zu records, %zu boxes, %zu warnings\n", manifest.records.size(),
              manifest.NumBoxes(), warnings.size());
  PrintHistogram(manifest.class_histogram);
  return 0;
}

// ---- split / augment / letterbox -----------------------------------------

int RunSplit(const std::string& manifest_path, double fraction, uint64_t seed,
             const std::string& out_dir) {
  const DatasetManifest manifest = DatasetManifest::FromRecords(LoadManifest(manifest_path));
  const SplitResult split = SplitManifest(manifest, fraction, seed);
  std::string dir = out_dir;
  if (dir.empty()) {
    const char* env = std::getenv("DETBENCH_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  fs::create_directories(dir);
  WriteFile((fs::path(dir) / "train.jsonl").string(), ToManifestLines(split.train.records));
  WriteFile((fs::path(dir) / "val.jsonl").string(), ToManifestLines(split.val.records));
  std::printf("train %zu records, val %zu records\n", split.train.records.size(),
              split.val.records.size());
  return 0;
}

int RunAugment(const std::string& manifest_path, const std::vector<std::string>& op_specs,
               uint64_t seed, bool strict, const std::string& out) {
  std::vector<AugmentOp> ops;
  for (const std::string& s : op_specs) ops.push_back(ParseAugmentOp(s));
  AugmentOptions opts;
  opts.strictness = strict ? Strictness::kStrict : Strictness::kLenient;
  Warnings warnings;
  std::vector<ImageRecord> outs;
  uint64_t i = 0;
  for (const ImageRecord& r : LoadManifest(manifest_path)) {
    outs.push_back(Augment(r, ops, seed + i++, opts, &warnings));
  }
  Emit(ResolveOut(out, "augmented.jsonl"), ToManifestLines(outs));
  for (const std::string& w : warnings.messages) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

int RunLetterbox(const std::string& manifest_path, int size, const std::string& out) {
  std::vector<ImageRecord> outs;
  for (const ImageRecord& r : LoadManifest(manifest_path)) {
    outs.push_back(LetterboxResize(r, size).record);
  }
  Emit(ResolveOut(out, "letterboxed.jsonl"), ToManifestLines(outs));
  return 0;
}

// ---- eval / curve ----------------------------------------------------------

int RunEval(const std::string& gt_path, const std::string& det_path, double iou,
            const std::string& cs, const std::string& format, const std::string& out) {
  CheckThreshold(iou, "--iou");
  const std::vector<double> cs_list = ParseCsList(cs);
  const ReportFormat fmt = ParseReportFormat(format);
  const GroundTruthMap gts = ToGroundTruth(LoadManifest(gt_path));
  const std::vector<Detection> dets = ParseDetectionsCsv(ReadFile(det_path));
  const std::vector<EvalReport> reports = Sweep(dets, gts, iou, cs_list);
  const char* ext = fmt == ReportFormat::kCsv ? "report.csv"
                    : fmt == ReportFormat::kStructured ? "report.json"
                                                       : "report.txt";
  Emit(ResolveOut(out, ext), RenderReports(reports, fmt));
  for (const EvalReport& r : reports) {
    if (!r.mean) throw EmptyResultError("ground truth has no supported class");
  }
  return 0;
}

int RunCurve(const std::string& gt_path, const std::string& det_path,
             const std::string& class_name, double iou, const std::string& out,
             const std::string& points_out) {
  CheckThreshold(iou, "--iou");
  const ClassId id = ParseClassName(class_name);
  const GroundTruthMap gts = ToGroundTruth(LoadManifest(gt_path));
  const std::vector<Detection> dets = ParseDetectionsCsv(ReadFile(det_path));
  const PrCurve curve = ComputePrCurve(dets, gts, id, iou);
  const std::string stem = "pr_" + std::string(ClassName(id));
  const std::optional<std::string> svg_path = ResolveOut(out, stem + ".svg");
  std::string csv_path = points_out;
  if (csv_path.empty() && svg_path) {
    csv_path = fs::path(*svg_path).replace_extension(".csv").string();
  }
  Emit(svg_path, RenderPrCurveSvg(curve));
  if (!csv_path.empty()) WriteFile(csv_path, FormatPrCurveCsv(curve));
  if (svg_path) {
    std::printf("%s AUC %s\n", std::string(ClassName(id)).c_str(),
                FormatTruncated4(curve.auc).c_str());
  }
  return 0;
}

// ---- desk ------------------------------------------------------------------

std::vector<double> ParseDoubleList(const std::string& text, const char* what) {
  std::vector<double> out;
  for (const std::string& part : SplitCsvRow(text)) out.push_back(ParseDouble(part, what));
  return out;
}

int RunDeskAnchors(int w, int h, double stride, const std::string& scales,
                   const std::string& ratios) {
  AnchorConfig config;
  config.stride = stride;
  if (!scales.empty()) config.scales = ParseDoubleList(scales, "--scales");
  if (!ratios.empty()) config.ratios = ParseDoubleList(ratios, "--ratios");
  const AnchorGrid grid = GenerateAnchors(w, h, config);
  std::printf("grid %dx%d cells, %zu per cell\n", grid.cells_x, grid.cells_y,
              grid.AnchorsPerCell());
  std::printf("%zu anchors\n", grid.anchors.size());
  return 0;
}

int RunDeskAssign(int w, int h, double stride, const std::vector<std::string>& gt_specs,
                  double fg, double bg) {
  std::vector<LabeledBox> gts;
  for (const std::string& spec : gt_specs) {
    const std::vector<double> v = ParseDoubleList(spec, "--gt");
    if (v.size() != 4) throw InvalidArgument("--gt expects xmin,ymin,xmax,ymax");
    gts.push_back({{v[0], v[1], v[2], v[3]}, ClassId::kCategoryII});
  }
  AnchorConfig config;
  config.stride = stride;
  const AnchorGrid grid = GenerateAnchors(w, h, config);
  RpnAssignOptions opts;
  opts.thresholds = {fg, bg};
  const std::vector<TargetAssignment> as = AssignRpnTargets(grid, gts, opts);
  size_t n_fg = 0, n_bg = 0, n_ign = 0;
  std::vector<size_t> per_gt(gts.size(), 0);
  for (const TargetAssignment& a : as) {
    if (a.label == AnchorLabel::kForeground) {
      ++n_fg;
      if (a.matched_gt) ++per_gt[*a.matched_gt];
    } else if (a.label == AnchorLabel::kBackground) {
      ++n_bg;
    } else {
      ++n_ign;
    }
  }
  std::printf("%zu anchors: %zu foreground, %zu background, %zu ignored\n", as.size(),
              n_fg, n_bg, n_ign);
  for (size_t g = 0; g < gts.size(); ++g) {
    std::printf("gt %zu: %zu foreground anchors\n", g, per_gt[g]);
  }
  return 0;
}

int RunDeskLosses(bool table1, const std::string& parts_text) {
  LossParts parts;
  if (table1) {
    parts = {0.0593, 0.0598, 0.2015, 0.0564};
  } else {
    const std::vector<double> v = ParseDoubleList(parts_text, "--parts");
    if (v.size() != 4) throw InvalidArgument("--parts expects four values");
    parts = {v[0], v[1], v[2], v[3]};
  }
  const LossBreakdown b = CombineLosses(parts);
  std::printf("rpn objectness      %.4f\n", parts.rpn_objectness);
  std::printf("rpn localisation    %.4f\n", parts.rpn_localisation);
  std::printf("classification      %.4f\n", parts.cls_classification);
  std::printf("box localisation    %.4f\n", parts.cls_localisation);
  std::printf("total               %.4f\n", b.total);
  return 0;
}

int RunDeskAdam(double lr, double theta0, int steps, bool eps_inside) {
  AdamConfig config;
  config.learning_rate = lr;
  if (eps_inside) config.placement = EpsilonPlacement::kInsideSqrt;
  AdamState adam(1, config);
  std::vector<double> theta = {theta0};
  std::optional<int> reached;
  for (int t = 1; t <= steps; ++t) {
    const double grad = 2.0 * theta[0];  // d/dθ θ²
    adam.Apply(theta, std::span<const double>(&grad, 1));
    std::printf("step %3d theta % .6e\n", t, theta[0]);
    if (!reached && std::abs(theta[0]) < 1e-3) reached = t;
  }
  if (reached) {
    std::printf("|theta| < 1e-3 first at step %d; final |theta| %.3e\n", *reached,
                std::abs(theta[0]));
  } else {
    std::printf("|theta| >= 1e-3 after %d steps; final |theta| %.3e\n", steps,
                std::abs(theta[0]));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detbench: detection dataset and evaluation toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert VOC/Labelme annotations to a manifest");
  ingest_cmd->add_option("paths", ingest.paths, "Annotation files or directories")->required();
  ingest_cmd->add_option("--format", ingest.format, "voc or labelme (inferred when uniform)");
  ingest_cmd->add_option("--provenance", ingest.provenance, "medetec, web or trial");
  ingest_cmd->add_option("--out", ingest.out, "Manifest output (JSON lines)");
  ingest_cmd->add_option("--csv", ingest.csv_out, "Also write the canonical CSV");
  ingest_cmd->add_flag("--strict", ingest.strict, "Fail on any annotation defect");

  std::string manifest, out, gt, det, format = "table", cs = "0.30,0.50,0.75,0.90";
  std::string class_name, points_out;
  double fraction = 0.9, iou = 0.5;
  uint64_t seed = 0;
  bool strict = false;
  std::vector<std::string> ops;
  int size = 1024;

  auto* split_cmd = app.add_subcommand("split", "Deterministic train/val split");
  split_cmd->add_option("--manifest", manifest)->required();
  split_cmd->add_option("--fraction", fraction, "Train fraction");
  split_cmd->add_option("--seed", seed);
  split_cmd->add_option("--out", out, "Output directory for train.jsonl/val.jsonl");

  auto* augment_cmd = app.add_subcommand("augment", "Apply box-aware augmentations");
  augment_cmd->add_option("--manifest", manifest)->required();
  augment_cmd->add_option("--op", ops, "flip_h, flip_v, rotate(deg), tilt, scale, skew")
      ->required();
  augment_cmd->add_option("--seed", seed);
  augment_cmd->add_flag("--strict", strict);
  augment_cmd->add_option("--out", out);

  auto* letterbox_cmd = app.add_subcommand("letterbox", "Letterbox records to a square canvas");
  letterbox_cmd->add_option("--manifest", manifest)->required();
  letterbox_cmd->add_option("--size", size);
  letterbox_cmd->add_option("--out", out);

  auto* eval_cmd = app.add_subcommand("eval", "Per-class evaluation sweep");
  eval_cmd->add_option("--gt", gt, "Ground truth manifest or canonical CSV")->required();
  eval_cmd->add_option("--det", det, "Detections CSV")->required();
  eval_cmd->add_option("--iou", iou);
  eval_cmd->add_option("--cs", cs, "Comma list of confidence thresholds");
  eval_cmd->add_option("--format", format, "table, csv or structured");
  eval_cmd->add_option("--out", out);

  auto* curve_cmd = app.add_subcommand("curve", "Precision/recall curve figure");
  curve_cmd->add_option("--gt", gt)->required();
  curve_cmd->add_option("--det", det)->required();
  curve_cmd->add_option("--class", class_name)->required();
  curve_cmd->add_option("--iou", iou);
  curve_cmd->add_option("--out", out, "SVG path");
  curve_cmd->add_option("--points", points_out, "Point CSV (default: next to the SVG)");

  std::string store_path;
  auto* export_cmd = app.add_subcommand("export-store", "Export a gateway log as detections CSV");
  export_cmd->add_option("--store", store_path)->required();
  export_cmd->add_option("--out", out);

  auto* desk = app.add_subcommand("desk", "Numeric desk checks");
  desk->require_subcommand(1);
  int w = 1024, h = 1024;
  double stride = 16, fg = 0.5, bg = 0.1;
  std::string scales, ratios, parts;
  std::vector<std::string> gt_boxes;
  auto* anchors_cmd = desk->add_subcommand("anchors", "Anchor grid size");
  anchors_cmd->add_option("width", w)->required();
  anchors_cmd->add_option("height", h)->required();
  anchors_cmd->add_option("--stride", stride);
  anchors_cmd->add_option("--scales", scales);
  anchors_cmd->add_option("--ratios", ratios);

  auto* assign_cmd = desk->add_subcommand("assign", "RPN label counts for given boxes");
  assign_cmd->add_option("width", w)->required();
  assign_cmd->add_option("height", h)->required();
  assign_cmd->add_option("--stride", stride);
  assign_cmd->add_option("--gt", gt_boxes, "xmin,ymin,xmax,ymax")->required();
  assign_cmd->add_option("--fg", fg);
  assign_cmd->add_option("--bg", bg);

  bool table1 = false;
  auto* losses_cmd = desk->add_subcommand("losses", "Combine the four loss parts");
  auto* table1_flag = losses_cmd->add_flag("--table1", table1, "Use the reference loss parts");
  losses_cmd->add_option("--parts", parts, "rpn_obj,rpn_loc,cls,cls_loc")->excludes(table1_flag);

  bool quadratic = false, eps_inside = false;
  double lr = 0.1, theta0 = 1.0;
  int steps = 200;
  auto* adam_cmd = desk->add_subcommand("adam", "Adam trace on f(θ)=θ²");
  adam_cmd->add_flag("--quadratic", quadratic)->required();
  adam_cmd->add_option("--lr", lr);
  adam_cmd->add_option("--theta0", theta0);
  adam_cmd->add_option("--steps", steps);
  adam_cmd->add_flag("--epsilon-inside-sqrt", eps_inside);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ingest_cmd) return RunIngest(ingest);
    if (*split_cmd) return RunSplit(manifest, fraction, seed, out);
    if (*augment_cmd) return RunAugment(manifest, ops, seed, strict, out);
    if (*letterbox_cmd) return RunLetterbox(manifest, size, out);
    if (*eval_cmd) return RunEval(gt, det, iou, cs, format, out);
    if (*curve_cmd) return RunCurve(gt, det, class_name, iou, out, points_out);
    if (*export_cmd) {
      SubmissionStore store(store_path);
      Emit(ResolveOut(out, "detections.csv"), ExportStoreCsv(store));
      return 0;
    }
    if (*anchors_cmd) return RunDeskAnchors(w, h, stride, scales, ratios);
    if (*assign_cmd) return RunDeskAssign(w, h, stride, gt_boxes, fg, bg);
    if (*losses_cmd) {
      if (!table1 && parts.empty()) throw InvalidArgument("pass --table1 or --parts");
      return RunDeskLosses(table1, parts);
    }
    if (*adam_cmd) return RunDeskAdam(lr, theta0, steps, eps_inside);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
