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

#include "detbench/dataset.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "detbench/text.h"
#include "json.hpp"

namespace detbench {
namespace {

using Json = nlohmann::ordered_json;
namespace pt = boost::property_tree;

constexpr double kPi = 3.14159265358979323846;

std::string BaseName(std::string_view path) {
  return std::filesystem::path(std::string(path)).filename().string();
}

// Applies the in-image invariant to one parsed box. Returns false when the
// box must be dropped (lenient mode only).
bool SanitizeBox(Box& box, int width, int height, const std::string& where,
                 Strictness strictness, Warnings* warnings) {
  if (!box.IsFinite()) throw ParseError(where + ": non-finite coordinate");
  if (!(box.xmin < box.xmax) || !(box.ymin < box.ymax)) {
    if (strictness == Strictness::kStrict) {
      throw InvariantError(where + ": box has xmin >= xmax or ymin >= ymax");
    }
    Warn(warnings, where + ": dropped box with non-positive extent");
    return false;
  }
  const bool outside = box.xmin < 0 || box.ymin < 0 || box.xmax > width ||
                       box.ymax > height;
  if (outside) {
    if (strictness == Strictness::kStrict) {
      throw InvariantError(where + ": box lies outside the image");
    }
    box = ClipBox(box, width, height);
    if (!box.IsValid()) {
      Warn(warnings, where + ": dropped box entirely outside the image");
      return false;
    }
    Warn(warnings, where + ": box clamped to the image bounds");
  }
  return true;
}

void CheckImageSize(int width, int height, const std::string& where) {
  if (width < 1 || height < 1) {
    throw InvariantError(where + ": image size must be at least 1x1");
  }
}

Json BoxJson(const LabeledBox& b) {
  Json j;
  j["class"] = std::string(ClassName(b.class_id));
  j["xmin"] = b.box.xmin;
  j["ymin"] = b.box.ymin;
  j["xmax"] = b.box.xmax;
  j["ymax"] = b.box.ymax;
  return j;
}

double JsonNumber(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw ParseError(where + ": missing numeric field '" + key + "'");
  }
  return j[key].get<double>();
}

std::vector<ImageRecord> SortedById(std::span<const ImageRecord> records) {
  std::vector<ImageRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ImageRecord& a, const ImageRecord& b) {
                     return a.image_id < b.image_id;
                   });
  return sorted;
}

// Exact values at multiples of 90 degrees keep quarter turns lossless.
std::pair<double, double> CosSinDegrees(double degrees) {
  const double quarter = degrees / 90.0;
  if (quarter == std::round(quarter)) {
    static constexpr double kCos[] = {1, 0, -1, 0};
    static constexpr double kSin[] = {0, 1, 0, -1};
    const int k = ((static_cast<int>(quarter) % 4) + 4) % 4;
    return {kCos[k], kSin[k]};
  }
  const double rad = degrees * kPi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

}  // namespace

std::string_view ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kMedetec:
      return "medetec";
    case Provenance::kWeb:
      return "web";
    case Provenance::kTrial:
      return "trial";
  }
  return "web";
}

Provenance ParseProvenance(std::string_view name) {
  if (name == "medetec") return Provenance::kMedetec;
  if (name == "web") return Provenance::kWeb;
  if (name == "trial") return Provenance::kTrial;
  throw ParseError("unknown provenance '" + std::string(name) +
                   "'; expected medetec, web or trial");
}

ClassHistogram CountClasses(std::span<const ImageRecord> records) {
  ClassHistogram h{};
  for (const ImageRecord& r : records) {
    for (const LabeledBox& b : r.annotations) ++h[Index(b.class_id)];
  }
  return h;
}

DatasetManifest DatasetManifest::FromRecords(std::vector<ImageRecord> records) {
  DatasetManifest m;
  m.records = std::move(records);
  m.class_histogram = CountClasses(m.records);
  return m;
}

size_t DatasetManifest::NumBoxes() const {
  size_t n = 0;
  for (const ImageRecord& r : records) n += r.annotations.size();
  return n;
}

void ValidateRecord(const ImageRecord& record) {
  const std::string where = "image '" + record.image_id + "'";
  CheckImageSize(record.width, record.height, where);
  for (const LabeledBox& b : record.annotations) {
    const Box& box = b.box;
    if (!box.IsValid() || box.xmin < 0 || box.ymin < 0 ||
        box.xmax > record.width || box.ymax > record.height) {
      throw InvariantError(where + ": annotation violates image bounds");
    }
  }
}

ImageRecord ParseVoc(std::string_view xml_text, const ParseOptions& options,
                     Warnings* warnings, std::string_view source_path) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml_text)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed VOC XML: " + std::string(e.what()));
  }
  const auto annotation = tree.get_child_optional("annotation");
  if (!annotation) throw ParseError("VOC XML has no <annotation> root");

  ImageRecord record;
  record.source_path = std::string(source_path);
  record.provenance = options.provenance;
  record.image_id = Trim(annotation->get<std::string>("filename", ""));
  if (record.image_id.empty()) record.image_id = BaseName(source_path);
  if (record.image_id.empty()) throw ParseError("VOC XML has no <filename>");
  const std::string where = "VOC '" + record.image_id + "'";

  const auto size = annotation->get_child_optional("size");
  if (!size) throw ParseError(where + ": missing <size>");
  record.width = ParseInt(size->get<std::string>("width", ""), "size/width");
  record.height = ParseInt(size->get<std::string>("height", ""), "size/height");
  CheckImageSize(record.width, record.height, where);

  int index = 0;
  for (const auto& [tag, node] : *annotation) {
    if (tag != "object") continue;
    const std::string obj_where = where + " object " + std::to_string(index++);
    const auto name = node.get_optional<std::string>("name");
    if (!name) throw ParseError(obj_where + ": missing <name>");
    const auto bndbox = node.get_child_optional("bndbox");
    if (!bndbox) throw ParseError(obj_where + ": missing <bndbox>");
    LabeledBox lb;
    lb.class_id = ParseClassName(Trim(*name));
    lb.box = {ParseDouble(bndbox->get<std::string>("xmin", ""), "xmin"),
              ParseDouble(bndbox->get<std::string>("ymin", ""), "ymin"),
              ParseDouble(bndbox->get<std::string>("xmax", ""), "xmax"),
              ParseDouble(bndbox->get<std::string>("ymax", ""), "ymax")};
    if (SanitizeBox(lb.box, record.width, record.height, obj_where,
                    options.strictness, warnings)) {
      record.annotations.push_back(lb);
    }
  }
  return record;
}

ImageRecord ParseLabelme(std::string_view json_text, const ParseOptions& options,
                         Warnings* warnings, std::string_view source_path) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw ParseError("malformed Labelme JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw ParseError("Labelme document must be an object");

  ImageRecord record;
  record.source_path = std::string(source_path);
  record.provenance = options.provenance;
  if (doc.contains("imagePath") && doc["imagePath"].is_string()) {
    record.image_id = BaseName(doc["imagePath"].get<std::string>());
  }
  if (record.image_id.empty()) record.image_id = BaseName(source_path);
  if (record.image_id.empty()) throw ParseError("Labelme file has no imagePath");
  const std::string where = "Labelme '" + record.image_id + "'";
  record.width = static_cast<int>(JsonNumber(doc, "imageWidth", where));
  record.height = static_cast<int>(JsonNumber(doc, "imageHeight", where));
  CheckImageSize(record.width, record.height, where);

  if (!doc.contains("shapes")) return record;
  if (!doc["shapes"].is_array()) throw ParseError(where + ": shapes must be a list");
  int index = 0;
  for (const Json& shape : doc["shapes"]) {
    const std::string shape_where = where + " shape " + std::to_string(index++);
    const std::string type = shape.value("shape_type", "rectangle");
    if (type != "rectangle") {
      throw ParseError(shape_where + ": unsupported shape type '" + type +
                       "' (only rectangles are accepted)");
    }
    if (!shape.contains("label") || !shape["label"].is_string()) {
      throw ParseError(shape_where + ": missing label");
    }
    const Json& points = shape.value("points", Json::array());
    if (!points.is_array() || points.size() != 2 || !points[0].is_array() ||
        !points[1].is_array() || points[0].size() != 2 ||
        points[1].size() != 2) {
      throw ParseError(shape_where + ": a rectangle needs exactly two points");
    }
    const double x0 = points[0][0].get<double>();
    const double y0 = points[0][1].get<double>();
    const double x1 = points[1][0].get<double>();
    const double y1 = points[1][1].get<double>();
    LabeledBox lb;
    lb.class_id = ParseClassName(shape["label"].get<std::string>());
    lb.box = {std::min(x0, x1), std::min(y0, y1), std::max(x0, x1),
              std::max(y0, y1)};
    if (SanitizeBox(lb.box, record.width, record.height, shape_where,
                    options.strictness, warnings)) {
      record.annotations.push_back(lb);
    }
  }
  return record;
}

std::string ToCanonicalCsv(std::span<const ImageRecord> records) {
  std::string out(kCanonicalHeader);
  out += '\n';
  for (const ImageRecord& r : SortedById(records)) {
    for (const LabeledBox& b : r.annotations) {
      out += CsvField(r.image_id);
      out += ',' + std::to_string(r.width) + ',' + std::to_string(r.height);
      out += ',' + std::string(ClassName(b.class_id));
      out += ',' + FormatShortest(b.box.xmin) + ',' + FormatShortest(b.box.ymin);
      out += ',' + FormatShortest(b.box.xmax) + ',' + FormatShortest(b.box.ymax);
      out += '\n';
    }
  }
  return out;
}

std::vector<ImageRecord> ParseCanonicalCsv(std::string_view csv_text) {
  std::vector<ImageRecord> records;
  std::map<std::string, size_t> by_name;
  bool header_seen = false;
  int line_no = 0;
  for (std::string_view line : SplitLines(csv_text)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    if (!header_seen) {
      if (Trim(line) != kCanonicalHeader) {
        throw ParseError("canonical CSV must start with the header '" +
                         std::string(kCanonicalHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const std::string where = "canonical CSV line " + std::to_string(line_no);
    const std::vector<std::string> f = SplitCsvRow(line);
    if (f.size() != 8) throw ParseError(where + ": expected 8 fields");
    const int width = ParseInt(f[1], "width");
    const int height = ParseInt(f[2], "height");
    auto [it, inserted] = by_name.try_emplace(f[0], records.size());
    if (inserted) {
      ImageRecord r;
      r.image_id = f[0];
      r.width = width;
      r.height = height;
      CheckImageSize(width, height, where);
      records.push_back(std::move(r));
    }
    ImageRecord& r = records[it->second];
    if (r.width != width || r.height != height) {
      throw ParseError(where + ": inconsistent size for " + r.image_id);
    }
    LabeledBox lb;
    lb.class_id = ParseClassName(f[3]);
    lb.box = {ParseDouble(f[4], "xmin"), ParseDouble(f[5], "ymin"),
              ParseDouble(f[6], "xmax"), ParseDouble(f[7], "ymax")};
    r.annotations.push_back(lb);
  }
  if (!header_seen) throw ParseError("canonical CSV is missing its header");
  for (const ImageRecord& r : records) ValidateRecord(r);
  return SortedById(records);
}

std::string WriteRecordJson(const ImageRecord& record) {
  Json j;
  j["image_id"] = record.image_id;
  j["source_path"] = record.source_path;
  j["width"] = record.width;
  j["height"] = record.height;
  j["provenance"] = std::string(ProvenanceName(record.provenance));
  j["annotations"] = Json::array();
  for (const LabeledBox& b : record.annotations) j["annotations"].push_back(BoxJson(b));
  return j.dump();
}

ImageRecord ParseRecordJson(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    throw ParseError("malformed manifest line: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string()) {
    throw ParseError("manifest line needs a string image_id");
  }
  ImageRecord r;
  r.image_id = j["image_id"].get<std::string>();
  const std::string where = "manifest '" + r.image_id + "'";
  r.source_path = j.value("source_path", "");
  r.width = static_cast<int>(JsonNumber(j, "width", where));
  r.height = static_cast<int>(JsonNumber(j, "height", where));
  r.provenance = ParseProvenance(j.value("provenance", "web"));
  for (const Json& a : j.value("annotations", Json::array())) {
    if (!a.contains("class") || !a["class"].is_string()) {
      throw ParseError(where + ": annotation without class");
    }
    LabeledBox lb;
    lb.class_id = ParseClassName(a["class"].get<std::string>());
    lb.box = {JsonNumber(a, "xmin", where), JsonNumber(a, "ymin", where),
              JsonNumber(a, "xmax", where), JsonNumber(a, "ymax", where)};
    r.annotations.push_back(lb);
  }
  ValidateRecord(r);
  return r;
}

std::string ToManifestLines(std::span<const ImageRecord> records) {
  std::string out;
  for (const ImageRecord& r : SortedById(records)) {
    out += WriteRecordJson(r);
    out += '\n';
  }
  return out;
}

std::vector<ImageRecord> ParseManifestLines(std::string_view text) {
  std::vector<ImageRecord> records;
  for (std::string_view line : SplitLines(text)) {
    if (Trim(line).empty()) continue;
    records.push_back(ParseRecordJson(line));
  }
  return SortedById(records);
}

SplitResult SplitManifest(const DatasetManifest& manifest, double train_fraction,
                          uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  const size_t n = manifest.records.size();
  if (n < 2) throw InvalidArgument("splitting needs at least two images");

  // Sort first so the partition does not depend on input order.
  std::vector<ImageRecord> sorted = SortedById(manifest.records);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed);
  for (size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  auto n_val = static_cast<size_t>(
      std::floor(static_cast<double>(n) * (1.0 - train_fraction) + 1e-9));
  n_val = std::clamp<size_t>(n_val, 1, n - 1);

  std::vector<bool> is_val(n, false);
  for (size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> val;
  for (size_t i = 0; i < n; ++i) {
    (is_val[i] ? val : train).push_back(sorted[i]);
  }
  return {DatasetManifest::FromRecords(std::move(train)),
          DatasetManifest::FromRecords(std::move(val))};
}

Box LetterboxTransform::Apply(const Box& b) const {
  return {b.xmin * scale + pad_x, b.ymin * scale + pad_y,
          b.xmax * scale + pad_x, b.ymax * scale + pad_y};
}

Box LetterboxTransform::Invert(const Box& b) const {
  return {(b.xmin - pad_x) / scale, (b.ymin - pad_y) / scale,
          (b.xmax - pad_x) / scale, (b.ymax - pad_y) / scale};
}

LetterboxResult LetterboxResize(const ImageRecord& record, int target) {
  if (record.width <= 0 || record.height <= 0 || target <= 0) {
    throw InvalidArgument("letterbox needs positive dimensions");
  }
  LetterboxTransform t;
  t.scale = static_cast<double>(target) / std::max(record.width, record.height);
  t.pad_x = (target - record.width * t.scale) / 2.0;
  t.pad_y = (target - record.height * t.scale) / 2.0;
  LetterboxResult out{record, t};
  out.record.width = target;
  out.record.height = target;
  for (LabeledBox& b : out.record.annotations) {
    b.box = ClipBox(t.Apply(b.box), target, target);
  }
  return out;
}

Affine AugmentAffine(AugmentKind kind, double param, int width, int height) {
  const double cx = width / 2.0;
  const double cy = height / 2.0;
  // Linear part [[a, b], [d, e]] about the canvas center.
  double a = 1, b = 0, d = 0, e = 1;
  switch (kind) {
    case AugmentKind::kFlipH:
      return {-1, 0, static_cast<double>(width), 0, 1, 0};
    case AugmentKind::kFlipV:
      return {1, 0, 0, 0, -1, static_cast<double>(height)};
    case AugmentKind::kRotate:
    case AugmentKind::kTilt: {
      // Image coordinates (y down): (u, v) -> (cos u + sin v, -sin u + cos v).
      const auto [c, s] = CosSinDegrees(param);
      a = c;
      b = s;
      d = -s;
      e = c;
      break;
    }
    case AugmentKind::kScale:
      if (!(param > 0)) throw InvalidArgument("scale factor must be positive");
      a = param;
      e = param;
      break;
    case AugmentKind::kSkew:
      b = param;
      break;
  }
  return {a, b, cx - a * cx - b * cy, d, e, cy - d * cx - e * cy};
}

Box TransformedHull(const Box& box, const Affine& map) {
  const std::pair<double, double> corners[] = {
      map(box.xmin, box.ymin), map(box.xmax, box.ymin),
      map(box.xmin, box.ymax), map(box.xmax, box.ymax)};
  Box hull{corners[0].first, corners[0].second, corners[0].first,
           corners[0].second};
  for (const auto& [x, y] : corners) {
    hull.xmin = std::min(hull.xmin, x);
    hull.ymin = std::min(hull.ymin, y);
    hull.xmax = std::max(hull.xmax, x);
    hull.ymax = std::max(hull.ymax, y);
  }
  return hull;
}

AugmentOp ParseAugmentOp(std::string_view spec) {
  spec = Trim(spec);
  std::string_view name = spec;
  std::optional<double> param;
  const size_t open = spec.find('(');
  if (open != std::string_view::npos) {
    if (spec.back() != ')') throw ParseError("bad augmentation op '" + std::string(spec) + "'");
    name = spec.substr(0, open);
    const std::string_view inner = spec.substr(open + 1, spec.size() - open - 2);
    if (!Trim(inner).empty()) param = ParseDouble(inner, "augmentation parameter");
  }
  static const std::pair<std::string_view, AugmentKind> kNames[] = {
      {"flip_h", AugmentKind::kFlipH}, {"flip_v", AugmentKind::kFlipV},
      {"rotate", AugmentKind::kRotate}, {"tilt", AugmentKind::kTilt},
      {"scale", AugmentKind::kScale},   {"skew", AugmentKind::kSkew}};
  for (const auto& [n, kind] : kNames) {
    if (n == Trim(name)) return {kind, param};
  }
  throw ParseError("unknown augmentation op '" + std::string(name) +
                   "'; expected flip_h, flip_v, rotate, tilt, scale or skew");
}

ImageRecord Augment(const ImageRecord& record, std::span<const AugmentOp> ops,
                    uint64_t seed, const AugmentOptions& options,
                    Warnings* warnings) {
  std::mt19937_64 rng(seed);
  auto draw = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  ImageRecord out = record;
  for (const AugmentOp& op : ops) {
    double param = 0;
    switch (op.kind) {
      case AugmentKind::kFlipH:
      case AugmentKind::kFlipV:
        break;
      case AugmentKind::kRotate:
        param = op.param ? *op.param
                         : draw(-options.max_rotate_deg, options.max_rotate_deg);
        break;
      case AugmentKind::kTilt:
        param = op.param ? *op.param
                         : draw(-options.max_tilt_deg, options.max_tilt_deg);
        break;
      case AugmentKind::kScale:
        param = op.param ? *op.param : draw(options.min_scale, options.max_scale);
        break;
      case AugmentKind::kSkew:
        param = op.param ? *op.param : draw(-options.max_skew, options.max_skew);
        break;
    }
    const Affine map = AugmentAffine(op.kind, param, out.width, out.height);
    std::vector<LabeledBox> kept;
    for (const LabeledBox& b : out.annotations) {
      const Box hull = TransformedHull(b.box, map);
      const Box clipped = ClipBox(hull, out.width, out.height);
      if (!clipped.IsValid() ||
          clipped.Area() < options.min_retained_area * hull.Area()) {
        Warn(warnings, "image '" + out.image_id +
                           "': box dropped after augmentation (retained area "
                           "below floor)");
        continue;
      }
      kept.push_back({clipped, b.class_id});
    }
    out.annotations = std::move(kept);
  }
  if (!record.annotations.empty() && out.annotations.empty() &&
      options.strictness == Strictness::kStrict) {
    throw InvariantError("image '" + record.image_id +
                         "': augmentation removed every annotation");
  }
  return out;
}

ImageRecord CropWindow(const ImageRecord& record, const Box& window,
                       double min_retained_area, Warnings* warnings) {
  if (!window.IsValid() || window.xmin < 0 || window.ymin < 0 ||
      window.xmax > record.width || window.ymax > record.height) {
    throw InvalidArgument("crop window must be a valid box inside the image");
  }
  ImageRecord out = record;
  out.width = static_cast<int>(std::lround(window.Width()));
  out.height = static_cast<int>(std::lround(window.Height()));
  out.annotations.clear();
  bool any_overlap = false;
  for (const LabeledBox& b : record.annotations) {
    const double inter = IntersectionArea(b.box, window);
    if (inter > 0) any_overlap = true;
    if (inter <= 0 || inter < min_retained_area * b.box.Area()) continue;
    const Box clipped{std::max(b.box.xmin, window.xmin) - window.xmin,
                      std::max(b.box.ymin, window.ymin) - window.ymin,
                      std::min(b.box.xmax, window.xmax) - window.xmin,
                      std::min(b.box.ymax, window.ymax) - window.ymin};
    out.annotations.push_back({ClipBox(clipped, out.width, out.height), b.class_id});
  }
  if (!record.annotations.empty() && !any_overlap) {
    Warn(warnings, "image '" + record.image_id +
                       "': crop window misses every annotation");
  }
  return out;
}

GroundTruthMap ToGroundTruth(std::span<const ImageRecord> records) {
  GroundTruthMap gt;
  for (const ImageRecord& r : records) {
    auto [it, inserted] = gt.try_emplace(r.image_id, r.annotations);
    if (!inserted) {
      throw InvariantError("duplicate image id '" + r.image_id + "' in ground truth");
    }
  }
  return gt;
}

std::vector<ImageRecord> ParseGroundTruthText(std::string_view text) {
  const std::string_view t = Trim(text);
  if (!t.empty() && t.front() == '{') return ParseManifestLines(text);
  return ParseCanonicalCsv(text);
}

}  // namespace detbench
