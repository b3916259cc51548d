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

// Annotation ingestion and geometric pre-processing. Only box geometry and
// metadata are transformed; pixel data is never touched.

#ifndef DETBENCH_DATASET_H_
#define DETBENCH_DATASET_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "detbench/geometry.h"

namespace detbench {

enum class Provenance { kMedetec, kWeb, kTrial };

std::string_view ProvenanceName(Provenance p);
Provenance ParseProvenance(std::string_view name);

struct ImageRecord {
  std::string image_id;
  std::string source_path;
  int width = 0;
  int height = 0;
  std::vector<LabeledBox> annotations;
  Provenance provenance = Provenance::kWeb;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

using ClassHistogram = std::array<int64_t, kNumClasses>;

struct DatasetManifest {
  std::vector<ImageRecord> records;
  ClassHistogram class_histogram{};

  static DatasetManifest FromRecords(std::vector<ImageRecord> records);
  size_t NumBoxes() const;
};

ClassHistogram CountClasses(std::span<const ImageRecord> records);

// Throws an invariant Error when a record has non-positive size or a box
// outside [0, width] x [0, height] or with non-positive extent.
void ValidateRecord(const ImageRecord& record);

struct ParseOptions {
  Strictness strictness = Strictness::kLenient;
  Provenance provenance = Provenance::kWeb;
};

// Pascal VOC XML. image_id comes from <filename>, falling back to
// source_path. Boxes outside the image are clamped with a warning (lenient)
// or rejected (strict); boxes with xmin >= xmax or ymin >= ymax are always
// rejected in strict mode and dropped with a warning otherwise.
ImageRecord ParseVoc(std::string_view xml_text, const ParseOptions& options = {},
                     Warnings* warnings = nullptr,
                     std::string_view source_path = {});

// Labelme JSON with rectangle shapes only; any other shape type is an error.
ImageRecord ParseLabelme(std::string_view json_text,
                         const ParseOptions& options = {},
                         Warnings* warnings = nullptr,
                         std::string_view source_path = {});

inline constexpr std::string_view kCanonicalHeader =
    "filename,width,height,class,xmin,ymin,xmax,ymax";

// One row per annotation, ordered by filename then box order. Coordinates
// use the shortest round-trip decimal form.
std::string ToCanonicalCsv(std::span<const ImageRecord> records);

// Inverse of ToCanonicalCsv. Images without boxes cannot be represented.
std::vector<ImageRecord> ParseCanonicalCsv(std::string_view csv_text);

// One JSON object per line, records sorted by image_id.
std::string ToManifestLines(std::span<const ImageRecord> records);
std::vector<ImageRecord> ParseManifestLines(std::string_view text);

std::string WriteRecordJson(const ImageRecord& record);
ImageRecord ParseRecordJson(std::string_view line);

// Image-level partition. The validation side receives
// floor(n * (1 - train_fraction)) images, kept within [1, n - 1].
struct SplitResult {
  DatasetManifest train;
  DatasetManifest val;
};
SplitResult SplitManifest(const DatasetManifest& manifest,
                          double train_fraction = 0.9, uint64_t seed = 0);

struct LetterboxTransform {
  double scale = 1;
  double pad_x = 0;
  double pad_y = 0;

  Box Apply(const Box& b) const;
  Box Invert(const Box& b) const;
};

struct LetterboxResult {
  ImageRecord record;
  LetterboxTransform transform;
};

// Scales the longer side to `target` and pads the shorter side
// symmetrically.
LetterboxResult LetterboxResize(const ImageRecord& record, int target = 1024);

enum class AugmentKind { kFlipH, kFlipV, kRotate, kTilt, kScale, kSkew };

// Angles in degrees. A missing parameter is drawn from the configured range.
struct AugmentOp {
  AugmentKind kind = AugmentKind::kFlipH;
  std::optional<double> param;
};

struct AugmentOptions {
  double max_rotate_deg = 15;
  double max_tilt_deg = 5;
  double max_skew = 0.15;
  double min_scale = 0.8;
  double max_scale = 1.2;
  // A transformed box whose clipped area falls below this fraction of its
  // unclipped hull is dropped.
  double min_retained_area = 0.25;
  Strictness strictness = Strictness::kLenient;
};

// Row-major 2x3 affine map in pixel coordinates.
struct Affine {
  double a = 1, b = 0, c = 0;
  double d = 0, e = 1, f = 0;

  std::pair<double, double> operator()(double x, double y) const {
    return {a * x + b * y + c, d * x + e * y + f};
  }
};

// The affine map for one op on a width x height canvas (about its center).
Affine AugmentAffine(AugmentKind kind, double param, int width, int height);

// Axis-aligned hull of the four mapped corners.
Box TransformedHull(const Box& box, const Affine& map);

AugmentOp ParseAugmentOp(std::string_view spec);

ImageRecord Augment(const ImageRecord& record, std::span<const AugmentOp> ops,
                    uint64_t seed, const AugmentOptions& options = {},
                    Warnings* warnings = nullptr);

// Re-expresses annotations in window coordinates. Boxes keeping less than
// min_retained_area of their area are dropped.
ImageRecord CropWindow(const ImageRecord& record, const Box& window,
                       double min_retained_area = 0.25,
                       Warnings* warnings = nullptr);

// Ground truth keyed by image id; images without boxes are kept as empty
// entries.
using GroundTruthMap = std::map<std::string, std::vector<LabeledBox>>;
GroundTruthMap ToGroundTruth(std::span<const ImageRecord> records);

// Reads canonical CSV or manifest lines, sniffed from the first non-blank
// character ('{' means manifest).
std::vector<ImageRecord> ParseGroundTruthText(std::string_view text);

}  // namespace detbench

#endif  // DETBENCH_DATASET_H_
