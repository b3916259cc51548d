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

// Axis-aligned box arithmetic shared by every other module: the six
// pressure-ulcer categories, IoU, R-CNN delta encoding, clipping and greedy
// non-maximum suppression.

#ifndef DETBENCH_GEOMETRY_H_
#define DETBENCH_GEOMETRY_H_

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detbench/status.h"

namespace detbench {

// Declaration order is the histogram order (I, II, III, IV, DTI,
// Unstageable); per-class report tables use kTableOrder instead.
enum class ClassId : int {
  kCategoryI = 0,
  kCategoryII,
  kCategoryIII,
  kCategoryIV,
  kDti,
  kUnstageable,
};

inline constexpr int kNumClasses = 6;

inline constexpr std::array<ClassId, kNumClasses> kAllClasses = {
    ClassId::kCategoryI,  ClassId::kCategoryII, ClassId::kCategoryIII,
    ClassId::kCategoryIV, ClassId::kDti,        ClassId::kUnstageable};

inline constexpr std::array<ClassId, kNumClasses> kTableOrder = {
    ClassId::kCategoryI,  ClassId::kCategoryII,  ClassId::kCategoryIII,
    ClassId::kCategoryIV, ClassId::kUnstageable, ClassId::kDti};

inline constexpr int Index(ClassId id) { return static_cast<int>(id); }

// Canonical spelling, e.g. "CategoryII", "DTI".
std::string_view ClassName(ClassId id);

// Case-insensitive; spaces, '_' and '-' are ignored so "category ii" and
// "Category_II" both resolve. Throws a parse Error listing valid names.
ClassId ParseClassName(std::string_view name);

std::optional<ClassId> TryParseClassName(std::string_view name);

// Corner-form rectangle in continuous pixel coordinates.
struct Box {
  double xmin = 0;
  double ymin = 0;
  double xmax = 0;
  double ymax = 0;

  double Width() const { return xmax - xmin; }
  double Height() const { return ymax - ymin; }
  double Area() const { return Width() * Height(); }
  double CenterX() const { return xmin + 0.5 * Width(); }
  double CenterY() const { return ymin + 0.5 * Height(); }

  bool IsFinite() const {
    return std::isfinite(xmin) && std::isfinite(ymin) &&
           std::isfinite(xmax) && std::isfinite(ymax);
  }
  // Finite with strictly positive width and height.
  bool IsValid() const { return IsFinite() && xmin < xmax && ymin < ymax; }

  static Box FromCenter(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

struct BoxDelta {
  double dx = 0;
  double dy = 0;
  double dw = 0;
  double dh = 0;

  bool IsFinite() const {
    return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dw) &&
           std::isfinite(dh);
  }
  friend bool operator==(const BoxDelta&, const BoxDelta&) = default;
};

struct LabeledBox {
  Box box;
  ClassId class_id = ClassId::kCategoryI;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

struct Detection {
  Box box;
  ClassId class_id = ClassId::kCategoryI;
  double confidence = 0;
  std::string image_id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

double IntersectionArea(const Box& a, const Box& b);

// Intersection over union. Degenerate (zero or negative area) operands give
// 0; in strict mode they throw an invariant Error instead.
double Iou(const Box& a, const Box& b,
           Strictness strictness = Strictness::kLenient);

// Upper bound applied to dw/dh before exponentiation.
inline const double kMaxLogScale = std::log(1000.0 / 16.0);

// Standard R-CNN parameterization on center/size form:
// dx = (tx - rx) / rw, dy = (ty - ry) / rh, dw = ln(tw / rw), dh = ln(th / rh).
BoxDelta EncodeDeltas(const Box& reference, const Box& target);

// Inverse of EncodeDeltas. dw/dh above kMaxLogScale are clamped and a
// warning is recorded.
Box DecodeDeltas(const Box& reference, const BoxDelta& delta,
                 Warnings* warnings = nullptr);

Box ClipBox(const Box& box, double width, double height);

// Greedy suppression in descending confidence; equal confidences keep input
// order. With class_wise set, boxes only suppress others of the same class.
// Output is sorted by confidence (stable).
std::vector<Detection> Nms(std::span<const Detection> detections,
                           double iou_threshold, bool class_wise);

// Same as Nms but returns indices into the input.
std::vector<size_t> NmsIndices(std::span<const Detection> detections,
                               double iou_threshold, bool class_wise);

}  // namespace detbench

#endif  // DETBENCH_GEOMETRY_H_
