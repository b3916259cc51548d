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

#include "detbench/geometry.h"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace detbench {
namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "CategoryI", "CategoryII", "CategoryIII",
    "CategoryIV", "DTI",       "Unstageable"};

std::string NormalizeName(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    if (c == ' ' || c == '_' || c == '-' || c == '\t') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::string_view ClassName(ClassId id) { return kClassNames[Index(id)]; }

std::optional<ClassId> TryParseClassName(std::string_view name) {
  const std::string normalized = NormalizeName(name);
  for (ClassId id : kAllClasses) {
    if (normalized == NormalizeName(ClassName(id))) return id;
  }
  return std::nullopt;
}

ClassId ParseClassName(std::string_view name) {
  if (auto id = TryParseClassName(name)) return *id;
  std::string valid;
  for (ClassId id : kAllClasses) {
    if (!valid.empty()) valid += ", ";
    valid += ClassName(id);
  }
  throw ParseError("unknown class name '" + std::string(name) +
                   "'; valid names are: " + valid);
}

double IntersectionArea(const Box& a, const Box& b) {
  const double w = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double h = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (w <= 0 || h <= 0) return 0.0;
  return w * h;
}

double Iou(const Box& a, const Box& b, Strictness strictness) {
  if (!a.IsValid() || !b.IsValid()) {
    if (strictness == Strictness::kStrict) {
      throw InvariantError("IoU of a degenerate box");
    }
    return 0.0;
  }
  const double inter = IntersectionArea(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.Area() + b.Area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BoxDelta EncodeDeltas(const Box& reference, const Box& target) {
  const double rw = reference.Width();
  const double rh = reference.Height();
  if (!(rw > 0) || !(rh > 0)) {
    throw InvalidArgument("delta encoding needs a reference with positive size");
  }
  if (!(target.Width() > 0) || !(target.Height() > 0)) {
    throw InvalidArgument("delta encoding needs a target with positive size");
  }
  return {(target.CenterX() - reference.CenterX()) / rw,
          (target.CenterY() - reference.CenterY()) / rh,
          std::log(target.Width() / rw), std::log(target.Height() / rh)};
}

Box DecodeDeltas(const Box& reference, const BoxDelta& delta,
                 Warnings* warnings) {
  const double rw = reference.Width();
  const double rh = reference.Height();
  if (!(rw > 0) || !(rh > 0)) {
    throw InvalidArgument("delta decoding needs a reference with positive size");
  }
  if (!delta.IsFinite()) throw InvalidArgument("non-finite box delta");
  double dw = delta.dw;
  double dh = delta.dh;
  if (dw > kMaxLogScale || dh > kMaxLogScale) {
    Warn(warnings, "box delta log-scale clamped to ln(1000/16)");
    dw = std::min(dw, kMaxLogScale);
    dh = std::min(dh, kMaxLogScale);
  }
  const double cx = reference.CenterX() + delta.dx * rw;
  const double cy = reference.CenterY() + delta.dy * rh;
  return Box::FromCenter(cx, cy, rw * std::exp(dw), rh * std::exp(dh));
}

Box ClipBox(const Box& box, double width, double height) {
  return {std::clamp(box.xmin, 0.0, width), std::clamp(box.ymin, 0.0, height),
          std::clamp(box.xmax, 0.0, width), std::clamp(box.ymax, 0.0, height)};
}

std::vector<size_t> NmsIndices(std::span<const Detection> detections,
                               double iou_threshold, bool class_wise) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw InvalidArgument("NMS threshold must lie in (0, 1)");
  }
  for (const Detection& d : detections) {
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw InvalidArgument("detection confidence outside [0, 1]");
    }
  }
  std::vector<size_t> order(detections.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::vector<size_t> kept;
  std::vector<bool> suppressed(detections.size(), false);
  for (size_t i = 0; i < order.size(); ++i) {
    const size_t cur = order[i];
    if (suppressed[cur]) continue;
    kept.push_back(cur);
    for (size_t j = i + 1; j < order.size(); ++j) {
      const size_t other = order[j];
      if (suppressed[other]) continue;
      if (class_wise &&
          detections[other].class_id != detections[cur].class_id) {
        continue;
      }
      if (Iou(detections[cur].box, detections[other].box) > iou_threshold) {
        suppressed[other] = true;
      }
    }
  }
  return kept;
}

std::vector<Detection> Nms(std::span<const Detection> detections,
                           double iou_threshold, bool class_wise) {
  std::vector<Detection> out;
  for (size_t i : NmsIndices(detections, iou_threshold, class_wise)) {
    out.push_back(detections[i]);
  }
  return out;
}

}  // namespace detbench
