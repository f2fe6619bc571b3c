// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/box.hpp"

#include <algorithm>
#include <cmath>

#include "cvtassd/errors.hpp"

namespace cvtassd {

float BoxCorner::area() const {
  return std::max(0.0f, xmax - xmin) * std::max(0.0f, ymax - ymin);
}

BoxCenter to_center(const BoxCorner& b) {
  return {(b.xmin + b.xmax) * 0.5f, (b.ymin + b.ymax) * 0.5f, b.xmax - b.xmin, b.ymax - b.ymin};
}

BoxCorner to_corner(const BoxCenter& b) {
  return {b.cx - b.w * 0.5f, b.cy - b.h * 0.5f, b.cx + b.w * 0.5f, b.cy + b.h * 0.5f};
}

BoxCorner clip_unit(const BoxCorner& b) {
  auto c = [](float v) { return std::clamp(v, 0.0f, 1.0f); };
  return {c(b.xmin), c(b.ymin), c(b.xmax), c(b.ymax)};
}

double iou(const BoxCorner& a, const BoxCorner& b) {
  const double iw = std::min<double>(a.xmax, b.xmax) - std::max<double>(a.xmin, b.xmin);
  const double ih = std::min<double>(a.ymax, b.ymax) - std::max<double>(a.ymin, b.ymin);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double area_a = std::max(0.0, double(a.xmax) - a.xmin) * std::max(0.0, double(a.ymax) - a.ymin);
  const double area_b = std::max(0.0, double(b.xmax) - b.xmin) * std::max(0.0, double(b.ymax) - b.ymin);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Offsets encode(const BoxCenter& gt, const BoxCenter& anchor, const Variances& v) {
  if (!(anchor.w > 0.0f) || !(anchor.h > 0.0f)) {
    throw DataError("encode: anchor width/height must be positive");
  }
  if (!(gt.w > 0.0f) || !(gt.h > 0.0f)) {
    throw DataError("encode: ground-truth width/height must be positive");
  }
  return {(gt.cx - anchor.cx) / (anchor.w * v.center), (gt.cy - anchor.cy) / (anchor.h * v.center),
          std::log(gt.w / anchor.w) / v.size, std::log(gt.h / anchor.h) / v.size};
}

BoxCenter decode_center(std::span<const float, 4> o, const BoxCenter& anchor, const Variances& v) {
  return {anchor.cx + o[0] * v.center * anchor.w, anchor.cy + o[1] * v.center * anchor.h,
          anchor.w * std::exp(o[2] * v.size), anchor.h * std::exp(o[3] * v.size)};
}

BoxCorner decode(std::span<const float, 4> offsets, const BoxCenter& anchor, const Variances& v) {
  return clip_unit(to_corner(decode_center(offsets, anchor, v)));
}

}  // namespace cvtassd
