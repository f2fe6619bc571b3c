// SPDX-License-Identifier: Apache-2.0
// Box geometry in coordinates normalized to [0, 1] of the input resolution.
#pragma once

#include <array>
#include <span>

namespace cvtassd {

struct BoxCorner {
  float xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  float area() const;
  bool operator==(const BoxCorner&) const = default;
};

struct BoxCenter {
  float cx = 0, cy = 0, w = 0, h = 0;
  bool operator==(const BoxCenter&) const = default;
};

BoxCenter to_center(const BoxCorner& b);
BoxCorner to_corner(const BoxCenter& b);
BoxCorner clip_unit(const BoxCorner& b);

/// Intersection over union; 0 when the union is empty.
double iou(const BoxCorner& a, const BoxCorner& b);

struct Variances {
  float center = 0.1f;
  float size = 0.2f;
};

using Offsets = std::array<float, 4>;

/// SSD offset encoding of a ground-truth box relative to an anchor.
/// Throws DataError for non-positive ground-truth or anchor sizes.
Offsets encode(const BoxCenter& gt, const BoxCenter& anchor, const Variances& v);

/// Inverse of encode, returned in corner form and clipped to the unit square.
BoxCorner decode(std::span<const float, 4> offsets, const BoxCenter& anchor, const Variances& v);
/// Inverse of encode without clipping.
BoxCenter decode_center(std::span<const float, 4> offsets, const BoxCenter& anchor,
                        const Variances& v);

struct GroundTruthBox {
  BoxCorner box;
  int label = 0;  // foreground class id, 0-based
  bool difficult = false;
};

}  // namespace cvtassd
