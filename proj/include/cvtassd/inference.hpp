// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cvtassd/anchors.hpp"
#include "cvtassd/config.hpp"
#include "cvtassd/head.hpp"

namespace cvtassd {

struct Detection {
  BoxCorner box;
  int class_id = 0;  // foreground class, 0-based
  float score = 0.0f;
};

/// Greedy NMS. Boxes with IoU strictly above the threshold to a kept box are
/// discarded. Equal scores keep the lower index first. Returns kept indices in
/// descending score order.
std::vector<size_t> nms(std::span<const BoxCorner> boxes, std::span<const float> scores,
                        double iou_threshold = 0.5);

/// loc (N, A, 4) and conf (N, A, K + 1) raw head outputs.
std::vector<std::vector<Detection>> decode_detections(const Tensor& loc, const Tensor& conf,
                                                      const AnchorSet& anchors,
                                                      const InferenceConfig& cfg,
                                                      const Variances& variances);

/// Runs the model on a (N, 3, R, R) batch without recording gradients.
std::vector<std::vector<Detection>> detect(const Detector& model, const AnchorSet& anchors,
                                           const Tensor& images, const InferenceConfig& cfg);
/// Single (3, H, W) image of any size; it is resized to the model resolution.
std::vector<Detection> detect_image(const Detector& model, const AnchorSet& anchors,
                                    const Tensor& image, const InferenceConfig& cfg);

struct ImageDetections {
  std::string image_id;
  std::vector<Detection> detections;
};

/// `image_id class_id score xmin ymin xmax ymax`, 6 decimals.
void write_detection_dump(std::ostream& out, std::span<const ImageDetections> dets);
std::vector<ImageDetections> read_detection_dump(std::istream& in);

}  // namespace cvtassd
