// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvtassd/box.hpp"
#include "cvtassd/inference.hpp"

namespace cvtassd {

struct EvalImage {
  std::string image_id;
  int width = 1;   // native annotation resolution, for size buckets
  int height = 1;
  std::vector<GroundTruthBox> gts;
};

struct EvalReport {
  std::vector<std::optional<double>> per_class_ap;  // undefined for classes without GTs
  double map = 0.0;
  bool coco = false;
  std::optional<double> ap_50_95, ap_50, ap_75, ap_small, ap_medium, ap_large;
};

enum class Interpolation { AllPoint, ElevenPoint };

/// Area under a precision/recall curve given per-detection TP flags sorted by
/// descending score.
double average_precision(std::span<const double> recall, std::span<const double> precision,
                         Interpolation mode = Interpolation::AllPoint);

struct AreaRange {
  double lo = 0.0;
  double hi = 1e300;
};

/// AP for one class at one IoU threshold; nullopt when the class has no
/// (non-ignored) ground truth. Difficult GTs, and GTs outside `area`, are ignored
/// for both matching and counting.
std::optional<double> class_ap(std::span<const ImageDetections> dets, std::span<const EvalImage> gts,
                               int class_id, double iou_threshold, const AreaRange& area = {},
                               Interpolation mode = Interpolation::AllPoint);

EvalReport voc_ap(std::span<const ImageDetections> dets, std::span<const EvalImage> gts,
                  int num_classes, double iou_threshold = 0.5,
                  Interpolation mode = Interpolation::AllPoint);

EvalReport coco_ap(std::span<const ImageDetections> dets, std::span<const EvalImage> gts,
                   int num_classes);

/// Aligned text table.
std::string format_report_table(const EvalReport& r, std::span<const std::string> class_names);
/// `key=value` lines, values x100 with one decimal, `nan` when undefined.
std::string format_report_kv(const EvalReport& r, std::span<const std::string> class_names);

}  // namespace cvtassd
