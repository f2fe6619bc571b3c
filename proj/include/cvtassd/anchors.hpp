// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cvtassd/box.hpp"
#include "cvtassd/config.hpp"

namespace cvtassd {

struct AnchorConfig {
  int input_size = 0;
  std::vector<int64_t> feature_sizes;  // square side per level
  std::vector<AnchorLevel> levels;
};

/// Derives feature sizes from the model configuration.
AnchorConfig anchor_config(const ModelConfig& cfg);

struct AnchorSet {
  std::vector<BoxCenter> boxes;
  std::vector<int64_t> level_counts;
  size_t size() const { return boxes.size(); }
};

/// Default boxes, level-major, row-major over positions, anchor-minor. Per
/// position: min square, sqrt(min*max) square, then (r, 1/r) pairs per ratio.
/// Boxes are clamped in center form to [0, 1].
AnchorSet generate_anchors(const AnchorConfig& cfg);

struct MatchResult {
  std::vector<int> matched_gt;  // -1 for background
  std::vector<int> labels;      // 0 background, class + 1 otherwise
  std::vector<Offsets> loc_targets;
  int num_positives = 0;
};

/// Two-step assignment. First a greedy bipartite pass: repeatedly take the
/// highest-IoU (ground truth, anchor) pair among unassigned ones and bind them,
/// so every ground truth gets its own anchor. Then every remaining anchor whose
/// best IoU reaches `threshold` is assigned to that ground truth. Ties favour
/// the lower ground-truth index, then the lower anchor index.
MatchResult match_anchors(std::span<const BoxCenter> anchors, std::span<const GroundTruthBox> gts,
                          double threshold, const Variances& variances);

/// Selects background anchors with the largest confidence loss, at most
/// ratio * num_positives of them (ratio itself when there are no positives).
/// Ties go to the lower anchor index. Returns a 0/1 mask over anchors.
std::vector<uint8_t> hard_negative_mine(std::span<const float> background_loss,
                                        std::span<const int> labels, int num_positives,
                                        double ratio);

}  // namespace cvtassd
