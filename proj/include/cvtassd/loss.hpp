// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "cvtassd/anchors.hpp"
#include "cvtassd/tensor.hpp"

namespace cvtassd {

struct MultiboxLoss {
  Tensor total;          // (L_conf + alpha * L_loc) / N_pos, shape (1)
  float conf = 0.0f;     // L_conf / N_pos
  float loc = 0.0f;      // L_loc / N_pos
  int num_positives = 0;
  int num_negatives = 0;
};

/// loc_pred (N, A, 4), conf_pred (N, A, K + 1), one match per image. Hard
/// negatives are mined per image on the background cross-entropy; N_pos counts
/// positives over the whole batch with a floor of 1.
MultiboxLoss multibox_loss(const Tensor& loc_pred, const Tensor& conf_pred,
                           std::span<const MatchResult> matches, double mine_ratio,
                           float loc_weight = 1.0f);

/// -log softmax(row)[0] for every row of (..., C) logits.
std::vector<float> background_loss(const Tensor& conf_pred);

}  // namespace cvtassd
