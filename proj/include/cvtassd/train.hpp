// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cvtassd/anchors.hpp"
#include "cvtassd/config.hpp"
#include "cvtassd/data.hpp"
#include "cvtassd/head.hpp"

namespace cvtassd {

struct TrainRecord {
  int64_t iter = 0;  // 0-based; lr = cosine_lr(iter)
  float loss = 0.0f;
  double lr = 0.0;
  double grad_scale = 1.0;
  double grad_norm = 0.0;     // before clipping
  double clipped_norm = 0.0;  // after clipping
};

/// `iter loss lr grad_scale`, 6 significant digits.
std::string format_log_line(const TrainRecord& r);

struct TrainHooks {
  std::function<void(const TrainRecord&)> on_record;
  /// Called after iteration `iter` (1-based count of completed steps) when a
  /// checkpoint is due, including after the final step.
  std::function<void(int64_t completed)> on_checkpoint;
};

struct Batch {
  Tensor images;  // (B, 3, R, R)
  std::vector<MatchResult> matches;
};

/// Resizes (and optionally augments) the samples and matches them to anchors.
Batch make_batch(const std::vector<const Sample*>& samples, const AnchorSet& anchors,
                 const ModelConfig& model, const TrainConfig& cfg, Rng* augment_rng);

/// SGD with cosine decay and global-norm clipping. Deterministic given the
/// config seed. Throws TrainingError on a non-finite loss.
std::vector<TrainRecord> train_loop(Detector& model, const std::vector<Sample>& dataset,
                                    const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace cvtassd
