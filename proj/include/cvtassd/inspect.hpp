// SPDX-License-Identifier: Apache-2.0
// Analytic per-layer shapes, parameter counts and multiply-accumulates.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cvtassd/config.hpp"
#include "cvtassd/head.hpp"
#include "cvtassd/tensor.hpp"

namespace cvtassd {

struct LayerInfo {
  std::string name;
  Shape output;        // per image: (C, H, W) for grids, (T, D) for tokens
  int64_t params = 0;  // trainable only
  int64_t macs = 0;    // forward, batch of one
};

struct InspectReport {
  int64_t input_size = 0;
  std::vector<LayerInfo> layers;
  std::vector<LevelShape> pyramid;
  std::vector<int64_t> grids;  // stage grid sides
  int64_t num_anchors = 0;
  int64_t total_params = 0;
  int64_t total_macs = 0;

  /// Sums over layers whose name starts with `prefix`.
  int64_t params_under(std::string_view prefix) const;
  int64_t macs_under(std::string_view prefix) const;
  /// MACs of the attention cores (q k^T and a v) of one stage (1-based).
  int64_t stage_attention_macs(int stage) const;
};

/// `input_size` 0 means the configured resolution. The layer set is the one
/// built for the configured resolution; attention units whose level exceeds
/// the token limit at `input_size` contribute no MACs.
InspectReport inspect_model(const ModelConfig& cfg, int64_t input_size = 0);

std::string format_inspect(const InspectReport& r);

}  // namespace cvtassd
