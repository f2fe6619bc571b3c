// SPDX-License-Identifier: Apache-2.0
// Model, training and inference settings plus the flat `key = value` config
// file format. A file may begin with `preset = paper` or `preset = tiny` and
// override individual keys afterwards.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cvtassd/ops.hpp"

namespace cvtassd {

struct StageConfig {
  ConvSpec embed;  // in_channels = previous stage dim (3 for the image)
  int num_blocks = 1;
  int heads = 1;
  int dim = 64;
  float mlp_ratio = 4.0f;
  int proj_kernel = 3;  // depthwise kernel of the q/k/v projection

  int head_dim() const { return dim / heads; }
  void validate() const;
};

enum class LevelSource { Stage1, Stage2, Stage3, Previous };

std::string_view level_source_name(LevelSource s);

/// One pyramid level. Stage-sourced levels apply a lateral conv; "previous"
/// levels are SSD-style extras: 1x1 reduce -> k x k strided conv.
struct PyramidLevelSpec {
  LevelSource source = LevelSource::Previous;
  int channels = 256;
  int lateral_kernel = 1;
  int mid_channels = 128;
  int extra_kernel = 3;
  int extra_stride = 2;
  int extra_padding = 1;
};

struct HeadConfig {
  std::vector<PyramidLevelSpec> levels;
  bool residual = true;
  bool attention = true;
  /// Attention Unit runs only on levels with at most this many positions.
  int attention_max_tokens = 1024;
};

struct AnchorLevel {
  std::vector<float> ratios;
  float min_size = 0.0f;  // input pixels
  float max_size = 0.0f;

  int boxes_per_location() const { return 2 + 2 * static_cast<int>(ratios.size()); }
};

struct ModelConfig {
  int input_size = 384;
  int num_classes = 20;
  std::array<StageConfig, 3> stages;
  HeadConfig head;
  std::vector<AnchorLevel> anchors;  // one per pyramid level
  float variance_center = 0.1f;
  float variance_size = 0.2f;
  uint64_t init_seed = 0;

  /// Fills derived embed channels and checks every invariant.
  void finalize();
  std::vector<int> anchors_per_location() const;
};

struct TrainConfig {
  float initial_lr = 1e-4f;
  int total_iters = 1000;
  float momentum = 0.9f;
  float weight_decay = 0.0f;
  float clip_norm = 0.05f;
  float loc_weight = 1.0f;
  int batch_size = 8;
  uint64_t seed = 0;
  float match_threshold = 0.5f;
  float neg_ratio = 3.0f;
  bool augment = true;
  int checkpoint_every = 0;  // 0: final checkpoint only

  void validate() const;
};

struct InferenceConfig {
  float conf_threshold = 0.01f;
  float nms_threshold = 0.5f;
  int top_k_per_class = 200;
  int top_k = 200;
};

struct Settings {
  ModelConfig model;
  TrainConfig train;
  InferenceConfig infer;
};

Settings paper_preset();
Settings tiny_preset();

Settings parse_config(std::string_view text);
Settings load_config(const std::filesystem::path& path);
std::string format_config(const Settings& settings);

}  // namespace cvtassd
