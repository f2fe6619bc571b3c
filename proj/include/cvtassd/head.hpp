// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "cvtassd/backbone.hpp"
#include "cvtassd/config.hpp"
#include "cvtassd/nn.hpp"

namespace cvtassd {

/// y = F(x) + x with F = conv3x3 -> BN -> ReLU -> conv3x3 -> BN.
struct ResidualBlock {
  Conv2d conv1;
  BatchNorm2d bn1;
  Conv2d conv2;
  BatchNorm2d bn2;

  ResidualBlock() = default;
  ResidualBlock(int channels, Rng& rng);
  Tensor forward(const Tensor& x, bool training) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Non-local attention over all positions of one feature map:
///   a = query(x) key(x)^T, a_bar = row-softmax(a), out = x + a_bar value(x).
struct AttentionUnit {
  Linear query;  // C -> max(1, C / 8)
  Linear key;
  Linear value;  // C -> C
  int max_tokens = 1024;

  AttentionUnit() = default;
  AttentionUnit(int channels, int max_tokens, Rng& rng);
  /// Identity when H * W exceeds max_tokens.
  Tensor forward(const Tensor& x) const;
  /// Row-softmaxed scores (N, HW, HW) for inspection.
  Tensor attention(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// SSD-style extra layer: 1x1 reduce -> BN -> ReLU -> k x k strided -> BN -> ReLU.
struct ExtraLayer {
  Conv2d conv1;
  BatchNorm2d bn1;
  Conv2d conv2;
  BatchNorm2d bn2;

  Tensor forward(const Tensor& x, bool training) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LevelShape {
  int64_t size;  // square spatial side
  int64_t channels;
};

/// Pyramid level shapes for a square input, derived from the configuration.
std::vector<LevelShape> pyramid_shapes(const ModelConfig& cfg, int64_t input);

using FeaturePyramid = std::vector<Tensor>;

struct HeadOutput {
  Tensor loc;   // (N, A, 4)
  Tensor conf;  // (N, A, num_classes + 1)
};

class DetectionHead {
 public:
  DetectionHead() = default;
  DetectionHead(const ModelConfig& cfg, Rng& rng);

  /// Residual block on stage 3, lateral convs and extras. Attention is not
  /// applied here.
  FeaturePyramid build_pyramid(const BackboneOutput& backbone, bool training) const;
  /// Attention unit per level (where present), then loc/conf predictors.
  HeadOutput predict(const FeaturePyramid& pyramid) const;

  void collect(ParamList& out) const;

  const ResidualBlock& residual() const { return residual_; }
  ResidualBlock& residual() { return residual_; }
  const std::vector<std::optional<AttentionUnit>>& attention_units() const { return au_; }
  std::vector<std::optional<AttentionUnit>>& attention_units() { return au_; }

 private:
  ModelConfig cfg_;
  ResidualBlock residual_;
  std::vector<std::optional<Conv2d>> lateral_;
  std::vector<std::optional<ExtraLayer>> extra_;
  std::vector<std::optional<AttentionUnit>> au_;
  std::vector<Conv2d> pred_loc_;
  std::vector<Conv2d> pred_conf_;
};

/// Flattens per-level predictor maps (N, a*k, H, W) into (N, sum H*W*a, k),
/// level-major, row-major, anchor-minor.
Tensor flatten_predictions(const std::vector<Tensor>& maps, const std::vector<int>& anchors_per_loc,
                           int64_t values_per_anchor);

/// Full backbone + head.
class Detector {
 public:
  explicit Detector(ModelConfig cfg);

  HeadOutput forward(const Tensor& images, bool training = false) const;
  FeaturePyramid pyramid(const Tensor& images, bool training = false) const;

  /// Every named tensor in canonical order; buffers flagged non-trainable.
  ParamList parameters() const;

  const ModelConfig& config() const { return cfg_; }
  Backbone& backbone() { return backbone_; }
  const Backbone& backbone() const { return backbone_; }
  DetectionHead& head() { return head_; }
  const DetectionHead& head() const { return head_; }

 private:
  ModelConfig cfg_;
  Backbone backbone_;
  DetectionHead head_;
};

}  // namespace cvtassd
