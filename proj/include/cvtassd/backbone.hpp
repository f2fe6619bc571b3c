// SPDX-License-Identifier: Apache-2.0
// Three-stage convolutional vision transformer. Tokens carry no positional
// embedding; spatial structure enters only through the strided token-embed
// convolutions and the depthwise q/k/v projections.
#pragma once

#include <array>
#include <vector>

#include "cvtassd/config.hpp"
#include "cvtassd/nn.hpp"

namespace cvtassd {

struct TokenGrid {
  Tensor tokens;  // (N, H*W, D)
  int64_t height = 0;
  int64_t width = 0;
};

/// (N, D, H, W) -> (N, H*W, D), row-major over positions.
Tensor grid_to_tokens(const Tensor& x);
/// (N, H*W, D) -> (N, D, H, W).
Tensor tokens_to_grid(const Tensor& tokens, int64_t height, int64_t width);

/// Strided conv, flatten to tokens, layer norm.
struct ConvTokenEmbed {
  Conv2d conv;
  LayerNorm norm;

  ConvTokenEmbed() = default;
  ConvTokenEmbed(const StageConfig& cfg, Rng& rng);
  TokenGrid forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Depthwise k x k (stride 1, size-preserving) then pointwise 1x1 with bias.
struct SeparableProjection {
  ConvSpec spec;
  Tensor depthwise;  // (D, 1, k, k)
  Tensor pointwise;  // (D, D, 1, 1)
  Tensor bias;       // (D)

  SeparableProjection() = default;
  SeparableProjection(int dim, int kernel, Rng& rng);
  Tensor forward(const Tensor& grid) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct QKV {
  Tensor q, k, v;  // each (N, T, D)
};

struct ConvProjection {
  SeparableProjection q, k, v;

  ConvProjection() = default;
  ConvProjection(int dim, int kernel, Rng& rng);
  /// Throws DimensionError when T != height * width.
  QKV forward(const Tensor& tokens, int64_t height, int64_t width) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// softmax(q_h k_h^T / sqrt(D_h)) per head, shape (N * heads, T, T).
Tensor attention_weights(const Tensor& q, const Tensor& k, int heads);

/// Heads of scaled dot-product attention, concatenated back to (N, T, D)
/// without the output projection.
Tensor attention_heads(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

/// Multi-head self-attention with output projection.
Tensor mhsa(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const Linear& out);

struct TransformerBlock {
  int heads = 1;
  LayerNorm norm1;
  ConvProjection proj;
  Linear out;
  LayerNorm norm2;
  Linear fc1;
  Linear fc2;

  TransformerBlock() = default;
  TransformerBlock(const StageConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& tokens, int64_t height, int64_t width) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Stage {
  ConvTokenEmbed embed;
  std::vector<TransformerBlock> blocks;
};

struct BackboneOutput {
  std::array<Tensor, 3> stage_features;  // (N, D_i, H_i, W_i)
};

class Backbone {
 public:
  Backbone() = default;
  Backbone(const std::array<StageConfig, 3>& cfgs, Rng& rng);

  BackboneOutput forward(const Tensor& image) const;
  void collect(ParamList& out) const;

  const std::array<Stage, 3>& stages() const { return stages_; }
  std::array<Stage, 3>& stages() { return stages_; }

 private:
  std::array<StageConfig, 3> cfgs_;
  std::array<Stage, 3> stages_;
};

/// Spatial grid of each stage for a square input, following the embed chain.
std::array<int64_t, 3> stage_grid_sizes(const std::array<StageConfig, 3>& cfgs, int64_t input);

}  // namespace cvtassd
