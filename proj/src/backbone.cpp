// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/backbone.hpp"

#include <cmath>

#include "cvtassd/errors.hpp"

namespace cvtassd {

Tensor grid_to_tokens(const Tensor& x) {
  if (x.rank() != 4) throw DimensionError("grid_to_tokens: expects (N, D, H, W)");
  const Tensor flat = reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)});
  return permute(flat, {0, 2, 1});
}

Tensor tokens_to_grid(const Tensor& tokens, int64_t height, int64_t width) {
  if (tokens.rank() != 3) throw DimensionError("tokens_to_grid: expects (N, T, D)");
  if (tokens.dim(1) != height * width) {
    throw DimensionError("token count " + std::to_string(tokens.dim(1)) + " != grid " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  const Tensor chw = permute(tokens, {0, 2, 1});
  return reshape(chw, {tokens.dim(0), tokens.dim(2), height, width});
}

ConvTokenEmbed::ConvTokenEmbed(const StageConfig& cfg, Rng& rng)
    : conv(cfg.embed, true, rng), norm(cfg.dim) {}

TokenGrid ConvTokenEmbed::forward(const Tensor& x) const {
  const Tensor y = conv.forward(x);
  return {norm.forward(grid_to_tokens(y)), y.dim(2), y.dim(3)};
}

void ConvTokenEmbed::collect(const std::string& prefix, ParamList& out) const {
  conv.collect(prefix + ".conv", out);
  norm.collect(prefix + ".norm", out);
}

SeparableProjection::SeparableProjection(int dim, int kernel, Rng& rng) {
  spec = ConvSpec::square(dim, dim, kernel, 1, kernel / 2, dim);
  depthwise = Tensor::zeros({dim, 1, kernel, kernel});
  xavier_uniform(depthwise, kernel * kernel, kernel * kernel, rng);
  pointwise = Tensor::zeros({dim, dim, 1, 1});
  xavier_uniform(pointwise, dim, dim, rng);
  bias = Tensor::zeros({dim});
  depthwise.set_requires_grad();
  pointwise.set_requires_grad();
  bias.set_requires_grad();
}

Tensor SeparableProjection::forward(const Tensor& grid) const {
  return separable_conv2d(grid, spec, depthwise, pointwise, bias);
}

void SeparableProjection::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".depthwise.weight", depthwise, true});
  out.push_back({prefix + ".pointwise.weight", pointwise, true});
  out.push_back({prefix + ".pointwise.bias", bias, true});
}

ConvProjection::ConvProjection(int dim, int kernel, Rng& rng)
    : q(dim, kernel, rng), k(dim, kernel, rng), v(dim, kernel, rng) {}

QKV ConvProjection::forward(const Tensor& tokens, int64_t height, int64_t width) const {
  if (tokens.rank() != 3 || tokens.dim(1) != height * width) {
    throw DimensionError("conv_projection: token count does not match grid " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  const Tensor grid = tokens_to_grid(tokens, height, width);
  return {grid_to_tokens(q.forward(grid)), grid_to_tokens(k.forward(grid)),
          grid_to_tokens(v.forward(grid))};
}

void ConvProjection::collect(const std::string& prefix, ParamList& out) const {
  q.collect(prefix + ".proj_q", out);
  k.collect(prefix + ".proj_k", out);
  v.collect(prefix + ".proj_v", out);
}

namespace {

// (N, T, D) -> (N * heads, T, D / heads)
Tensor split_heads(const Tensor& x, int heads) {
  const int64_t n = x.dim(0), t = x.dim(1), d = x.dim(2);
  const Tensor r = reshape(x, {n, t, heads, d / heads});
  return reshape(permute(r, {0, 2, 1, 3}), {n * heads, t, d / heads});
}

Tensor merge_heads(const Tensor& x, int64_t n, int heads) {
  const int64_t t = x.dim(1), dh = x.dim(2);
  const Tensor r = reshape(x, {n, heads, t, dh});
  return reshape(permute(r, {0, 2, 1, 3}), {n, t, heads * dh});
}

void check_heads(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("mhsa: q, k, v must share shape (N, T, D)");
  }
  if (heads < 1 || q.dim(2) % heads != 0) {
    throw ConfigError("mhsa: dim " + std::to_string(q.dim(2)) + " not divisible by heads " +
                      std::to_string(heads));
  }
}

}  // namespace

Tensor attention_weights(const Tensor& q, const Tensor& k, int heads) {
  check_heads(q, k, k, heads);
  const float inv = 1.0f / std::sqrt(static_cast<float>(q.dim(2) / heads));
  const Tensor scores = matmul(split_heads(q, heads), split_heads(k, heads), false, true);
  return softmax(scale(scores, inv), -1);
}

Tensor attention_heads(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
  check_heads(q, k, v, heads);
  const Tensor weights = attention_weights(q, k, heads);
  return merge_heads(matmul(weights, split_heads(v, heads)), q.dim(0), heads);
}

Tensor mhsa(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const Linear& out) {
  return out.forward(attention_heads(q, k, v, heads));
}

TransformerBlock::TransformerBlock(const StageConfig& cfg, Rng& rng)
    : heads(cfg.heads),
      norm1(cfg.dim),
      proj(cfg.dim, cfg.proj_kernel, rng),
      out(cfg.dim, cfg.dim, true, rng),
      norm2(cfg.dim) {
  const auto hidden = static_cast<int64_t>(std::lround(cfg.mlp_ratio * cfg.dim));
  fc1 = Linear(cfg.dim, hidden, true, rng);
  fc2 = Linear(hidden, cfg.dim, true, rng);
}

Tensor TransformerBlock::forward(const Tensor& tokens, int64_t height, int64_t width) const {
  const QKV qkv = proj.forward(norm1.forward(tokens), height, width);
  const Tensor x = add(tokens, mhsa(qkv.q, qkv.k, qkv.v, heads, out));
  return add(x, fc2.forward(gelu(fc1.forward(norm2.forward(x)))));
}

void TransformerBlock::collect(const std::string& prefix, ParamList& o) const {
  norm1.collect(prefix + ".norm1", o);
  proj.collect(prefix + ".attn", o);
  out.collect(prefix + ".attn.out", o);
  norm2.collect(prefix + ".norm2", o);
  fc1.collect(prefix + ".mlp.fc1", o);
  fc2.collect(prefix + ".mlp.fc2", o);
}

Backbone::Backbone(const std::array<StageConfig, 3>& cfgs, Rng& rng) : cfgs_(cfgs) {
  for (size_t i = 0; i < 3; ++i) {
    cfgs_[i].validate();
    stages_[i].embed = ConvTokenEmbed(cfgs_[i], rng);
    for (int b = 0; b < cfgs_[i].num_blocks; ++b) stages_[i].blocks.emplace_back(cfgs_[i], rng);
  }
}

BackboneOutput Backbone::forward(const Tensor& image) const {
  BackboneOutput out;
  Tensor x = image;
  for (size_t i = 0; i < 3; ++i) {
    TokenGrid g = stages_[i].embed.forward(x);
    Tensor tokens = g.tokens;
    for (const auto& block : stages_[i].blocks) tokens = block.forward(tokens, g.height, g.width);
    x = tokens_to_grid(tokens, g.height, g.width);
    out.stage_features[i] = x;
  }
  return out;
}

void Backbone::collect(ParamList& out) const {
  for (size_t i = 0; i < 3; ++i) {
    const std::string prefix = "stage" + std::to_string(i + 1);
    stages_[i].embed.collect(prefix + ".embed", out);
    for (size_t b = 0; b < stages_[i].blocks.size(); ++b) {
      stages_[i].blocks[b].collect(prefix + ".block" + std::to_string(b + 1), out);
    }
  }
}

std::array<int64_t, 3> stage_grid_sizes(const std::array<StageConfig, 3>& cfgs, int64_t input) {
  std::array<int64_t, 3> sizes{};
  int64_t s = input;
  for (size_t i = 0; i < 3; ++i) {
    const ConvSpec& e = cfgs[i].embed;
    s = conv_output_size(s, e.kernel_h, e.stride_h, e.pad_h);
    sizes[i] = s;
  }
  return sizes;
}

}  // namespace cvtassd
