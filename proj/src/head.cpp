// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/head.hpp"

#include <algorithm>

#include "cvtassd/errors.hpp"

namespace cvtassd {

ResidualBlock::ResidualBlock(int channels, Rng& rng)
    : conv1(ConvSpec::square(channels, channels, 3, 1, 1), false, rng),
      bn1(channels),
      conv2(ConvSpec::square(channels, channels, 3, 1, 1), false, rng),
      bn2(channels) {}

Tensor ResidualBlock::forward(const Tensor& x, bool training) const {
  const Tensor f = bn2.forward(conv2.forward(relu(bn1.forward(conv1.forward(x), training))),
                               training);
  return add(f, x);
}

void ResidualBlock::collect(const std::string& prefix, ParamList& out) const {
  conv1.collect(prefix + ".conv1", out);
  bn1.collect(prefix + ".bn1", out);
  conv2.collect(prefix + ".conv2", out);
  bn2.collect(prefix + ".bn2", out);
}

AttentionUnit::AttentionUnit(int channels, int max_tok, Rng& rng)
    : query(channels, std::max(1, channels / 8), true, rng),
      key(channels, std::max(1, channels / 8), true, rng),
      value(channels, channels, true, rng),
      max_tokens(max_tok) {}

Tensor AttentionUnit::attention(const Tensor& x) const {
  const Tensor tokens = grid_to_tokens(x);
  const Tensor scores = matmul(query.forward(tokens), key.forward(tokens), false, true);
  return softmax(scores, -1);
}

Tensor AttentionUnit::forward(const Tensor& x) const {
  if (x.dim(2) * x.dim(3) > max_tokens) return x;
  const Tensor tokens = grid_to_tokens(x);
  const Tensor scores = matmul(query.forward(tokens), key.forward(tokens), false, true);
  const Tensor context = matmul(softmax(scores, -1), value.forward(tokens));
  return tokens_to_grid(add(tokens, context), x.dim(2), x.dim(3));
}

void AttentionUnit::collect(const std::string& prefix, ParamList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
}

Tensor ExtraLayer::forward(const Tensor& x, bool training) const {
  const Tensor mid = relu(bn1.forward(conv1.forward(x), training));
  return relu(bn2.forward(conv2.forward(mid), training));
}

void ExtraLayer::collect(const std::string& prefix, ParamList& out) const {
  conv1.collect(prefix + ".conv1", out);
  bn1.collect(prefix + ".bn1", out);
  conv2.collect(prefix + ".conv2", out);
  bn2.collect(prefix + ".bn2", out);
}

std::vector<LevelShape> pyramid_shapes(const ModelConfig& cfg, int64_t input) {
  const auto grids = stage_grid_sizes(cfg.stages, input);
  std::vector<LevelShape> out;
  for (const auto& l : cfg.head.levels) {
    int64_t size = 0;
    switch (l.source) {
      case LevelSource::Stage1: size = grids[0]; break;
      case LevelSource::Stage2: size = grids[1]; break;
      case LevelSource::Stage3: size = grids[2]; break;
      case LevelSource::Previous:
        if (out.empty()) throw ConfigError("first pyramid level has no previous level");
        size = conv_output_size(out.back().size, l.extra_kernel, l.extra_stride, l.extra_padding);
        break;
    }
    out.push_back({size, l.channels});
  }
  return out;
}

namespace {

int stage_index(LevelSource s) {
  switch (s) {
    case LevelSource::Stage1: return 0;
    case LevelSource::Stage2: return 1;
    case LevelSource::Stage3: return 2;
    case LevelSource::Previous: return -1;
  }
  return -1;
}

}  // namespace

DetectionHead::DetectionHead(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  const auto shapes = pyramid_shapes(cfg, cfg.input_size);
  const bool uses_stage3 =
      std::any_of(cfg.head.levels.begin(), cfg.head.levels.end(),
                  [](const PyramidLevelSpec& l) { return l.source == LevelSource::Stage3; });
  if (cfg.head.residual && uses_stage3) residual_ = ResidualBlock(cfg.stages[2].dim, rng);

  const auto apl = cfg.anchors_per_location();
  const int classes = cfg.num_classes + 1;
  int prev_channels = 0;
  for (size_t l = 0; l < cfg.head.levels.size(); ++l) {
    const auto& spec = cfg.head.levels[l];
    const int si = stage_index(spec.source);
    if (si >= 0) {
      const int in = cfg.stages[static_cast<size_t>(si)].dim;
      const int k = spec.lateral_kernel;
      lateral_.emplace_back(Conv2d(ConvSpec::square(in, spec.channels, k, 1, k / 2), true, rng));
      extra_.emplace_back();
    } else {
      ExtraLayer e;
      e.conv1 = Conv2d(ConvSpec::square(prev_channels, spec.mid_channels, 1), false, rng);
      e.bn1 = BatchNorm2d(spec.mid_channels);
      e.conv2 = Conv2d(ConvSpec::square(spec.mid_channels, spec.channels, spec.extra_kernel,
                                        spec.extra_stride, spec.extra_padding),
                       false, rng);
      e.bn2 = BatchNorm2d(spec.channels);
      lateral_.emplace_back();
      extra_.emplace_back(std::move(e));
    }
    const int64_t positions = shapes[l].size * shapes[l].size;
    if (cfg.head.attention && positions <= cfg.head.attention_max_tokens) {
      au_.emplace_back(AttentionUnit(spec.channels, cfg.head.attention_max_tokens, rng));
    } else {
      au_.emplace_back();
    }
    pred_loc_.emplace_back(ConvSpec::square(spec.channels, apl[l] * 4, 3, 1, 1), true, rng);
    pred_conf_.emplace_back(ConvSpec::square(spec.channels, apl[l] * classes, 3, 1, 1), true, rng);
    prev_channels = spec.channels;
  }
}

FeaturePyramid DetectionHead::build_pyramid(const BackboneOutput& backbone, bool training) const {
  for (size_t i = 0; i < 3; ++i) {
    const Tensor& f = backbone.stage_features[i];
    if (!f.defined() || f.rank() != 4 || f.dim(1) != cfg_.stages[i].dim) {
      throw ConfigError("build_pyramid: stage " + std::to_string(i + 1) +
                        " feature does not match the configured dim " +
                        std::to_string(cfg_.stages[i].dim));
    }
  }
  Tensor stage3 = backbone.stage_features[2];
  if (residual_.conv1.weight.defined()) stage3 = residual_.forward(stage3, training);

  FeaturePyramid out;
  for (size_t l = 0; l < cfg_.head.levels.size(); ++l) {
    const int si = stage_index(cfg_.head.levels[l].source);
    if (si >= 0) {
      const Tensor& src = si == 2 ? stage3 : backbone.stage_features[static_cast<size_t>(si)];
      out.push_back(relu(lateral_[l]->forward(src)));
    } else {
      out.push_back(extra_[l]->forward(out.back(), training));
    }
  }
  return out;
}

Tensor flatten_predictions(const std::vector<Tensor>& maps, const std::vector<int>& anchors_per_loc,
                           int64_t values_per_anchor) {
  if (maps.size() != anchors_per_loc.size()) {
    throw ConfigError("predict_heads: " + std::to_string(anchors_per_loc.size()) +
                      " anchor counts for " + std::to_string(maps.size()) + " pyramid levels");
  }
  std::vector<Tensor> flat;
  for (size_t l = 0; l < maps.size(); ++l) {
    const Tensor& m = maps[l];
    if (m.dim(1) != anchors_per_loc[l] * values_per_anchor) {
      throw DimensionError("predict_heads: level " + std::to_string(l + 1) + " has " +
                           std::to_string(m.dim(1)) + " channels, expected " +
                           std::to_string(anchors_per_loc[l] * values_per_anchor));
    }
    const int64_t n = m.dim(0), h = m.dim(2), w = m.dim(3);
    const Tensor nhwc = permute(m, {0, 2, 3, 1});
    flat.push_back(reshape(nhwc, {n, h * w * anchors_per_loc[l], values_per_anchor}));
  }
  return concat(flat, 1);
}

HeadOutput DetectionHead::predict(const FeaturePyramid& pyramid) const {
  if (pyramid.size() != pred_loc_.size()) {
    throw ConfigError("predict_heads: pyramid has " + std::to_string(pyramid.size()) +
                      " levels, head expects " + std::to_string(pred_loc_.size()));
  }
  std::vector<Tensor> loc_maps, conf_maps;
  for (size_t l = 0; l < pyramid.size(); ++l) {
    Tensor x = pyramid[l];
    if (au_[l]) x = au_[l]->forward(x);
    loc_maps.push_back(pred_loc_[l].forward(x));
    conf_maps.push_back(pred_conf_[l].forward(x));
  }
  const auto apl = cfg_.anchors_per_location();
  return {flatten_predictions(loc_maps, apl, 4),
          flatten_predictions(conf_maps, apl, cfg_.num_classes + 1)};
}

void DetectionHead::collect(ParamList& out) const {
  if (residual_.conv1.weight.defined()) residual_.collect("head.res", out);
  for (size_t l = 0; l < lateral_.size(); ++l) {
    const std::string idx = std::to_string(l + 1);
    if (lateral_[l]) lateral_[l]->collect("head.lateral" + idx, out);
    if (extra_[l]) extra_[l]->collect("head.extra" + idx, out);
    if (au_[l]) au_[l]->collect("head.au" + idx, out);
    pred_loc_[l].collect("head.pred" + idx + ".loc", out);
    pred_conf_[l].collect("head.pred" + idx + ".conf", out);
  }
}

Detector::Detector(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.finalize();
  Rng rng(cfg_.init_seed);
  backbone_ = Backbone(cfg_.stages, rng);
  head_ = DetectionHead(cfg_, rng);
}

FeaturePyramid Detector::pyramid(const Tensor& images, bool training) const {
  return head_.build_pyramid(backbone_.forward(images), training);
}

HeadOutput Detector::forward(const Tensor& images, bool training) const {
  return head_.predict(pyramid(images, training));
}

ParamList Detector::parameters() const {
  ParamList out;
  backbone_.collect(out);
  head_.collect(out);
  return out;
}

}  // namespace cvtassd
