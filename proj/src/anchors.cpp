// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvtassd/errors.hpp"
#include "cvtassd/head.hpp"

namespace cvtassd {

AnchorConfig anchor_config(const ModelConfig& cfg) {
  AnchorConfig out;
  out.input_size = cfg.input_size;
  for (const auto& s : pyramid_shapes(cfg, cfg.input_size)) out.feature_sizes.push_back(s.size);
  out.levels = cfg.anchors;
  return out;
}

AnchorSet generate_anchors(const AnchorConfig& cfg) {
  if (cfg.feature_sizes.size() != cfg.levels.size()) {
    throw ConfigError("anchors: " + std::to_string(cfg.levels.size()) + " anchor levels for " +
                      std::to_string(cfg.feature_sizes.size()) + " feature maps");
  }
  if (cfg.input_size <= 0) throw ConfigError("anchors: input size must be positive");
  AnchorSet out;
  const double in = cfg.input_size;
  for (size_t l = 0; l < cfg.levels.size(); ++l) {
    const AnchorLevel& lv = cfg.levels[l];
    if (lv.ratios.empty()) throw ConfigError("anchors: level " + std::to_string(l + 1) + " has no ratios");
    const int64_t f = cfg.feature_sizes[l];
    const double smin = lv.min_size / in;
    const double sprime = std::sqrt(double(lv.min_size) * lv.max_size) / in;
    std::vector<std::pair<double, double>> shapes{{smin, smin}, {sprime, sprime}};
    for (double r : lv.ratios) {
      const double sr = std::sqrt(r);
      shapes.emplace_back(smin * sr, smin / sr);
      shapes.emplace_back(smin / sr, smin * sr);
    }
    for (int64_t i = 0; i < f; ++i) {
      for (int64_t j = 0; j < f; ++j) {
        const double cx = (j + 0.5) / f, cy = (i + 0.5) / f;
        for (const auto& [w, h] : shapes) {
          out.boxes.push_back({static_cast<float>(std::clamp(cx, 0.0, 1.0)),
                               static_cast<float>(std::clamp(cy, 0.0, 1.0)),
                               static_cast<float>(std::clamp(w, 0.0, 1.0)),
                               static_cast<float>(std::clamp(h, 0.0, 1.0))});
        }
      }
    }
    out.level_counts.push_back(f * f * static_cast<int64_t>(shapes.size()));
  }
  return out;
}

MatchResult match_anchors(std::span<const BoxCenter> anchors, std::span<const GroundTruthBox> gts,
                          double threshold, const Variances& variances) {
  const size_t na = anchors.size(), ng = gts.size();
  MatchResult r;
  r.matched_gt.assign(na, -1);
  r.labels.assign(na, 0);
  r.loc_targets.assign(na, Offsets{0, 0, 0, 0});
  if (ng == 0 || na == 0) return r;

  std::vector<BoxCorner> acorner(na);
  for (size_t a = 0; a < na; ++a) acorner[a] = to_corner(anchors[a]);
  std::vector<double> ov(ng * na);
  for (size_t g = 0; g < ng; ++g) {
    for (size_t a = 0; a < na; ++a) ov[g * na + a] = iou(gts[g].box, acorner[a]);
  }

  std::vector<uint8_t> gt_done(ng, 0);
  for (size_t round = 0; round < std::min(ng, na); ++round) {
    double best = -1.0;
    size_t bg = 0, ba = 0;
    for (size_t g = 0; g < ng; ++g) {
      if (gt_done[g]) continue;
      for (size_t a = 0; a < na; ++a) {
        if (r.matched_gt[a] >= 0) continue;
        if (ov[g * na + a] > best) {
          best = ov[g * na + a];
          bg = g;
          ba = a;
        }
      }
    }
    gt_done[bg] = 1;
    r.matched_gt[ba] = static_cast<int>(bg);
  }

  for (size_t a = 0; a < na; ++a) {
    if (r.matched_gt[a] >= 0) continue;
    double best = -1.0;
    int bg = -1;
    for (size_t g = 0; g < ng; ++g) {
      if (ov[g * na + a] > best) {
        best = ov[g * na + a];
        bg = static_cast<int>(g);
      }
    }
    if (best >= threshold) r.matched_gt[a] = bg;
  }

  for (size_t a = 0; a < na; ++a) {
    const int g = r.matched_gt[a];
    if (g < 0) continue;
    r.labels[a] = gts[static_cast<size_t>(g)].label + 1;
    r.loc_targets[a] = encode(to_center(gts[static_cast<size_t>(g)].box), anchors[a], variances);
    ++r.num_positives;
  }
  return r;
}

std::vector<uint8_t> hard_negative_mine(std::span<const float> background_loss,
                                        std::span<const int> labels, int num_positives,
                                        double ratio) {
  if (background_loss.size() != labels.size()) {
    throw DimensionError("hard_negative_mine: loss and label counts differ");
  }
  std::vector<size_t> neg;
  for (size_t a = 0; a < labels.size(); ++a) {
    if (labels[a] == 0) neg.push_back(a);
  }
  const double budget = num_positives > 0 ? std::floor(ratio * num_positives) : std::floor(ratio);
  const size_t k = std::min(neg.size(), static_cast<size_t>(std::max(0.0, budget)));
  std::stable_sort(neg.begin(), neg.end(), [&](size_t x, size_t y) {
    return background_loss[x] > background_loss[y];
  });
  std::vector<uint8_t> mask(labels.size(), 0);
  for (size_t i = 0; i < k; ++i) mask[neg[i]] = 1;
  return mask;
}

}  // namespace cvtassd
