// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/loss.hpp"

#include <algorithm>
#include <cmath>

#include "cvtassd/errors.hpp"
#include "cvtassd/ops.hpp"

namespace cvtassd {

std::vector<float> background_loss(const Tensor& conf_pred) {
  const int64_t c = conf_pred.dim(-1);
  const int64_t rows = conf_pred.numel() / c;
  auto x = conf_pred.data();
  std::vector<float> out(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const float* row = x.data() + r * c;
    const float mx = *std::max_element(row, row + c);
    float z = 0.0f;
    for (int64_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    out[static_cast<size_t>(r)] = mx + std::log(z) - row[0];
  }
  return out;
}

MultiboxLoss multibox_loss(const Tensor& loc_pred, const Tensor& conf_pred,
                           std::span<const MatchResult> matches, double mine_ratio,
                           float loc_weight) {
  if (loc_pred.rank() != 3 || loc_pred.dim(2) != 4 || conf_pred.rank() != 3 ||
      conf_pred.dim(0) != loc_pred.dim(0) || conf_pred.dim(1) != loc_pred.dim(1)) {
    throw DimensionError("multibox_loss: expects loc (N, A, 4) and conf (N, A, C), got " +
                         shape_str(loc_pred.shape()) + " and " + shape_str(conf_pred.shape()));
  }
  const int64_t n = loc_pred.dim(0), a = loc_pred.dim(1);
  if (static_cast<int64_t>(matches.size()) != n) {
    throw DimensionError("multibox_loss: " + std::to_string(matches.size()) + " matches for batch " +
                         std::to_string(n));
  }

  const auto bg = background_loss(conf_pred);
  std::vector<float> targets(static_cast<size_t>(n * a * 4), 0.0f);
  std::vector<uint8_t> pos_mask(static_cast<size_t>(n * a), 0);
  std::vector<uint8_t> conf_mask(static_cast<size_t>(n * a), 0);
  std::vector<int> labels(static_cast<size_t>(n * a), 0);
  MultiboxLoss out;
  for (int64_t i = 0; i < n; ++i) {
    const MatchResult& m = matches[static_cast<size_t>(i)];
    if (static_cast<int64_t>(m.labels.size()) != a) {
      throw DimensionError("multibox_loss: match for image " + std::to_string(i) + " covers " +
                           std::to_string(m.labels.size()) + " anchors, predictions have " +
                           std::to_string(a));
    }
    const size_t base = static_cast<size_t>(i * a);
    const auto neg = hard_negative_mine(std::span<const float>(bg).subspan(base, static_cast<size_t>(a)),
                                        m.labels, m.num_positives, mine_ratio);
    for (size_t j = 0; j < static_cast<size_t>(a); ++j) {
      labels[base + j] = m.labels[j];
      if (m.labels[j] > 0) {
        pos_mask[base + j] = 1;
        conf_mask[base + j] = 1;
        std::copy(m.loc_targets[j].begin(), m.loc_targets[j].end(), targets.begin() + (base + j) * 4);
      } else if (neg[j]) {
        conf_mask[base + j] = 1;
        ++out.num_negatives;
      }
    }
    out.num_positives += m.num_positives;
  }

  const float inv = 1.0f / static_cast<float>(std::max(1, out.num_positives));
  const Tensor target(Shape{n, a, 4}, std::move(targets));
  const Tensor l_loc = smooth_l1_sum(loc_pred, target, pos_mask);
  const Tensor l_conf = cross_entropy_sum(conf_pred, labels, conf_mask);
  out.loc = l_loc.item() * inv;
  out.conf = l_conf.item() * inv;
  out.total = scale(add(l_conf, scale(l_loc, loc_weight)), inv);
  return out;
}

}  // namespace cvtassd
