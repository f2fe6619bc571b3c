// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/optim.hpp"

#include <cmath>
#include <numbers>

#include "cvtassd/errors.hpp"

namespace cvtassd {

double cosine_lr(int64_t iter, double initial_lr, int64_t total_iters) {
  if (total_iters < 1) throw ConfigError("cosine_lr: total_iters must be >= 1");
  const double t = static_cast<double>(std::clamp<int64_t>(iter, 0, total_iters)) / total_iters;
  return initial_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double cosine_lr(int64_t iter, const TrainConfig& cfg) {
  return cosine_lr(iter, cfg.initial_lr, cfg.total_iters);
}

double global_grad_norm(const ParamList& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.trainable || !p.tensor.has_grad()) continue;
    for (float g : p.tensor.grad()) sq += double(g) * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(const ParamList& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_gradients: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (!(norm > max_norm)) return 1.0;
  const double s = max_norm / norm;
  for (const auto& p : params) {
    if (!p.trainable || !p.tensor.has_grad()) continue;
    Tensor t = p.tensor;
    for (float& g : t.grad_mut()) g = static_cast<float>(g * s);
  }
  return s;
}

void Sgd::step(const ParamList& params, double lr) {
  if (velocity_.empty()) velocity_.resize(params.size());
  if (velocity_.size() != params.size()) {
    throw UsageError("Sgd::step: parameter list changed between steps");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    Tensor t = params[i].tensor;
    auto w = t.data();
    auto& v = velocity_[i];
    if (v.empty()) v.assign(w.size(), 0.0f);
    if (!t.has_grad()) continue;
    auto g = t.grad();
    for (size_t j = 0; j < w.size(); ++j) {
      v[j] = static_cast<float>(momentum_ * v[j] + g[j] + weight_decay_ * w[j]);
      w[j] = static_cast<float>(w[j] - lr * v[j]);
    }
    t.zero_grad();
  }
}

}  // namespace cvtassd
