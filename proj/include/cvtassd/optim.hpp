// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "cvtassd/config.hpp"
#include "cvtassd/nn.hpp"

namespace cvtassd {

/// initial_lr * 0.5 * (1 + cos(pi * iter / total_iters)).
double cosine_lr(int64_t iter, double initial_lr, int64_t total_iters);
double cosine_lr(int64_t iter, const TrainConfig& cfg);

/// Global L2 norm over the gradients of trainable tensors.
double global_grad_norm(const ParamList& params);

/// Scales all gradients by max_norm / norm when norm exceeds max_norm.
/// Returns the applied scale (1 when nothing was clipped).
double clip_gradients(const ParamList& params, double max_norm);

/// SGD with heavy-ball momentum and L2 weight decay:
///   v = momentum * v + grad + weight_decay * param;  param -= lr * v.
/// Gradients are cleared after the step.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
  void step(const ParamList& params, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<float>> velocity_;
};

}  // namespace cvtassd
