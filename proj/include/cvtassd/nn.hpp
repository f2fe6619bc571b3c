// SPDX-License-Identifier: Apache-2.0
// Parameterized layers shared by the backbone and the detection head.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "cvtassd/ops.hpp"

namespace cvtassd {

using Rng = std::mt19937_64;

/// A named model tensor. Buffers (batch-norm running statistics) are saved in
/// checkpoints but never receive gradients.
struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

using ParamList = std::vector<NamedTensor>;

/// Xavier/Glorot uniform fill: U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Tensor& t, int64_t fan_in, int64_t fan_out, Rng& rng);

int64_t count_parameters(const ParamList& params);

struct Conv2d {
  ConvSpec spec;
  Tensor weight;
  Tensor bias;  // undefined when the conv has no bias

  Conv2d() = default;
  Conv2d(const ConvSpec& spec, bool with_bias, Rng& rng);
  Tensor forward(const Tensor& x) const { return conv2d(x, spec, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
  Tensor weight;  // (out, in)
  Tensor bias;

  Linear() = default;
  Linear(int64_t in, int64_t out, bool with_bias, Rng& rng);
  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
  Tensor weight;
  Tensor bias;
  float eps = 1e-5f;

  LayerNorm() = default;
  explicit LayerNorm(int64_t dim);
  Tensor forward(const Tensor& x) const { return layer_norm(x, weight, bias, eps); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct BatchNorm2d {
  Tensor weight;
  Tensor bias;
  mutable Tensor running_mean;
  mutable Tensor running_var;
  float momentum = 0.1f;
  float eps = 1e-5f;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int64_t channels);
  Tensor forward(const Tensor& x, bool training) const {
    return batch_norm(x, weight, bias, running_mean, running_var, training, momentum, eps);
  }
  void collect(const std::string& prefix, ParamList& out) const;
};

}  // namespace cvtassd
