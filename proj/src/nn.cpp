// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/nn.hpp"

#include <cmath>

namespace cvtassd {

void xavier_uniform(Tensor& t, int64_t fan_in, int64_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = static_cast<float>(dist(rng));
}

int64_t count_parameters(const ParamList& params) {
  int64_t n = 0;
  for (const auto& p : params) {
    if (p.trainable) n += p.tensor.numel();
  }
  return n;
}

Conv2d::Conv2d(const ConvSpec& s, bool with_bias, Rng& rng) : spec(s) {
  spec.validate();
  weight = Tensor::zeros(spec.weight_shape());
  const int64_t receptive = static_cast<int64_t>(spec.kernel_h) * spec.kernel_w;
  xavier_uniform(weight, spec.in_channels / spec.groups * receptive,
                 spec.out_channels / spec.groups * receptive, rng);
  weight.set_requires_grad();
  if (with_bias) {
    bias = Tensor::zeros({spec.out_channels});
    bias.set_requires_grad();
  }
}

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, true});
}

Linear::Linear(int64_t in, int64_t out, bool with_bias, Rng& rng) {
  weight = Tensor::zeros({out, in});
  xavier_uniform(weight, in, out, rng);
  weight.set_requires_grad();
  if (with_bias) {
    bias = Tensor::zeros({out});
    bias.set_requires_grad();
  }
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, true});
}

LayerNorm::LayerNorm(int64_t dim) {
  weight = Tensor::ones({dim});
  bias = Tensor::zeros({dim});
  weight.set_requires_grad();
  bias.set_requires_grad();
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
}

BatchNorm2d::BatchNorm2d(int64_t channels) {
  weight = Tensor::ones({channels});
  bias = Tensor::zeros({channels});
  running_mean = Tensor::zeros({channels});
  running_var = Tensor::ones({channels});
  weight.set_requires_grad();
  bias.set_requires_grad();
}

void BatchNorm2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
  out.push_back({prefix + ".running_mean", running_mean, false});
  out.push_back({prefix + ".running_var", running_var, false});
}

}  // namespace cvtassd
