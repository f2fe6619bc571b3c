// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cvtassd/tensor.hpp"

namespace cvtassd {

/// 2D convolution geometry. Weights are laid out (out, in / groups, k_h, k_w).
struct ConvSpec {
  int kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
  int in_channels = 1;
  int out_channels = 1;
  int groups = 1;

  static ConvSpec square(int in, int out, int kernel, int stride = 1, int pad = 0,
                         int groups = 1);
  Shape weight_shape() const;
  void validate() const;
  bool operator==(const ConvSpec&) const = default;
};

/// floor((in + 2 pad - kernel) / stride + 1); throws ConfigError when the
/// result is not positive.
int64_t conv_output_size(int64_t in, int kernel, int stride, int pad);

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
/// General axis permutation; out.shape[i] = a.shape[perm[i]].
Tensor permute(const Tensor& a, const std::vector<int>& perm);

/// Matrix product of rank-2 operands, or batched over a shared leading axis
/// for rank-3 operands.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

/// y = x W^T + b over the trailing axis. W is (out, in); bias optional.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

Tensor softmax(const Tensor& x, int axis);

/// Normalizes over the trailing axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

/// Per-channel normalization of an (N, C, H, W) tensor. In training mode the
/// batch statistics are used and the running buffers are updated in place.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, bool training,
                  float momentum = 0.1f, float eps = 1e-5f);

Tensor conv2d(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
              const Tensor& bias = {});

/// Depthwise conv (spec.groups == spec.in_channels, weight (C, 1, k, k)) followed
/// by a 1x1 pointwise conv (weight (out, C, 1, 1)) with optional bias.
Tensor separable_conv2d(const Tensor& input, const ConvSpec& spec,
                        const Tensor& depthwise_weight, const Tensor& pointwise_weight,
                        const Tensor& pointwise_bias = {});

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, int axis);

/// Sum of smooth-L1 (beta 1) over the rows of (R, k) tensors where mask is set.
Tensor smooth_l1_sum(const Tensor& pred, const Tensor& target, std::span<const uint8_t> mask);

/// Sum over masked rows of -log softmax(logits[r])[labels[r]], logits (R, C).
Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> labels,
                         std::span<const uint8_t> mask);

/// Multiply-accumulate count of conv / matmul / linear ops executed on this
/// thread since the last reset.
int64_t mac_counter();
void reset_mac_counter();

}  // namespace cvtassd
