// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvtassd/errors.hpp"
#include "kernels.hpp"

namespace cvtassd {

using detail::grad_of;
using detail::make_result;

namespace {

thread_local int64_t g_macs = 0;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

int normalize_axis(int axis, int rank, const char* op) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  }
  return a;
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  auto src = a.data();
  std::vector<float> out(src.size());
  for (size_t i = 0; i < src.size(); ++i) out[i] = fwd(src[i]);
  auto ai = a.impl();
  return make_result(op, a.shape(), std::move(out), {a}, [ai, deriv](std::span<const float> g) {
    auto ga = grad_of(ai);
    if (ga.empty()) return;
    const auto& x = ai->data;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i]);
  });
}

}  // namespace

ConvSpec ConvSpec::square(int in, int out, int kernel, int stride, int pad, int groups) {
  ConvSpec s;
  s.kernel_h = s.kernel_w = kernel;
  s.stride_h = s.stride_w = stride;
  s.pad_h = s.pad_w = pad;
  s.in_channels = in;
  s.out_channels = out;
  s.groups = groups;
  return s;
}

Shape ConvSpec::weight_shape() const {
  return {out_channels, in_channels / groups, kernel_h, kernel_w};
}

void ConvSpec::validate() const {
  if (kernel_h <= 0 || kernel_w <= 0 || stride_h <= 0 || stride_w <= 0 || pad_h < 0 ||
      pad_w < 0 || in_channels <= 0 || out_channels <= 0 || groups <= 0) {
    throw ConfigError("conv spec has non-positive kernel/stride/channels or negative padding");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw ConfigError("conv channels (" + std::to_string(in_channels) + " -> " +
                      std::to_string(out_channels) + ") not divisible by groups " +
                      std::to_string(groups));
  }
}

int64_t conv_output_size(int64_t in, int kernel, int stride, int pad) {
  const int64_t span = in + 2 * pad - kernel;
  if (span < 0 || stride <= 0) {
    throw ConfigError("conv output size non-positive: in=" + std::to_string(in) +
                      " k=" + std::to_string(kernel) + " s=" + std::to_string(stride) +
                      " p=" + std::to_string(pad));
  }
  return span / stride + 1;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result("add", a.shape(), std::move(out), {a, b}, [ai, bi](std::span<const float> g) {
    for (const auto& t : {ai, bi}) {
      auto gt = grad_of(t);
      for (size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result("sub", a.shape(), std::move(out), {a, b}, [ai, bi](std::span<const float> g) {
    auto ga = grad_of(ai);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    auto gb = grad_of(bi);
    for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result("mul", a.shape(), std::move(out), {a, b}, [ai, bi](std::span<const float> g) {
    auto ga = grad_of(ai);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bi->data[i];
    auto gb = grad_of(bi);
    for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * ai->data[i];
  });
}

Tensor scale(const Tensor& a, float s) {
  return unary("scale", a, [s](float v) { return v * s; }, [s](float) { return s; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](float v) { return v > 0.0f ? v : 0.0f; },
               [](float v) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor gelu(const Tensor& a) {
  constexpr float kInvSqrt2 = 0.70710678118654752f;
  constexpr float kInvSqrt2Pi = 0.39894228040143268f;
  return unary(
      "gelu", a, [](float v) { return 0.5f * v * (1.0f + std::erf(v * kInvSqrt2)); },
      [](float v) {
        const float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
        return cdf + v * kInvSqrt2Pi * std::exp(-0.5f * v * v);
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  }
  std::vector<float> out(a.data().begin(), a.data().end());
  auto ai = a.impl();
  return make_result("reshape", std::move(shape), std::move(out), {a},
                     [ai](std::span<const float> g) {
                       auto ga = grad_of(ai);
                       for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                     });
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r) throw DimensionError("permute: rank mismatch");
  std::vector<int> check(perm);
  std::sort(check.begin(), check.end());
  for (int i = 0; i < r; ++i) {
    if (check[i] != i) throw DimensionError("permute: not a permutation");
  }
  const Shape& in_shape = a.shape();
  Shape out_shape(r);
  std::vector<int64_t> in_strides(r, 1);
  for (int i = r - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
  std::vector<int64_t> src_stride(r);
  for (int i = 0; i < r; ++i) {
    out_shape[i] = in_shape[perm[i]];
    src_stride[i] = in_strides[perm[i]];
  }
  // Precompute the source offset of every output element once; the backward
  // pass reuses the same mapping.
  const int64_t n = a.numel();
  auto index = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n));
  std::vector<int64_t> counter(r, 0);
  int64_t offset = 0;
  for (int64_t i = 0; i < n; ++i) {
    (*index)[i] = offset;
    for (int d = r - 1; d >= 0; --d) {
      if (++counter[d] < out_shape[d]) {
        offset += src_stride[d];
        break;
      }
      offset -= src_stride[d] * (out_shape[d] - 1);
      counter[d] = 0;
    }
  }
  auto src = a.data();
  std::vector<float> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = src[(*index)[i]];
  auto ai = a.impl();
  return make_result("permute", std::move(out_shape), std::move(out), {a},
                     [ai, index](std::span<const float> g) {
                       auto ga = grad_of(ai);
                       if (ga.empty()) return;
                       for (size_t i = 0; i < g.size(); ++i) ga[(*index)[i]] += g[i];
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != b.rank() || (a.rank() != 2 && a.rank() != 3)) {
    throw DimensionError("matmul: operands must both be rank 2 or rank 3, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const bool batched = a.rank() == 3;
  const int64_t batch = batched ? a.dim(0) : 1;
  if (batched && b.dim(0) != batch) {
    throw DimensionError("matmul: batch axis mismatch " + std::to_string(batch) + " vs " +
                         std::to_string(b.dim(0)));
  }
  const int64_t ar = a.dim(-2), ac = a.dim(-1), br = b.dim(-2), bc = b.dim(-1);
  const int64_t m = trans_a ? ac : ar, k = trans_a ? ar : ac;
  const int64_t kb = trans_b ? bc : br, n = trans_b ? br : bc;
  if (k != kb) {
    throw DimensionError("matmul: inner dimension mismatch " + std::to_string(k) + " vs " +
                         std::to_string(kb));
  }
  std::vector<float> out(static_cast<size_t>(batch * m * n));
  const float* ap = a.data().data();
  const float* bp = b.data().data();
  for (int64_t s = 0; s < batch; ++s) {
    kernels::gemm(trans_a, trans_b, m, n, k, ap + s * ar * ac, ac, bp + s * br * bc, bc,
                  out.data() + s * m * n, n, false);
  }
  g_macs += batch * m * n * k;
  Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
  auto ai = a.impl(), bi = b.impl();
  return make_result(
      "matmul", std::move(shape), std::move(out), {a, b},
      [=](std::span<const float> g) {
        auto ga = grad_of(ai);
        auto gb = grad_of(bi);
        for (int64_t s = 0; s < batch; ++s) {
          const float* gs = g.data() + s * m * n;
          const float* as = ai->data.data() + s * ar * ac;
          const float* bs = bi->data.data() + s * br * bc;
          if (!ga.empty()) {
            float* gas = ga.data() + s * ar * ac;
            // dA = G op(B)^T, or (G op(B)^T)^T = op(B) G^T when A was transposed.
            if (!trans_a) {
              kernels::gemm(false, !trans_b, m, k, n, gs, n, bs, bc, gas, ac, true);
            } else {
              kernels::gemm(trans_b, true, k, m, n, bs, bc, gs, n, gas, ac, true);
            }
          }
          if (!gb.empty()) {
            float* gbs = gb.data() + s * br * bc;
            // dB = op(A)^T G, or its transpose G^T op(A) when B was transposed.
            if (!trans_b) {
              kernels::gemm(!trans_a, false, k, n, m, as, ac, gs, n, gbs, bc, true);
            } else {
              kernels::gemm(true, trans_a, n, k, m, gs, n, as, ac, gbs, bc, true);
            }
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2) throw DimensionError("linear: weight must be rank 2");
  const int64_t in = weight.dim(1), out_f = weight.dim(0);
  if (x.dim(-1) != in) {
    throw DimensionError("linear: input trailing axis " + std::to_string(x.dim(-1)) +
                         " != weight in_features " + std::to_string(in));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_f)) {
    throw DimensionError("linear: bias shape " + shape_str(bias.shape()) + " mismatches");
  }
  const int64_t rows = x.numel() / in;
  std::vector<float> out(static_cast<size_t>(rows * out_f));
  kernels::gemm(false, true, rows, out_f, in, x.data().data(), in, weight.data().data(), in,
                out.data(), out_f, false);
  g_macs += rows * out_f * in;
  if (bias.defined()) {
    auto bv = bias.data();
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < out_f; ++j) out[r * out_f + j] += bv[j];
    }
  }
  Shape shape = x.shape();
  shape.back() = out_f;
  auto xi = x.impl(), wi = weight.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result("linear", std::move(shape), std::move(out), std::move(inputs),
                     [=](std::span<const float> g) {
                       auto gx = grad_of(xi);
                       if (!gx.empty()) {
                         kernels::gemm(false, false, rows, in, out_f, g.data(), out_f,
                                       wi->data.data(), in, gx.data(), in, true);
                       }
                       auto gw = grad_of(wi);
                       if (!gw.empty()) {
                         kernels::gemm(true, false, out_f, in, rows, g.data(), out_f,
                                       xi->data.data(), in, gw.data(), in, true);
                       }
                       if (bi) {
                         auto gbias = grad_of(bi);
                         for (int64_t r = 0; r < rows && !gbias.empty(); ++r) {
                           for (int64_t j = 0; j < out_f; ++j) gbias[j] += g[r * out_f + j];
                         }
                       }
                     });
}

Tensor softmax(const Tensor& x, int axis) {
  const int a = normalize_axis(axis, x.rank(), "softmax");
  const Shape& s = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= s[i];
  for (int i = a + 1; i < x.rank(); ++i) inner *= s[i];
  const int64_t len = s[a];
  auto src = x.data();
  std::vector<float> out(src.size());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      float mx = src[base];
      for (int64_t j = 1; j < len; ++j) mx = std::max(mx, src[base + j * inner]);
      float total = 0.0f;
      for (int64_t j = 0; j < len; ++j) {
        const float e = std::exp(src[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      const float inv = 1.0f / total;
      for (int64_t j = 0; j < len; ++j) out[base + j * inner] *= inv;
    }
  }
  auto xi = x.impl();
  auto result = make_result("softmax", s, std::move(out), {x}, nullptr);
  if (result.has_graph()) {
    // The closure needs the output values; hold them weakly to avoid a cycle.
    std::weak_ptr<TensorImpl> yw = result.impl();
    result.impl()->node->backward = [xi, yw, outer, inner, len](std::span<const float> g) {
      auto gx = grad_of(xi);
      auto y = yw.lock();
      if (gx.empty() || !y) return;
      const auto& yv = y->data;
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * len * inner + in;
          float dot = 0.0f;
          for (int64_t j = 0; j < len; ++j) dot += g[base + j * inner] * yv[base + j * inner];
          for (int64_t j = 0; j < len; ++j) {
            const int64_t idx = base + j * inner;
            gx[idx] += yv[idx] * (g[idx] - dot);
          }
        }
      }
    };
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const int64_t d = x.dim(-1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: gamma/beta length must equal trailing axis " +
                         std::to_string(d));
  }
  const int64_t rows = x.numel() / d;
  auto src = x.data();
  auto gv = gamma.data(), bv = beta.data();
  std::vector<float> out(src.size());
  auto xhat = std::make_shared<std::vector<float>>(src.size());
  auto inv_std = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const float* row = src.data() + r * d;
    float mu = 0.0f;
    for (int64_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<float>(d);
    float var = 0.0f;
    for (int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<float>(d);
    const float is = 1.0f / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int64_t j = 0; j < d; ++j) {
      const float h = (row[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
  return make_result("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                     [=](std::span<const float> g) {
                       auto gx = grad_of(xi), gg = grad_of(gi), gb = grad_of(bi);
                       const auto& gam = gi->data;
                       for (int64_t r = 0; r < rows; ++r) {
                         const float* h = xhat->data() + r * d;
                         const float* gr = g.data() + r * d;
                         if (!gg.empty()) {
                           for (int64_t j = 0; j < d; ++j) gg[j] += gr[j] * h[j];
                         }
                         if (!gb.empty()) {
                           for (int64_t j = 0; j < d; ++j) gb[j] += gr[j];
                         }
                         if (gx.empty()) continue;
                         float mean_dh = 0.0f, mean_dh_h = 0.0f;
                         for (int64_t j = 0; j < d; ++j) {
                           const float dh = gr[j] * gam[j];
                           mean_dh += dh;
                           mean_dh_h += dh * h[j];
                         }
                         mean_dh /= static_cast<float>(d);
                         mean_dh_h /= static_cast<float>(d);
                         const float is = (*inv_std)[r];
                         for (int64_t j = 0; j < d; ++j) {
                           const float dh = gr[j] * gam[j];
                           gx[r * d + j] += is * (dh - mean_dh - h[j] * mean_dh_h);
                         }
                       }
                     });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, bool training, float momentum,
                  float eps) {
  if (x.rank() != 4) throw DimensionError("batch_norm: expects (N, C, H, W)");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c ||
      running_var.numel() != c) {
    throw DimensionError("batch_norm: parameter length must equal channel axis " +
                         std::to_string(c));
  }
  auto src = x.data();
  const int64_t count = n * hw;
  std::vector<float> mu(c), is(c);
  for (int64_t ch = 0; ch < c; ++ch) {
    if (training) {
      double s = 0.0;
      for (int64_t b = 0; b < n; ++b) {
        const float* p = src.data() + (b * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double v = 0.0;
      for (int64_t b = 0; b < n; ++b) {
        const float* p = src.data() + (b * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
      }
      v /= static_cast<double>(count);
      mu[ch] = static_cast<float>(m);
      is[ch] = static_cast<float>(1.0 / std::sqrt(v + eps));
      const double unbiased = count > 1 ? v * count / (count - 1) : v;
      auto rm = running_mean.data();
      auto rv = running_var.data();
      rm[ch] = (1.0f - momentum) * rm[ch] + momentum * static_cast<float>(m);
      rv[ch] = (1.0f - momentum) * rv[ch] + momentum * static_cast<float>(unbiased);
    } else {
      mu[ch] = running_mean.data()[ch];
      is[ch] = 1.0f / std::sqrt(running_var.data()[ch] + eps);
    }
  }
  auto gv = gamma.data(), bv = beta.data();
  std::vector<float> out(src.size());
  auto xhat = std::make_shared<std::vector<float>>(src.size());
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t base = (b * c + ch) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        const float h = (src[base + i] - mu[ch]) * is[ch];
        (*xhat)[base + i] = h;
        out[base + i] = h * gv[ch] + bv[ch];
      }
    }
  }
  auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
  return make_result(
      "batch_norm", x.shape(), std::move(out), {x, gamma, beta},
      [=](std::span<const float> g) {
        auto gx = grad_of(xi), gg = grad_of(gi), gb = grad_of(bi);
        const auto& gam = gi->data;
        for (int64_t ch = 0; ch < c; ++ch) {
          float sum_g = 0.0f, sum_gh = 0.0f;
          for (int64_t b = 0; b < n; ++b) {
            const int64_t base = (b * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) {
              sum_g += g[base + i];
              sum_gh += g[base + i] * (*xhat)[base + i];
            }
          }
          if (!gg.empty()) gg[ch] += sum_gh;
          if (!gb.empty()) gb[ch] += sum_g;
          if (gx.empty()) continue;
          const float k = gam[ch] * is[ch];
          const float mg = sum_g / static_cast<float>(count);
          const float mgh = sum_gh / static_cast<float>(count);
          for (int64_t b = 0; b < n; ++b) {
            const int64_t base = (b * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) {
              if (training) {
                gx[base + i] += k * (g[base + i] - mg - (*xhat)[base + i] * mgh);
              } else {
                gx[base + i] += k * g[base + i];
              }
            }
          }
        }
      });
}

namespace {

void check_conv_operands(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
                         const Tensor& bias) {
  spec.validate();
  if (input.rank() != 4) {
    throw DimensionError("conv2d: input must be (N, C, H, W), got " + shape_str(input.shape()));
  }
  if (input.dim(1) != spec.in_channels) {
    throw DimensionError("conv2d: channel axis (1) is " + std::to_string(input.dim(1)) +
                         ", spec expects " + std::to_string(spec.in_channels));
  }
  const Shape ws = spec.weight_shape();
  if (weight.shape() != ws) {
    const char* axis_names[] = {"out_channels", "in_channels/groups", "kernel_h", "kernel_w"};
    std::string which = "rank";
    if (weight.rank() == 4) {
      for (int i = 0; i < 4; ++i) {
        if (weight.dim(i) != ws[i]) {
          which = std::string("axis ") + std::to_string(i) + " (" + axis_names[i] + ")";
          break;
        }
      }
    }
    throw DimensionError("conv2d: weight " + which + " mismatch: got " +
                         shape_str(weight.shape()) + ", expected " + shape_str(ws));
  }
  if (bias.defined() && bias.numel() != spec.out_channels) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.numel()) +
                         " != out_channels " + std::to_string(spec.out_channels));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
              const Tensor& bias) {
  check_conv_operands(input, spec, weight, bias);
  const int64_t n = input.dim(0), h = input.dim(2), w = input.dim(3);
  const int64_t oh = conv_output_size(h, spec.kernel_h, spec.stride_h, spec.pad_h);
  const int64_t ow = conv_output_size(w, spec.kernel_w, spec.stride_w, spec.pad_w);
  const int64_t groups = spec.groups;
  const int64_t cg = spec.in_channels / groups, og = spec.out_channels / groups;
  const int64_t kk = static_cast<int64_t>(spec.kernel_h) * spec.kernel_w;
  const int64_t kc = cg * kk, positions = oh * ow;
  const int64_t cin = spec.in_channels, cout = spec.out_channels;
  const kernels::ConvGeom geom{cg, h, w, spec.kernel_h, spec.kernel_w, spec.stride_h,
                               spec.stride_w, spec.pad_h, spec.pad_w, oh, ow};
  const bool pointwise = kk == 1 && spec.stride_h == 1 && spec.stride_w == 1 &&
                         spec.pad_h == 0 && spec.pad_w == 0;
  const bool depthwise = cg == 1 && og == 1;

  std::vector<float> out(static_cast<size_t>(n * cout * positions), 0.0f);
  const float* x = input.data().data();
  const float* wt = weight.data().data();

  if (depthwise) {
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t ch = 0; ch < cin; ++ch) {
        const float* plane = x + (b * cin + ch) * h * w;
        const float* kern = wt + ch * kk;
        float* dst = out.data() + (b * cout + ch) * positions;
        for (int ky = 0; ky < spec.kernel_h; ++ky) {
          for (int kx = 0; kx < spec.kernel_w; ++kx) {
            const float kv = kern[ky * spec.kernel_w + kx];
            for (int64_t oy = 0; oy < oh; ++oy) {
              const int64_t iy = oy * spec.stride_h - spec.pad_h + ky;
              if (iy < 0 || iy >= h) continue;
              for (int64_t ox = 0; ox < ow; ++ox) {
                const int64_t ix = ox * spec.stride_w - spec.pad_w + kx;
                if (ix >= 0 && ix < w) dst[oy * ow + ox] += kv * plane[iy * w + ix];
              }
            }
          }
        }
      }
    }
  } else {
    std::vector<float> col(pointwise ? 0 : static_cast<size_t>(kc * positions));
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t g = 0; g < groups; ++g) {
        const float* img = x + (b * cin + g * cg) * h * w;
        const float* cols = img;
        if (!pointwise) {
          kernels::im2col(img, geom, col.data());
          cols = col.data();
        }
        kernels::gemm(false, false, og, positions, kc, wt + g * og * kc, kc, cols, positions,
                      out.data() + (b * cout + g * og) * positions, positions, false);
      }
    }
  }
  g_macs += n * cout * positions * kc;
  if (bias.defined()) {
    auto bv = bias.data();
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t o = 0; o < cout; ++o) {
        float* dst = out.data() + (b * cout + o) * positions;
        for (int64_t p = 0; p < positions; ++p) dst[p] += bv[o];
      }
    }
  }

  auto xi = input.impl(), wi = weight.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      "conv2d", Shape{n, cout, oh, ow}, std::move(out), std::move(inputs),
      [=](std::span<const float> gout) {
        auto gx = grad_of(xi), gw = grad_of(wi);
        const float* xv = xi->data.data();
        const float* wv = wi->data.data();
        if (bi) {
          auto gbias = grad_of(bi);
          for (int64_t b = 0; b < n && !gbias.empty(); ++b) {
            for (int64_t o = 0; o < cout; ++o) {
              const float* gp = gout.data() + (b * cout + o) * positions;
              float s = 0.0f;
              for (int64_t p = 0; p < positions; ++p) s += gp[p];
              gbias[o] += s;
            }
          }
        }
        if (depthwise) {
          for (int64_t b = 0; b < n; ++b) {
            for (int64_t ch = 0; ch < cin; ++ch) {
              const float* plane = xv + (b * cin + ch) * h * w;
              const float* gp = gout.data() + (b * cout + ch) * positions;
              for (int ky = 0; ky < spec.kernel_h; ++ky) {
                for (int kx = 0; kx < spec.kernel_w; ++kx) {
                  const int64_t widx = ch * kk + ky * spec.kernel_w + kx;
                  const float kv = wv[widx];
                  float acc = 0.0f;
                  for (int64_t oy = 0; oy < oh; ++oy) {
                    const int64_t iy = oy * spec.stride_h - spec.pad_h + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                      const int64_t ix = ox * spec.stride_w - spec.pad_w + kx;
                      if (ix < 0 || ix >= w) continue;
                      const float gv = gp[oy * ow + ox];
                      acc += gv * plane[iy * w + ix];
                      if (!gx.empty()) gx[(b * cin + ch) * h * w + iy * w + ix] += gv * kv;
                    }
                  }
                  if (!gw.empty()) gw[widx] += acc;
                }
              }
            }
          }
          return;
        }
        std::vector<float> col(pointwise ? 0 : static_cast<size_t>(kc * positions));
        std::vector<float> dcol(static_cast<size_t>(kc * positions));
        for (int64_t b = 0; b < n; ++b) {
          for (int64_t g = 0; g < groups; ++g) {
            const float* gp = gout.data() + (b * cout + g * og) * positions;
            if (!gw.empty()) {
              const float* img = xv + (b * cin + g * cg) * h * w;
              const float* cols = img;
              if (!pointwise) {
                kernels::im2col(img, geom, col.data());
                cols = col.data();
              }
              kernels::gemm(false, true, og, kc, positions, gp, positions, cols, positions,
                            gw.data() + g * og * kc, kc, true);
            }
            if (!gx.empty()) {
              float* dimg = gx.data() + (b * cin + g * cg) * h * w;
              if (pointwise) {
                kernels::gemm(true, false, kc, positions, og, wv + g * og * kc, kc, gp,
                              positions, dimg, positions, true);
              } else {
                kernels::gemm(true, false, kc, positions, og, wv + g * og * kc, kc, gp,
                              positions, dcol.data(), positions, false);
                kernels::col2im_add(dcol.data(), geom, dimg);
              }
            }
          }
        }
      });
}

Tensor separable_conv2d(const Tensor& input, const ConvSpec& spec,
                        const Tensor& depthwise_weight, const Tensor& pointwise_weight,
                        const Tensor& pointwise_bias) {
  if (spec.groups != spec.in_channels) {
    throw ConfigError("separable_conv2d: depthwise stage needs groups == in_channels (" +
                      std::to_string(spec.in_channels) + "), got " +
                      std::to_string(spec.groups));
  }
  ConvSpec dw = spec;
  dw.out_channels = spec.in_channels;
  const Tensor mid = conv2d(input, dw, depthwise_weight);
  const ConvSpec pw = ConvSpec::square(spec.in_channels, spec.out_channels, 1);
  return conv2d(mid, pw, pointwise_weight, pointwise_bias);
}

Tensor sum(const Tensor& x) {
  float s = 0.0f;
  for (float v : x.data()) s += v;
  auto xi = x.impl();
  return make_result("sum", Shape{1}, {s}, {x}, [xi](std::span<const float> g) {
    auto gx = grad_of(xi);
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0f / static_cast<float>(x.numel())); }

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const int r = parts[0].rank();
  const int a = normalize_axis(axis, r, "concat");
  Shape shape = parts[0].shape();
  int64_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) throw DimensionError("concat: rank mismatch");
    for (int i = 0; i < r; ++i) {
      if (i != a && p.dim(i) != shape[i]) {
        throw DimensionError("concat: axis " + std::to_string(i) + " mismatch " +
                             shape_str(p.shape()) + " vs " + shape_str(shape));
      }
    }
    total += p.dim(a);
  }
  shape[a] = total;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= shape[i];
  for (int i = a + 1; i < r; ++i) inner *= shape[i];
  std::vector<float> out(static_cast<size_t>(shape_numel(shape)));
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const int64_t len = p.dim(a) * inner;
    auto src = p.data();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(src.data() + o * len, len, out.data() + o * total * inner + off * inner);
    }
    off += p.dim(a);
  }
  std::vector<std::shared_ptr<TensorImpl>> impls;
  std::vector<int64_t> lens;
  for (const auto& p : parts) {
    impls.push_back(p.impl());
    lens.push_back(p.dim(a));
  }
  return make_result("concat", std::move(shape), std::move(out),
                     std::vector<Tensor>(parts.begin(), parts.end()),
                     [=](std::span<const float> g) {
                       for (size_t k = 0; k < impls.size(); ++k) {
                         auto gp = grad_of(impls[k]);
                         if (gp.empty()) continue;
                         const int64_t len = lens[k] * inner;
                         for (int64_t o = 0; o < outer; ++o) {
                           const float* src = g.data() + o * total * inner + offsets[k] * inner;
                           float* dst = gp.data() + o * len;
                           for (int64_t i = 0; i < len; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

Tensor smooth_l1_sum(const Tensor& pred, const Tensor& target, std::span<const uint8_t> mask) {
  require_same_shape(pred, target, "smooth_l1_sum");
  const int64_t cols = pred.dim(-1);
  const int64_t rows = pred.numel() / cols;
  if (static_cast<int64_t>(mask.size()) != rows) {
    throw DimensionError("smooth_l1_sum: mask length " + std::to_string(mask.size()) +
                         " != rows " + std::to_string(rows));
  }
  auto p = pred.data(), t = target.data();
  float total = 0.0f;
  for (int64_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    for (int64_t j = 0; j < cols; ++j) {
      const float d = p[r * cols + j] - t[r * cols + j];
      const float ad = std::fabs(d);
      total += ad < 1.0f ? 0.5f * d * d : ad - 0.5f;
    }
  }
  std::vector<uint8_t> m(mask.begin(), mask.end());
  auto pi = pred.impl(), ti = target.impl();
  return make_result("smooth_l1_sum", Shape{1}, {total}, {pred, target},
                     [=](std::span<const float> g) {
                       auto gp = grad_of(pi), gt = grad_of(ti);
                       for (int64_t r = 0; r < rows; ++r) {
                         if (!m[r]) continue;
                         for (int64_t j = 0; j < cols; ++j) {
                           const int64_t i = r * cols + j;
                           const float d = pi->data[i] - ti->data[i];
                           const float dd = std::fabs(d) < 1.0f ? d : (d > 0 ? 1.0f : -1.0f);
                           if (!gp.empty()) gp[i] += g[0] * dd;
                           if (!gt.empty()) gt[i] -= g[0] * dd;
                         }
                       }
                     });
}

Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> labels,
                         std::span<const uint8_t> mask) {
  const int64_t classes = logits.dim(-1);
  const int64_t rows = logits.numel() / classes;
  if (static_cast<int64_t>(labels.size()) != rows ||
      static_cast<int64_t>(mask.size()) != rows) {
    throw DimensionError("cross_entropy_sum: labels/mask length must equal rows " +
                         std::to_string(rows));
  }
  auto x = logits.data();
  auto probs = std::make_shared<std::vector<float>>(x.size(), 0.0f);
  float total = 0.0f;
  for (int64_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    if (labels[r] < 0 || labels[r] >= classes) {
      throw DimensionError("cross_entropy_sum: label out of range at row " + std::to_string(r));
    }
    const float* row = x.data() + r * classes;
    float mx = row[0];
    for (int64_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
    float z = 0.0f;
    for (int64_t j = 0; j < classes; ++j) z += std::exp(row[j] - mx);
    const float lse = mx + std::log(z);
    total += lse - row[labels[r]];
    for (int64_t j = 0; j < classes; ++j) (*probs)[r * classes + j] = std::exp(row[j] - lse);
  }
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<uint8_t> m(mask.begin(), mask.end());
  auto li = logits.impl();
  return make_result("cross_entropy_sum", Shape{1}, {total}, {logits},
                     [=](std::span<const float> g) {
                       auto gl = grad_of(li);
                       if (gl.empty()) return;
                       for (int64_t r = 0; r < rows; ++r) {
                         if (!m[r]) continue;
                         for (int64_t j = 0; j < classes; ++j) {
                           const float onehot = j == lab[r] ? 1.0f : 0.0f;
                           gl[r * classes + j] += g[0] * ((*probs)[r * classes + j] - onehot);
                         }
                       }
                     });
}

int64_t mac_counter() { return g_macs; }
void reset_mac_counter() { g_macs = 0; }

}  // namespace cvtassd
