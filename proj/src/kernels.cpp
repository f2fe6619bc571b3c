// SPDX-License-Identifier: Apache-2.0
#include "kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <thread>
#include <vector>

namespace cvtassd::kernels {

int thread_count() {
  static const int count = [] {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("CVT_ASSD_THREADS")) {
      const int cap = std::atoi(env);
      if (cap > 0) n = std::min(n, cap);
    }
    return n;
  }();
  return count;
}

void parallel_for(int64_t n, int64_t work_per_item,
                  const std::function<void(int64_t, int64_t)>& body) {
  const int threads = thread_count();
  constexpr int64_t kMinWork = 1 << 18;
  if (threads <= 1 || n < 2 || n * work_per_item < kMinWork) {
    body(0, n);
    return;
  }
  const int64_t workers = std::min<int64_t>(threads, n);
  const int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers - 1));
  for (int64_t w = 1; w < workers; ++w) {
    const int64_t begin = w * chunk;
    const int64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

namespace {

void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, bool a_trans,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
  parallel_for(m, n * k, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      float* crow = c + i * ldc;
      for (int64_t p = 0; p < k; ++p) {
        const float av = a_trans ? a[p * lda + i] : a[i * lda + p];
        const float* brow = b + p * ldb;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc, bool accumulate) {
  if (!accumulate) {
    for (int64_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, sizeof(float) * n);
  }
  if (!trans_b) {
    gemm_nn(m, n, k, a, lda, trans_a, b, ldb, c, ldc);
    return;
  }
  // op(B) = B^T with B stored (N, K): materialize (K, N) so the inner loop is
  // contiguous.
  std::vector<float> bt(static_cast<size_t>(k * n));
  for (int64_t j = 0; j < n; ++j) {
    const float* brow = b + j * ldb;
    for (int64_t p = 0; p < k; ++p) bt[p * n + j] = brow[p];
  }
  gemm_nn(m, n, k, a, lda, trans_a, bt.data(), n, c, ldc);
}

void im2col(const float* image, const ConvGeom& g, float* col) {
  const int64_t positions = g.out_h * g.out_w;
  for (int64_t c = 0; c < g.channels; ++c) {
    const float* plane = image + c * g.height * g.width;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        float* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * positions;
        for (int64_t oy = 0; oy < g.out_h; ++oy) {
          const int64_t iy = oy * g.stride_h - g.pad_h + ky;
          float* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = plane + iy * g.width;
          for (int64_t ox = 0; ox < g.out_w; ++ox) {
            const int64_t ix = ox * g.stride_w - g.pad_w + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const ConvGeom& g, float* image) {
  const int64_t positions = g.out_h * g.out_w;
  for (int64_t c = 0; c < g.channels; ++c) {
    float* plane = image + c * g.height * g.width;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        const float* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * positions;
        for (int64_t oy = 0; oy < g.out_h; ++oy) {
          const int64_t iy = oy * g.stride_h - g.pad_h + ky;
          if (iy < 0 || iy >= g.height) continue;
          const float* src = row + oy * g.out_w;
          float* dst = plane + iy * g.width;
          for (int64_t ox = 0; ox < g.out_w; ++ox) {
            const int64_t ix = ox * g.stride_w - g.pad_w + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace cvtassd::kernels
