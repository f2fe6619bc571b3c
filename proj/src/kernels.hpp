// SPDX-License-Identifier: Apache-2.0
// Internal dense kernels. Summation order is fixed for every entry point so
// results are reproducible regardless of thread count.
#pragma once

#include <cstdint>
#include <functional>

namespace cvtassd::kernels {

/// Worker count: hardware concurrency, capped by CVT_ASSD_THREADS.
int thread_count();

/// Splits [0, n) into contiguous chunks. Runs inline when work is small.
void parallel_for(int64_t n, int64_t work_per_item,
                  const std::function<void(int64_t, int64_t)>& body);

/// C(M,N) = op(A) op(B) (+ C when accumulate). op(A) is (M,K), op(B) is (K,N).
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc, bool accumulate);

struct ConvGeom {
  int64_t channels, height, width;
  int kernel_h, kernel_w, stride_h, stride_w, pad_h, pad_w;
  int64_t out_h, out_w;
};

/// col rows are (c, ky, kx), columns are output positions.
void im2col(const float* image, const ConvGeom& g, float* col);
void col2im_add(const float* col, const ConvGeom& g, float* image);

}  // namespace cvtassd::kernels
