#pragma once

#include <cstddef>

namespace mgcn::detail {

/// C[M,N] (+)= A[M,K] * B[K,N], all row-major and densely packed.
///
/// Each C element accumulates its K products in ascending k order whatever
/// the blocking, so results are reproducible bit for bit.
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate);

/// dst[cols,rows] = src[rows,cols]^T
void transpose(std::size_t rows, std::size_t cols, const float* src, float* dst);

}  // namespace mgcn::detail
