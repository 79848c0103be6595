#include "gemm.hpp"

#include <algorithm>
#include <cstring>

namespace mgcn::detail {

namespace {

constexpr std::size_t kColumnBlock = 256;

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
    for (std::size_t j0 = 0; j0 < n; j0 += kColumnBlock) {
        const std::size_t jn = std::min(kColumnBlock, n - j0);
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4) {
            float* c0 = c + (i + 0) * n + j0;
            float* c1 = c + (i + 1) * n + j0;
            float* c2 = c + (i + 2) * n + j0;
            float* c3 = c + (i + 3) * n + j0;
            const float* ar = a + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const float a0 = ar[p];
                const float a1 = ar[k + p];
                const float a2 = ar[2 * k + p];
                const float a3 = ar[3 * k + p];
                const float* br = b + p * n + j0;
                for (std::size_t j = 0; j < jn; ++j) {
                    const float bv = br[j];
                    c0[j] += a0 * bv;
                    c1[j] += a1 * bv;
                    c2[j] += a2 * bv;
                    c3[j] += a3 * bv;
                }
            }
        }
        for (; i < m; ++i) {
            float* ci = c + i * n + j0;
            const float* ar = a + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const float av = ar[p];
                const float* br = b + p * n + j0;
                for (std::size_t j = 0; j < jn; ++j) ci[j] += av * br[j];
            }
        }
    }
}

void transpose(std::size_t rows, std::size_t cols, const float* src, float* dst) {
    constexpr std::size_t tile = 32;
    for (std::size_t r0 = 0; r0 < rows; r0 += tile) {
        for (std::size_t c0 = 0; c0 < cols; c0 += tile) {
            const std::size_t r1 = std::min(rows, r0 + tile);
            const std::size_t c1 = std::min(cols, c0 + tile);
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t col = c0; col < c1; ++col) dst[col * rows + r] = src[r * cols + col];
            }
        }
    }
}

}  // namespace mgcn::detail
