#include "kernels_impl.hpp"

#if AWP_HAVE_AVX2_KERNELS

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#define AWP_AVX2 __attribute__((target("avx2,fma")))

namespace awp::kernels::avx2 {
namespace {

// Transposes a rows×cols row-major matrix into dst (cols×rows).
void transpose(const float* src, int64_t rows, int64_t cols, float* dst) {
    constexpr int64_t kBlock = 32;
    for (int64_t r0 = 0; r0 < rows; r0 += kBlock) {
        const int64_t r1 = std::min(rows, r0 + kBlock);
        for (int64_t c0 = 0; c0 < cols; c0 += kBlock) {
            const int64_t c1 = std::min(cols, c0 + kBlock);
            for (int64_t r = r0; r < r1; ++r)
                for (int64_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
        }
    }
}

AWP_AVX2 inline __m256i lane_mask(int64_t width) {
    const __m256i idx = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
    return _mm256_cmpgt_epi32(_mm256_set1_epi32(static_cast<int>(width)), idx);
}

constexpr int64_t kPanel = 16;  // columns per packed B panel
constexpr int kMaxRows = 6;     // rows per micro-tile

// R rows of C against one packed panel (k×16, zero padded past `width`).
template <int R>
AWP_AVX2 void micro_kernel(int64_t k, const float* a, int64_t lda, const float* panel, float* c,
                           int64_t ldc, int64_t width, bool accumulate) {
    __m256 acc0[R];
    __m256 acc1[R];
    for (int r = 0; r < R; ++r) {
        acc0[r] = _mm256_setzero_ps();
        acc1[r] = _mm256_setzero_ps();
    }
    for (int64_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(panel + p * kPanel);
        const __m256 b1 = _mm256_loadu_ps(panel + p * kPanel + 8);
        for (int r = 0; r < R; ++r) {
            const __m256 av = _mm256_broadcast_ss(a + r * lda + p);
            acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
            acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
        }
    }
    if (width == kPanel) {
        for (int r = 0; r < R; ++r) {
            float* crow = c + r * ldc;
            if (accumulate) {
                acc0[r] = _mm256_add_ps(acc0[r], _mm256_loadu_ps(crow));
                acc1[r] = _mm256_add_ps(acc1[r], _mm256_loadu_ps(crow + 8));
            }
            _mm256_storeu_ps(crow, acc0[r]);
            _mm256_storeu_ps(crow + 8, acc1[r]);
        }
        return;
    }
    const __m256i m0 = lane_mask(std::min<int64_t>(width, 8));
    const __m256i m1 = lane_mask(std::max<int64_t>(width - 8, 0));
    for (int r = 0; r < R; ++r) {
        float* crow = c + r * ldc;
        if (accumulate) {
            acc0[r] = _mm256_add_ps(acc0[r], _mm256_maskload_ps(crow, m0));
            acc1[r] = _mm256_add_ps(acc1[r], _mm256_maskload_ps(crow + 8, m1));
        }
        _mm256_maskstore_ps(crow, m0, acc0[r]);
        _mm256_maskstore_ps(crow + 8, m1, acc1[r]);
    }
}

AWP_AVX2 void row_block(int rows, int64_t k, const float* a, int64_t lda, const float* panel, float* c,
                        int64_t ldc, int64_t width, bool accumulate) {
    switch (rows) {
        case 6: micro_kernel<6>(k, a, lda, panel, c, ldc, width, accumulate); break;
        case 5: micro_kernel<5>(k, a, lda, panel, c, ldc, width, accumulate); break;
        case 4: micro_kernel<4>(k, a, lda, panel, c, ldc, width, accumulate); break;
        case 3: micro_kernel<3>(k, a, lda, panel, c, ldc, width, accumulate); break;
        case 2: micro_kernel<2>(k, a, lda, panel, c, ldc, width, accumulate); break;
        default: micro_kernel<1>(k, a, lda, panel, c, ldc, width, accumulate); break;
    }
}

AWP_AVX2 void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
                      bool accumulate) {
    // Depth blocks keep a packed panel in L1; after the first block C accumulates.
    constexpr int64_t kDepth = 256;
    thread_local std::vector<float> panel;
    panel.resize(static_cast<size_t>(std::min(k, kDepth) * kPanel));
    for (int64_t j0 = 0; j0 < n; j0 += kPanel) {
        const int64_t width = std::min(kPanel, n - j0);
        for (int64_t p0 = 0; p0 < k; p0 += kDepth) {
            const int64_t depth = std::min(kDepth, k - p0);
            for (int64_t p = 0; p < depth; ++p) {
                const float* src = b + (p0 + p) * n + j0;
                float* dst = panel.data() + p * kPanel;
                std::memcpy(dst, src, sizeof(float) * static_cast<size_t>(width));
                std::fill(dst + width, dst + kPanel, 0.0f);
            }
            const bool acc = accumulate || p0 > 0;
            for (int64_t i0 = 0; i0 < m; i0 += kMaxRows) {
                const int rows = static_cast<int>(std::min<int64_t>(kMaxRows, m - i0));
                row_block(rows, depth, a + i0 * k + p0, k, panel.data(), c + i0 * n + j0, n, width, acc);
            }
        }
    }
}

AWP_AVX2 float hmax(__m256 v) {
    __m128 s = _mm_max_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
    s = _mm_max_ps(s, _mm_movehl_ps(s, s));
    s = _mm_max_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
}

}  // namespace

AWP_AVX2 void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
                   const float* b, float* c, bool accumulate) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<size_t>(m * n));
        return;
    }
    thread_local std::vector<float> pack_a;
    thread_local std::vector<float> pack_b;
    if (trans_a) {
        pack_a.resize(static_cast<size_t>(m * k));
        transpose(a, k, m, pack_a.data());
        a = pack_a.data();
    }
    if (trans_b) {
        pack_b.resize(static_cast<size_t>(k * n));
        transpose(b, n, k, pack_b.data());
        b = pack_b.data();
    }
    gemm_nn(m, n, k, a, b, c, accumulate);
}

AWP_AVX2 void axpy(int64_t n, float alpha, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(alpha);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

AWP_AVX2 void clamp_box(int64_t n, float* theta, const float* anchor, float eps) {
    const __m256 ve = _mm256_set1_ps(eps);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 an = _mm256_loadu_ps(anchor + i);
        const __m256 lo = _mm256_sub_ps(an, ve);
        const __m256 hi = _mm256_add_ps(an, ve);
        __m256 t = _mm256_loadu_ps(theta + i);
        t = _mm256_min_ps(_mm256_max_ps(t, lo), hi);
        _mm256_storeu_ps(theta + i, t);
    }
    for (; i < n; ++i) {
        const float lo = anchor[i] - eps;
        const float hi = anchor[i] + eps;
        theta[i] = std::min(std::max(theta[i], lo), hi);
    }
}

AWP_AVX2 void relu(int64_t n, const float* in, float* out) {
    const __m256 z = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(in + i), z));
    for (; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

AWP_AVX2 void relu_backward(int64_t n, const float* x, const float* gout, float* gin) {
    const __m256 z = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 pos = _mm256_cmp_ps(_mm256_loadu_ps(x + i), z, _CMP_GT_OQ);
        const __m256 g = _mm256_and_ps(pos, _mm256_loadu_ps(gout + i));
        _mm256_storeu_ps(gin + i, _mm256_add_ps(_mm256_loadu_ps(gin + i), g));
    }
    for (; i < n; ++i) gin[i] += x[i] > 0.0f ? gout[i] : 0.0f;
}

AWP_AVX2 float max_abs_diff(int64_t n, const float* a, const float* b) {
    const __m256 sign = _mm256_set1_ps(-0.0f);
    __m256 m = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        m = _mm256_max_ps(m, _mm256_andnot_ps(sign, d));
    }
    float r = hmax(m);
    for (; i < n; ++i) r = std::max(r, std::fabs(a[i] - b[i]));
    return r;
}

}  // namespace awp::kernels::avx2

#endif
