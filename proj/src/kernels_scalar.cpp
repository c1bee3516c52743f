#include <algorithm>
#include <cmath>
#include <cstring>

#include "kernels_impl.hpp"

namespace awp::kernels::scalar {

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          const float* b, float* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(float) * static_cast<size_t>(m * n));
    if (!trans_b) {
        for (int64_t i = 0; i < m; ++i) {
            float* crow = c + i * n;
            for (int64_t p = 0; p < k; ++p) {
                const float av = trans_a ? a[p * m + i] : a[i * k + p];
                const float* brow = b + p * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
        return;
    }
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            const float* brow = b + j * k;
            float s = 0.0f;
            for (int64_t p = 0; p < k; ++p) s += (trans_a ? a[p * m + i] : a[i * k + p]) * brow[p];
            c[i * n + j] += s;
        }
    }
}

void axpy(int64_t n, float alpha, const float* x, float* y) {
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void clamp_box(int64_t n, float* theta, const float* anchor, float eps) {
    for (int64_t i = 0; i < n; ++i) {
        const float lo = anchor[i] - eps;
        const float hi = anchor[i] + eps;
        theta[i] = std::min(std::max(theta[i], lo), hi);
    }
}

void relu(int64_t n, const float* in, float* out) {
    for (int64_t i = 0; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_backward(int64_t n, const float* x, const float* gout, float* gin) {
    for (int64_t i = 0; i < n; ++i) gin[i] += x[i] > 0.0f ? gout[i] : 0.0f;
}

float max_abs_diff(int64_t n, const float* a, const float* b) {
    float m = 0.0f;
    for (int64_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace awp::kernels::scalar
