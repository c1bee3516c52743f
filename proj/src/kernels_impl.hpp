#pragma once

#include <cstdint>

namespace awp::kernels::scalar {
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          const float* b, float* c, bool accumulate);
void axpy(int64_t n, float alpha, const float* x, float* y);
void clamp_box(int64_t n, float* theta, const float* anchor, float eps);
void relu(int64_t n, const float* in, float* out);
void relu_backward(int64_t n, const float* x, const float* gout, float* gin);
float max_abs_diff(int64_t n, const float* a, const float* b);
}  // namespace awp::kernels::scalar

#if defined(__x86_64__) || defined(_M_X64)
#define AWP_HAVE_AVX2_KERNELS 1
namespace awp::kernels::avx2 {
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
          const float* b, float* c, bool accumulate);
void axpy(int64_t n, float alpha, const float* x, float* y);
void clamp_box(int64_t n, float* theta, const float* anchor, float eps);
void relu(int64_t n, const float* in, float* out);
void relu_backward(int64_t n, const float* x, const float* gout, float* gin);
float max_abs_diff(int64_t n, const float* a, const float* b);
}  // namespace awp::kernels::avx2
#else
#define AWP_HAVE_AVX2_KERNELS 0
#endif
