#pragma once

// Data-parallel inner loops used by the autodiff ops, the optimizers and the
// projection step. Every kernel has a portable scalar reference and, on x86,
// an AVX2+FMA variant. The variant is picked once at startup from CPUID and
// can be overridden with AWP_FORCE_SCALAR=1 or force_isa().

#include <cstdint>
#include <string_view>

namespace awp::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// C[M×N] (+)= op(A)·op(B). op(A) is M×K, op(B) is K×N. Storage is dense
/// row-major: A is M×K (or K×M when trans_a), B is K×N (or N×K when trans_b).
using GemmFn = void (*)(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
                        const float* a, const float* b, float* c, bool accumulate);
/// y += alpha·x
using AxpyFn = void (*)(int64_t n, float alpha, const float* x, float* y);
/// theta[i] = clamp(theta[i], anchor[i] - eps, anchor[i] + eps)
using ClampBoxFn = void (*)(int64_t n, float* theta, const float* anchor, float eps);
/// out[i] = max(in[i], 0)
using ReluFn = void (*)(int64_t n, const float* in, float* out);
/// gin[i] += x[i] > 0 ? gout[i] : 0
using ReluBackwardFn = void (*)(int64_t n, const float* x, const float* gout, float* gin);
/// max_i |a[i] - b[i]|
using MaxAbsDiffFn = float (*)(int64_t n, const float* a, const float* b);

struct KernelTable {
    Isa isa;
    GemmFn gemm;
    AxpyFn axpy;
    ClampBoxFn clamp_box;
    ReluFn relu;
    ReluBackwardFn relu_backward;
    MaxAbsDiffFn max_abs_diff;
};

bool isa_supported(Isa isa);

/// Kernel table for a specific ISA. Throws if the ISA is unsupported here.
const KernelTable& table(Isa isa);

/// The table selected for this process.
const KernelTable& active();

/// Overrides runtime selection (tests, reproducibility across machines).
void force_isa(Isa isa);

}  // namespace awp::kernels
