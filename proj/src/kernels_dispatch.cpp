#include <atomic>
#include <cstdlib>
#include <cstring>

#include "awp/error.hpp"
#include "awp/kernels.hpp"
#include "kernels_impl.hpp"

namespace awp::kernels {
namespace {

constexpr KernelTable kScalar{Isa::Scalar,        scalar::gemm,          scalar::axpy,
                              scalar::clamp_box,  scalar::relu,          scalar::relu_backward,
                              scalar::max_abs_diff};

#if AWP_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2{Isa::Avx2,       avx2::gemm,          avx2::axpy,
                            avx2::clamp_box, avx2::relu,          avx2::relu_backward,
                            avx2::max_abs_diff};
#endif

Isa detect() {
    if (const char* env = std::getenv("AWP_FORCE_SCALAR"); env && std::strcmp(env, "0") != 0) {
        return Isa::Scalar;
    }
    return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<const KernelTable*>& selected() {
    static std::atomic<const KernelTable*> t{&table(detect())};
    return t;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) {
    if (isa == Isa::Scalar) return true;
#if AWP_HAVE_AVX2_KERNELS
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& table(Isa isa) {
    if (!isa_supported(isa)) {
        throw ValidationError("kernel ISA " + std::string(isa_name(isa)) + " not supported on this CPU");
    }
#if AWP_HAVE_AVX2_KERNELS
    if (isa == Isa::Avx2) return kAvx2;
#endif
    return kScalar;
}

const KernelTable& active() { return *selected().load(std::memory_order_relaxed); }

void force_isa(Isa isa) { selected().store(&table(isa), std::memory_order_relaxed); }

}  // namespace awp::kernels
