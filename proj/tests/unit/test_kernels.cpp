#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "awp/kernels.hpp"
#include "awp/model.hpp"

using namespace awp;
using kernels::Isa;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(lo, hi);
    std::vector<float> v(n);
    for (float& x : v) x = d(rng);
    return v;
}

bool have_avx2() { return kernels::isa_supported(Isa::Avx2); }

#define REQUIRE_AVX2() \
    if (!have_avx2()) GTEST_SKIP() << "no AVX2/FMA on this CPU"

// Row-major double product of op(A)·op(B).
std::vector<double> gemm_ref(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const std::vector<float>& a,
                             const std::vector<float>& b) {
    std::vector<double> c(static_cast<size_t>(m * n), 0.0);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int64_t p = 0; p < k; ++p) {
                const double av = ta ? a[p * m + i] : a[i * k + p];
                const double bv = tb ? b[j * k + p] : b[p * n + j];
                s += av * bv;
            }
            c[i * n + j] = s;
        }
    return c;
}

class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa) : saved_(kernels::active().isa) { kernels::force_isa(isa); }
    ~ScopedIsa() { kernels::force_isa(saved_); }

private:
    Isa saved_;
};

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
    EXPECT_TRUE(kernels::isa_supported(Isa::Scalar));
    EXPECT_EQ(kernels::table(Isa::Scalar).isa, Isa::Scalar);
}

TEST(Kernels, ForceIsaSwitchesActiveTable) {
    ScopedIsa s(Isa::Scalar);
    EXPECT_EQ(kernels::active().isa, Isa::Scalar);
}

TEST(Kernels, GemmMatchesDoubleReferenceOnBothIsas) {
    const std::vector<std::array<int64_t, 3>> sizes{{1, 1, 1},   {3, 5, 7},    {6, 16, 9},  {7, 17, 33},
                                                    {13, 31, 2}, {5, 48, 300}, {64, 10, 600}, {2, 100, 257}};
    std::vector<Isa> isas{Isa::Scalar};
    if (have_avx2()) isas.push_back(Isa::Avx2);
    uint64_t seed = 1;
    for (Isa isa : isas) {
        const auto& kt = kernels::table(isa);
        for (const auto& [m, n, k] : sizes) {
            for (int mode = 0; mode < 8; ++mode) {
                const bool ta = mode & 1, tb = mode & 2, acc = mode & 4;
                const auto a = random_vec(static_cast<size_t>(m * k), seed++);
                const auto b = random_vec(static_cast<size_t>(k * n), seed++);
                auto c = random_vec(static_cast<size_t>(m * n), seed++);
                const auto c0 = c;
                kt.gemm(ta, tb, m, n, k, a.data(), b.data(), c.data(), acc);
                const auto ref = gemm_ref(ta, tb, m, n, k, a, b);
                for (size_t i = 0; i < c.size(); ++i) {
                    const double expect = ref[i] + (acc ? c0[i] : 0.0);
                    ASSERT_NEAR(c[i], expect, 1e-5 * std::sqrt(static_cast<double>(k)) + 1e-6)
                        << kernels::isa_name(isa) << " m=" << m << " n=" << n << " k=" << k << " mode=" << mode;
                }
            }
        }
    }
}

TEST(Kernels, GemmWithZeroDepthClearsOrKeeps) {
    for (Isa isa : {Isa::Scalar, Isa::Avx2}) {
        if (!kernels::isa_supported(isa)) continue;
        std::vector<float> c{1, 2, 3, 4};
        kernels::table(isa).gemm(false, false, 2, 2, 0, nullptr, nullptr, c.data(), true);
        EXPECT_EQ(c, (std::vector<float>{1, 2, 3, 4}));
        kernels::table(isa).gemm(false, false, 2, 2, 0, nullptr, nullptr, c.data(), false);
        EXPECT_EQ(c, (std::vector<float>{0, 0, 0, 0}));
    }
}

TEST(Kernels, ElementwiseKernelsBitIdenticalAcrossIsas) {
    REQUIRE_AVX2();
    const auto& s = kernels::table(Isa::Scalar);
    const auto& v = kernels::table(Isa::Avx2);
    for (int64_t n : {0, 1, 7, 8, 9, 15, 16, 17, 63, 64, 65, 1000}) {
        const auto x = random_vec(static_cast<size_t>(n), 100 + static_cast<uint64_t>(n));
        const auto g = random_vec(static_cast<size_t>(n), 200 + static_cast<uint64_t>(n));
        const auto anchor = random_vec(static_cast<size_t>(n), 300 + static_cast<uint64_t>(n));

        std::vector<float> r1(static_cast<size_t>(n)), r2(static_cast<size_t>(n));
        s.relu(n, x.data(), r1.data());
        v.relu(n, x.data(), r2.data());
        EXPECT_EQ(0, std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(float)));

        std::vector<float> b1 = g, b2 = g;
        s.relu_backward(n, x.data(), g.data(), b1.data());
        v.relu_backward(n, x.data(), g.data(), b2.data());
        EXPECT_EQ(0, std::memcmp(b1.data(), b2.data(), b1.size() * sizeof(float)));

        std::vector<float> t1 = x, t2 = x;
        s.clamp_box(n, t1.data(), anchor.data(), 0.05f);
        v.clamp_box(n, t2.data(), anchor.data(), 0.05f);
        EXPECT_EQ(0, std::memcmp(t1.data(), t2.data(), t1.size() * sizeof(float)));

        EXPECT_EQ(s.max_abs_diff(n, x.data(), anchor.data()), v.max_abs_diff(n, x.data(), anchor.data()));
    }
}

TEST(Kernels, AxpyAgreesAcrossIsas) {
    REQUIRE_AVX2();
    for (int64_t n : {0, 1, 8, 13, 64, 1001}) {
        const auto x = random_vec(static_cast<size_t>(n), 7);
        auto y1 = random_vec(static_cast<size_t>(n), 8);
        auto y2 = y1;
        kernels::table(Isa::Scalar).axpy(n, -0.37f, x.data(), y1.data());
        kernels::table(Isa::Avx2).axpy(n, -0.37f, x.data(), y2.data());
        for (int64_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-6);
    }
}

TEST(Kernels, ClampBoxWithZeroRadiusPinsToAnchor) {
    for (Isa isa : {Isa::Scalar, Isa::Avx2}) {
        if (!kernels::isa_supported(isa)) continue;
        auto theta = random_vec(33, 1);
        const auto anchor = random_vec(33, 2);
        kernels::table(isa).clamp_box(33, theta.data(), anchor.data(), 0.0f);
        EXPECT_EQ(theta, anchor);
    }
}

TEST(Kernels, ModelForwardAgreesAcrossIsas) {
    REQUIRE_AVX2();
    ModelSpec spec = ModelSpec::image_cnn(10, 3, 14, 14, 5);
    const Model m = build(spec);
    Dataset d(DataKind::Image, {3, 14, 14}, 10);
    for (int i = 0; i < 8; ++i) {
        Example x{DataKind::Image, {3, 14, 14}, random_vec(3 * 14 * 14, 40 + static_cast<uint64_t>(i), 0.0f, 1.0f), {}};
        d.push_back(x, i % 10);
    }
    const Batch b = make_batch(d, 0, d.size());
    Tensor l1, l2;
    {
        ScopedIsa s(Isa::Scalar);
        l1 = forward(m, b);
    }
    {
        ScopedIsa s(Isa::Avx2);
        l2 = forward(m, b);
    }
    for (int64_t i = 0; i < l1.numel(); ++i) EXPECT_NEAR(l1[i], l2[i], 1e-5 * std::max(1.0f, std::fabs(l1[i])));
}
