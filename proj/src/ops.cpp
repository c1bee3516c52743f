#include "awp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "awp/error.hpp"
#include "awp/kernels.hpp"

namespace awp::ops {
namespace {

void expect_rank(const Tensor& x, size_t rank, const char* op) {
    if (x.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_str(x.shape()));
    }
}

void accumulate(Tensor& dst, const Tensor& src) {
    kernels::active().axpy(src.numel(), 1.0f, src.ptr(), dst.ptr());
}

}  // namespace

Var matmul(GradTape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    expect_rank(av, 2, "matmul");
    expect_rank(bv, 2, "matmul");
    const int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (bv.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions differ for " + shape_str(av.shape()) + " and " +
                             shape_str(bv.shape()));
    }
    Tensor out({m, n});
    kernels::active().gemm(false, false, m, n, k, av.ptr(), bv.ptr(), out.ptr(), false);
    return t.record(std::move(out), {a, b}, [a, b, av, bv, m, n, k](GradTape& tp, const Tensor& g) {
        const auto& kt = kernels::active();
        if (tp.requires_grad(a)) kt.gemm(false, true, m, k, n, g.ptr(), bv.ptr(), tp.grad_buffer(a).ptr(), true);
        if (tp.requires_grad(b)) kt.gemm(true, false, k, n, m, av.ptr(), g.ptr(), tp.grad_buffer(b).ptr(), true);
    });
}

Var add_bias(GradTape& t, Var x, Var bias) {
    const Tensor& xv = t.value(x);
    const Tensor& bv = t.value(bias);
    expect_rank(xv, 2, "add_bias");
    expect_rank(bv, 1, "add_bias");
    const int64_t rows = xv.dim(0), cols = xv.dim(1);
    if (bv.dim(0) != cols) {
        throw DimensionError("add_bias: bias " + shape_str(bv.shape()) + " does not match " + shape_str(xv.shape()));
    }
    Tensor out = xv.clone();
    for (int64_t r = 0; r < rows; ++r) kernels::active().axpy(cols, 1.0f, bv.ptr(), out.ptr() + r * cols);
    return t.record(std::move(out), {x, bias}, [x, bias, rows, cols](GradTape& tp, const Tensor& g) {
        if (tp.requires_grad(x)) accumulate(tp.grad_buffer(x), g);
        if (tp.requires_grad(bias)) {
            Tensor& gb = tp.grad_buffer(bias);
            for (int64_t r = 0; r < rows; ++r) kernels::active().axpy(cols, 1.0f, g.ptr() + r * cols, gb.ptr());
        }
    });
}

Var conv2d(GradTape& t, Var input, Var kernels_var, std::optional<Var> bias, int64_t stride) {
    const Tensor& in = t.value(input);
    const Tensor& kw_t = t.value(kernels_var);
    expect_rank(in, 4, "conv2d");
    expect_rank(kw_t, 4, "conv2d");
    const int64_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    const int64_t f = kw_t.dim(0), kh = kw_t.dim(2), kw = kw_t.dim(3);
    if (kw_t.dim(1) != c) {
        throw DimensionError("conv2d: kernel channels " + shape_str(kw_t.shape()) + " do not match input " +
                             shape_str(in.shape()));
    }
    if (kh > h || kw > w) {
        throw DimensionError("conv2d: kernel " + shape_str(kw_t.shape()) + " larger than input " +
                             shape_str(in.shape()));
    }
    if (stride < 1) throw DimensionError("conv2d: stride must be positive");
    if (bias) {
        const Tensor& bv = t.value(*bias);
        if (bv.rank() != 1 || bv.dim(0) != f) {
            throw DimensionError("conv2d: bias " + shape_str(bv.shape()) + " does not match " + std::to_string(f) +
                                 " filters");
        }
    }
    const int64_t ho = (h - kh) / stride + 1, wo = (w - kw) / stride + 1;
    const int64_t positions = ho * wo;
    const int64_t patch = c * kh * kw;
    const int64_t cols = n * positions;

    // im2col over the whole batch: column index = sample * positions + output pixel.
    Tensor col({patch, cols});
    float* cp = col.ptr();
    const float* ip = in.ptr();
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t ki = 0; ki < kh; ++ki)
            for (int64_t kj = 0; kj < kw; ++kj) {
                float* row = cp + ((ch * kh + ki) * kw + kj) * cols;
                for (int64_t s = 0; s < n; ++s) {
                    const float* plane = ip + (s * c + ch) * h * w;
                    float* dst = row + s * positions;
                    for (int64_t oh = 0; oh < ho; ++oh) {
                        const float* src = plane + (oh * stride + ki) * w + kj;
                        for (int64_t ow = 0; ow < wo; ++ow) dst[oh * wo + ow] = src[ow * stride];
                    }
                }
            }

    Tensor mat({f, cols});
    kernels::active().gemm(false, false, f, cols, patch, kw_t.ptr(), col.ptr(), mat.ptr(), false);

    Tensor out({n, f, ho, wo});
    const float* bp = bias ? t.value(*bias).ptr() : nullptr;
    for (int64_t s = 0; s < n; ++s)
        for (int64_t fi = 0; fi < f; ++fi) {
            const float* src = mat.ptr() + fi * cols + s * positions;
            float* dst = out.ptr() + (s * f + fi) * positions;
            const float b = bp ? bp[fi] : 0.0f;
            for (int64_t p = 0; p < positions; ++p) dst[p] = src[p] + b;
        }

    std::vector<Var> inputs{input, kernels_var};
    if (bias) inputs.push_back(*bias);
    return t.record(std::move(out), inputs,
                    [=, kv = kw_t, col = std::move(col)](GradTape& tp, const Tensor& g) {
                        const auto& kt = kernels::active();
                        Tensor gmat({f, cols});
                        for (int64_t s = 0; s < n; ++s)
                            for (int64_t fi = 0; fi < f; ++fi)
                                std::copy_n(g.ptr() + (s * f + fi) * positions, positions,
                                            gmat.ptr() + fi * cols + s * positions);
                        if (tp.requires_grad(kernels_var)) {
                            kt.gemm(false, true, f, patch, cols, gmat.ptr(), col.ptr(),
                                    tp.grad_buffer(kernels_var).ptr(), true);
                        }
                        if (bias && tp.requires_grad(*bias)) {
                            Tensor& gb = tp.grad_buffer(*bias);
                            for (int64_t fi = 0; fi < f; ++fi) {
                                double acc = 0.0;
                                const float* row = gmat.ptr() + fi * cols;
                                for (int64_t q = 0; q < cols; ++q) acc += row[q];
                                gb[fi] += static_cast<float>(acc);
                            }
                        }
                        if (tp.requires_grad(input)) {
                            Tensor dcol({patch, cols});
                            kt.gemm(true, false, patch, cols, f, kv.ptr(), gmat.ptr(), dcol.ptr(), false);
                            float* gi = tp.grad_buffer(input).ptr();
                            for (int64_t ch = 0; ch < c; ++ch)
                                for (int64_t ki = 0; ki < kh; ++ki)
                                    for (int64_t kj = 0; kj < kw; ++kj) {
                                        const float* row = dcol.ptr() + ((ch * kh + ki) * kw + kj) * cols;
                                        for (int64_t s = 0; s < n; ++s) {
                                            float* plane = gi + (s * c + ch) * h * w;
                                            const float* src = row + s * positions;
                                            for (int64_t oh = 0; oh < ho; ++oh) {
                                                float* dst = plane + (oh * stride + ki) * w + kj;
                                                for (int64_t ow = 0; ow < wo; ++ow)
                                                    dst[ow * stride] += src[oh * wo + ow];
                                            }
                                        }
                                    }
                        }
                    });
}

Var relu(GradTape& t, Var x) {
    const Tensor& xv = t.value(x);
    Tensor out(xv.shape());
    kernels::active().relu(xv.numel(), xv.ptr(), out.ptr());
    return t.record(std::move(out), {x}, [x, xv](GradTape& tp, const Tensor& g) {
        kernels::active().relu_backward(xv.numel(), xv.ptr(), g.ptr(), tp.grad_buffer(x).ptr());
    });
}

Var maxpool2d(GradTape& t, Var x, int64_t window) {
    const Tensor& xv = t.value(x);
    expect_rank(xv, 4, "maxpool2d");
    if (window < 1) throw DimensionError("maxpool2d: window must be positive");
    const int64_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    const int64_t ho = h / window, wo = w / window;
    if (ho == 0 || wo == 0) {
        throw DimensionError("maxpool2d: window " + std::to_string(window) + " leaves an empty output for " +
                             shape_str(xv.shape()));
    }
    Tensor out({n, c, ho, wo});
    std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
    const float* xp = xv.ptr();
    float* op = out.ptr();
    for (int64_t plane = 0; plane < n * c; ++plane) {
        const float* src = xp + plane * h * w;
        for (int64_t oh = 0; oh < ho; ++oh)
            for (int64_t ow = 0; ow < wo; ++ow) {
                int64_t best = (oh * window) * w + ow * window;
                for (int64_t i = 0; i < window; ++i)
                    for (int64_t j = 0; j < window; ++j) {
                        const int64_t idx = (oh * window + i) * w + ow * window + j;
                        if (src[idx] > src[best]) best = idx;
                    }
                const int64_t o = (plane * ho + oh) * wo + ow;
                op[o] = src[best];
                argmax[static_cast<size_t>(o)] = plane * h * w + best;
            }
    }
    return t.record(std::move(out), {x}, [x, argmax = std::move(argmax)](GradTape& tp, const Tensor& g) {
        float* gi = tp.grad_buffer(x).ptr();
        for (size_t o = 0; o < argmax.size(); ++o) gi[argmax[o]] += g[static_cast<int64_t>(o)];
    });
}

Var max_over_time(GradTape& t, Var x) {
    const Tensor& xv = t.value(x);
    expect_rank(xv, 3, "max_over_time");
    const int64_t rows = xv.dim(0) * xv.dim(1), len = xv.dim(2);
    Tensor out({xv.dim(0), xv.dim(1)});
    std::vector<int64_t> argmax(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const float* src = xv.ptr() + r * len;
        int64_t best = 0;
        for (int64_t i = 1; i < len; ++i)
            if (src[i] > src[best]) best = i;
        out[r] = src[best];
        argmax[static_cast<size_t>(r)] = r * len + best;
    }
    return t.record(std::move(out), {x}, [x, argmax = std::move(argmax)](GradTape& tp, const Tensor& g) {
        float* gi = tp.grad_buffer(x).ptr();
        for (size_t r = 0; r < argmax.size(); ++r) gi[argmax[r]] += g[static_cast<int64_t>(r)];
    });
}

Var sum(GradTape& t, Var x) {
    const Tensor& xv = t.value(x);
    double acc = 0.0;
    for (float v : xv.data()) acc += v;
    return t.record(Tensor::scalar(static_cast<float>(acc)), {x}, [x](GradTape& tp, const Tensor& g) {
        Tensor& gi = tp.grad_buffer(x);
        const float gv = g[0];
        for (auto& v : gi.data()) v += gv;
    });
}

Var mean(GradTape& t, Var x) {
    const Tensor& xv = t.value(x);
    const auto count = static_cast<float>(xv.numel());
    double acc = 0.0;
    for (float v : xv.data()) acc += v;
    return t.record(Tensor::scalar(static_cast<float>(acc / count)), {x},
                    [x, count](GradTape& tp, const Tensor& g) {
                        Tensor& gi = tp.grad_buffer(x);
                        const float gv = g[0] / count;
                        for (auto& v : gi.data()) v += gv;
                    });
}

Var scale(GradTape& t, Var x, float alpha) {
    const Tensor& xv = t.value(x);
    Tensor out(xv.shape());
    for (int64_t i = 0; i < xv.numel(); ++i) out[i] = alpha * xv[i];
    return t.record(std::move(out), {x}, [x, alpha](GradTape& tp, const Tensor& g) {
        kernels::active().axpy(g.numel(), alpha, g.ptr(), tp.grad_buffer(x).ptr());
    });
}

Var add(GradTape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (av.shape() != bv.shape()) {
        throw DimensionError("add: shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()) + " differ");
    }
    Tensor out = av.clone();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    return t.record(std::move(out), {a, b}, [a, b](GradTape& tp, const Tensor& g) {
        if (tp.requires_grad(a)) accumulate(tp.grad_buffer(a), g);
        if (tp.requires_grad(b)) accumulate(tp.grad_buffer(b), g);
    });
}

Var reshape(GradTape& t, Var x, Shape shape) {
    Tensor out = t.value(x).reshape(std::move(shape));
    return t.record(std::move(out), {x}, [x](GradTape& tp, const Tensor& g) {
        Tensor& gi = tp.grad_buffer(x);
        kernels::active().axpy(g.numel(), 1.0f, g.ptr(), gi.ptr());
    });
}

Var concat_cols(GradTape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
    const int64_t rows = t.value(parts.front()).dim(0);
    std::vector<int64_t> widths;
    int64_t total = 0;
    for (Var p : parts) {
        const Tensor& v = t.value(p);
        expect_rank(v, 2, "concat_cols");
        if (v.dim(0) != rows) {
            throw DimensionError("concat_cols: row count " + std::to_string(v.dim(0)) + " differs from " +
                                 std::to_string(rows));
        }
        widths.push_back(v.dim(1));
        total += v.dim(1);
    }
    Tensor out({rows, total});
    int64_t offset = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
        const Tensor& v = t.value(parts[i]);
        for (int64_t r = 0; r < rows; ++r)
            std::copy_n(v.ptr() + r * widths[i], widths[i], out.ptr() + r * total + offset);
        offset += widths[i];
    }
    return t.record(std::move(out), parts, [parts, widths, rows, total](GradTape& tp, const Tensor& g) {
        int64_t off = 0;
        for (size_t i = 0; i < parts.size(); ++i) {
            if (tp.requires_grad(parts[i])) {
                float* gi = tp.grad_buffer(parts[i]).ptr();
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < widths[i]; ++j) gi[r * widths[i] + j] += g[r * total + off + j];
            }
            off += widths[i];
        }
    });
}

Var embedding_lookup(GradTape& t, Var table, std::span<const int32_t> ids, int64_t n, int64_t len) {
    const Tensor& tv = t.value(table);
    expect_rank(tv, 2, "embedding_lookup");
    if (static_cast<int64_t>(ids.size()) != n * len) {
        throw DimensionError("embedding_lookup: " + std::to_string(ids.size()) + " ids for a " + std::to_string(n) +
                             "x" + std::to_string(len) + " batch");
    }
    const int64_t vocab = tv.dim(0), d = tv.dim(1);
    for (int32_t id : ids) {
        if (id < 0 || id >= vocab) {
            throw VocabError("embedding_lookup: id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(vocab));
        }
    }
    Tensor out({n, len, d});
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(tv.ptr() + static_cast<int64_t>(ids[i]) * d, d, out.ptr() + static_cast<int64_t>(i) * d);
    std::vector<int32_t> idcopy(ids.begin(), ids.end());
    return t.record(std::move(out), {table}, [table, d, idcopy = std::move(idcopy)](GradTape& tp, const Tensor& g) {
        float* gt = tp.grad_buffer(table).ptr();
        for (size_t i = 0; i < idcopy.size(); ++i) {
            kernels::active().axpy(d, 1.0f, g.ptr() + static_cast<int64_t>(i) * d,
                                   gt + static_cast<int64_t>(idcopy[i]) * d);
        }
    });
}

Tensor softmax_rows(const Tensor& logits) {
    expect_rank(logits, 2, "softmax");
    const int64_t rows = logits.dim(0), k = logits.dim(1);
    Tensor out(logits.shape());
    for (int64_t r = 0; r < rows; ++r) {
        const float* z = logits.ptr() + r * k;
        float* p = out.ptr() + r * k;
        const float m = *std::max_element(z, z + k);
        double total = 0.0;
        for (int64_t j = 0; j < k; ++j) {
            p[j] = std::exp(z[j] - m);
            total += p[j];
        }
        const auto inv = static_cast<float>(1.0 / total);
        for (int64_t j = 0; j < k; ++j) p[j] *= inv;
    }
    return out;
}

Var weighted_softmax_cross_entropy(GradTape& t, Var logits, const Tensor& probs, std::span<const float> row_weights) {
    const Tensor& z = t.value(logits);
    expect_rank(z, 2, "softmax_cross_entropy");
    const int64_t rows = z.dim(0), k = z.dim(1);
    if (probs.shape() != z.shape()) {
        throw DimensionError("softmax_cross_entropy: target " + shape_str(probs.shape()) + " does not match logits " +
                             shape_str(z.shape()));
    }
    if (static_cast<int64_t>(row_weights.size()) != rows) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(row_weights.size()) + " row weights for " +
                             std::to_string(rows) + " rows");
    }
    for (int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int64_t j = 0; j < k; ++j) s += probs[r * k + j];
        if (std::fabs(s - 1.0) > 1e-5) {
            throw ValidationError("softmax_cross_entropy: target row " + std::to_string(r) + " sums to " +
                                  std::to_string(s));
        }
    }
    Tensor sm = softmax_rows(z);
    double loss = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        const double wr = row_weights[static_cast<size_t>(r)];
        if (wr == 0.0) continue;
        const float* zr = z.ptr() + r * k;
        const double m = *std::max_element(zr, zr + k);
        double total = 0.0;
        for (int64_t j = 0; j < k; ++j) total += std::exp(zr[j] - m);
        const double lse = m + std::log(total);
        double ce = 0.0;
        for (int64_t j = 0; j < k; ++j) {
            const double tj = probs[r * k + j];
            if (tj != 0.0) ce -= tj * (zr[j] - lse);
        }
        loss += wr * ce;
    }
    std::vector<float> weights(row_weights.begin(), row_weights.end());
    return t.record(Tensor::scalar(static_cast<float>(loss)), {logits},
                    [logits, probs, sm = std::move(sm), weights = std::move(weights), rows, k](GradTape& tp,
                                                                                               const Tensor& g) {
                        float* gz = tp.grad_buffer(logits).ptr();
                        const float gv = g[0];
                        for (int64_t r = 0; r < rows; ++r) {
                            const float wr = weights[static_cast<size_t>(r)] * gv;
                            if (wr == 0.0f) continue;
                            for (int64_t j = 0; j < k; ++j) gz[r * k + j] += wr * (sm[r * k + j] - probs[r * k + j]);
                        }
                    });
}

Var softmax_cross_entropy(GradTape& t, Var logits, const Target& target) {
    const Tensor& z = t.value(logits);
    expect_rank(z, 2, "softmax_cross_entropy");
    const int64_t rows = z.dim(0), k = z.dim(1);
    std::vector<float> weights(static_cast<size_t>(rows), 1.0f / static_cast<float>(rows));
    if (const auto* labels = std::get_if<std::vector<int32_t>>(&target.value)) {
        if (static_cast<int64_t>(labels->size()) != rows) {
            throw DimensionError("softmax_cross_entropy: " + std::to_string(labels->size()) + " labels for " +
                                 std::to_string(rows) + " rows");
        }
        Tensor onehot({rows, k});
        for (int64_t r = 0; r < rows; ++r) {
            const int32_t y = (*labels)[static_cast<size_t>(r)];
            if (y < 0 || y >= k) {
                throw ValidationError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0," +
                                      std::to_string(k) + ")");
            }
            onehot[r * k + y] = 1.0f;
        }
        return weighted_softmax_cross_entropy(t, logits, onehot, weights);
    }
    return weighted_softmax_cross_entropy(t, logits, std::get<Tensor>(target.value), weights);
}

}  // namespace awp::ops
