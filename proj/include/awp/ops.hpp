#pragma once

// Differentiable primitives recorded on a GradTape. Shapes are always explicit:
// the only implicit broadcast is a bias vector added across the batch rows.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "awp/tape.hpp"
#include "awp/tensor.hpp"

namespace awp::ops {

/// [m×k]·[k×n] -> [m×n]
Var matmul(GradTape& t, Var a, Var b);

/// x[N×n] + bias[n] broadcast over rows.
Var add_bias(GradTape& t, Var x, Var bias);

/// Valid (unpadded) cross-correlation. input N×C×H×W, kernels F×C×kh×kw,
/// optional per-filter bias of length F. Output N×F×H'×W' with
/// H' = (H - kh) / stride + 1.
Var conv2d(GradTape& t, Var input, Var kernels, std::optional<Var> bias, int64_t stride = 1);

Var relu(GradTape& t, Var x);

/// Non-overlapping window×window max pooling over N×C×H×W. Trailing rows and
/// columns that do not fill a window are dropped. Ties go to the first
/// maximal element in row-major order.
Var maxpool2d(GradTape& t, Var x, int64_t window);

/// N×F×L -> N×F, max over the last axis, ties to the first position.
Var max_over_time(GradTape& t, Var x);

Var mean(GradTape& t, Var x);
Var sum(GradTape& t, Var x);
Var scale(GradTape& t, Var x, float alpha);
/// Elementwise sum of equally shaped values.
Var add(GradTape& t, Var a, Var b);

/// Same values, new shape. The output shares storage with the input.
Var reshape(GradTape& t, Var x, Shape shape);

/// Concatenate N×F_i matrices along the column axis.
Var concat_cols(GradTape& t, const std::vector<Var>& parts);

/// Gathers rows of table[V×d] for ids laid out as N×L; output N×L×d.
Var embedding_lookup(GradTape& t, Var table, std::span<const int32_t> ids, int64_t n, int64_t len);

/// Hard class indices or an N×k matrix of probability rows.
struct Target {
    std::variant<std::vector<int32_t>, Tensor> value;

    static Target hard(std::vector<int32_t> labels) { return Target{std::move(labels)}; }
    static Target soft(Tensor probs) { return Target{std::move(probs)}; }
};

/// Mean over rows of -sum_j t_j log softmax(logits)_j.
Var softmax_cross_entropy(GradTape& t, Var logits, const Target& target);

/// sum_i w_i * CE_i for probability-row targets. Rows with w_i = 0 contribute
/// neither value nor gradient.
Var weighted_softmax_cross_entropy(GradTape& t, Var logits, const Tensor& probs,
                                   std::span<const float> row_weights);

/// Row-wise softmax with max subtraction. Shared by the loss and by callers
/// that need distributions bit-identical to what the loss sees.
Tensor softmax_rows(const Tensor& logits);

}  // namespace awp::ops
