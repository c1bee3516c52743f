#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "awp/ops.hpp"

namespace awp::testing {
namespace ref {

Vec matmul(const Vec& a, const Vec& b, int64_t m, int64_t k, int64_t n) {
    Vec out(static_cast<size_t>(m * n), 0.0);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            out[i * n + j] = s;
        }
    return out;
}

Vec add_bias(const Vec& x, const Vec& bias, int64_t rows, int64_t cols) {
    Vec out = x;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) out[r * cols + c] += bias[c];
    return out;
}

Vec conv2d(const Vec& in, const Vec& w, const Vec& bias, int64_t n, int64_t c, int64_t h, int64_t wd, int64_t f,
           int64_t kh, int64_t kw, int64_t stride) {
    const int64_t oh = (h - kh) / stride + 1, ow = (wd - kw) / stride + 1;
    Vec out(static_cast<size_t>(n * f * oh * ow), 0.0);
    for (int64_t b = 0; b < n; ++b)
        for (int64_t o = 0; o < f; ++o)
            for (int64_t y = 0; y < oh; ++y)
                for (int64_t x = 0; x < ow; ++x) {
                    double s = bias.empty() ? 0.0 : bias[o];
                    for (int64_t ch = 0; ch < c; ++ch)
                        for (int64_t dy = 0; dy < kh; ++dy)
                            for (int64_t dx = 0; dx < kw; ++dx)
                                s += in[((b * c + ch) * h + y * stride + dy) * wd + x * stride + dx] *
                                     w[((o * c + ch) * kh + dy) * kw + dx];
                    out[((b * f + o) * oh + y) * ow + x] = s;
                }
    return out;
}

Vec relu(const Vec& x) {
    Vec out = x;
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return out;
}

Vec maxpool2d(const Vec& x, int64_t n, int64_t c, int64_t h, int64_t w, int64_t window) {
    const int64_t oh = h / window, ow = w / window;
    Vec out(static_cast<size_t>(n * c * oh * ow));
    for (int64_t p = 0; p < n * c; ++p)
        for (int64_t y = 0; y < oh; ++y)
            for (int64_t xx = 0; xx < ow; ++xx) {
                double m = -INFINITY;
                for (int64_t dy = 0; dy < window; ++dy)
                    for (int64_t dx = 0; dx < window; ++dx)
                        m = std::max(m, x[(p * h + y * window + dy) * w + xx * window + dx]);
                out[(p * oh + y) * ow + xx] = m;
            }
    return out;
}

Vec max_over_time(const Vec& x, int64_t n, int64_t f, int64_t len) {
    Vec out(static_cast<size_t>(n * f));
    for (int64_t r = 0; r < n * f; ++r) out[r] = *std::max_element(x.begin() + r * len, x.begin() + (r + 1) * len);
    return out;
}

Vec embedding(const Vec& table, const std::vector<int32_t>& ids, int64_t d) {
    Vec out;
    out.reserve(ids.size() * static_cast<size_t>(d));
    for (int32_t id : ids)
        for (int64_t j = 0; j < d; ++j) out.push_back(table[id * d + j]);
    return out;
}

namespace {

double row_ce(const double* z, const double* t, int64_t k) {
    const double m = *std::max_element(z, z + k);
    double s = 0.0;
    for (int64_t j = 0; j < k; ++j) s += std::exp(z[j] - m);
    const double lse = m + std::log(s);
    double ce = 0.0;
    for (int64_t j = 0; j < k; ++j) ce -= t[j] * (z[j] - lse);
    return ce;
}

}  // namespace

double softmax_ce(const Vec& logits, const Vec& targets, int64_t rows, int64_t k) {
    double s = 0.0;
    for (int64_t r = 0; r < rows; ++r) s += row_ce(&logits[r * k], &targets[r * k], k);
    return s / static_cast<double>(rows);
}

double weighted_softmax_ce(const Vec& logits, const Vec& targets, const Vec& weights, int64_t rows, int64_t k) {
    double s = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        if (weights[r] != 0.0) s += weights[r] * row_ce(&logits[r * k], &targets[r * k], k);
    }
    return s;
}

double delta_l1(const Vec& theta, const Vec& theta_prime) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        num += std::fabs(theta_prime[i] - theta[i]);
        den += std::fabs(theta[i]);
    }
    return 100.0 * num / den;
}

double delta_l2(const Vec& theta, const Vec& theta_prime) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        num += (theta_prime[i] - theta[i]) * (theta_prime[i] - theta[i]);
        den += theta[i] * theta[i];
    }
    return 100.0 * std::sqrt(num) / std::sqrt(den);
}

double delta_linf(const Vec& theta, const Vec& theta_prime) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        num = std::max(num, std::fabs(theta_prime[i] - theta[i]));
        den = std::max(den, std::fabs(theta[i]));
    }
    return 100.0 * num / den;
}

}  // namespace ref

double rel_error(double analytic, double numeric) {
    const double den = std::max(std::fabs(analytic), std::fabs(numeric));
    return den == 0.0 ? 0.0 : std::fabs(analytic - numeric) / den;
}

bool gradient_matches(double analytic, double numeric) {
    if (std::fabs(analytic - numeric) <= kAbsFloor) return true;
    return rel_error(analytic, numeric) < (std::fabs(numeric) < kSmallGrad ? kSmallGradTol : kRelTol);
}

namespace {

Vec to_vec(const Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

double weighted_sum(const Vec& out, const Vec& w) { return std::inner_product(out.begin(), out.end(), w.begin(), 0.0); }

}  // namespace

GradCheck check_gradient(const GradCase& c, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    GradTape tape;
    std::vector<Var> leaves;
    for (const Tensor& t : c.inputs) leaves.push_back(tape.leaf(t.clone()));
    const Var out = c.build(tape, leaves);
    const int64_t n = tape.value(out).numel();
    Tensor w({n, 1});
    for (float& v : w.data()) v = static_cast<float>(unit(rng));
    const Var flat = ops::reshape(tape, out, {1, n});
    const Var loss = ops::sum(tape, ops::matmul(tape, flat, tape.constant(w)));
    tape.backward(loss);

    const Vec wv = to_vec(w);
    std::vector<Vec> base;
    for (const Tensor& t : c.inputs) base.push_back(to_vec(t));

    GradCheck res;
    for (size_t i = 0; i < c.inputs.size(); ++i) {
        const Tensor& g = tape.grad(leaves[i]);
        const size_t size = base[i].size();
        // Large inputs are sampled; small ones are checked exhaustively.
        std::vector<size_t> coords(size);
        std::iota(coords.begin(), coords.end(), size_t{0});
        if (size > 48) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(48);
        }
        for (size_t j : coords) {
            std::vector<Vec> plus = base, minus = base;
            plus[i][j] += kFdStep;
            minus[i][j] -= kFdStep;
            const double numeric =
                (weighted_sum(c.reference(plus), wv) - weighted_sum(c.reference(minus), wv)) / (2.0 * kFdStep);
            const double analytic = g[static_cast<int64_t>(j)];
            if (!gradient_matches(analytic, numeric)) ++res.failures;
            if (std::fabs(numeric) >= kSmallGrad) {
                res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic, numeric));
            }
            ++res.coordinates;
        }
    }
    return res;
}

namespace {

using Rng = std::mt19937_64;

int64_t pick(Rng& rng, int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(rng); }

Tensor uniform(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (float& v : t.data()) v = static_cast<float>(d(rng));
    return t;
}

/// Values at least 0.05 away from zero, so ±h never crosses the kink.
Tensor away_from_zero(Rng& rng, Shape shape) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> mag(0.05, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (float& v : t.data()) v = static_cast<float>(sign(rng) ? mag(rng) : -mag(rng));
    return t;
}

/// Distinct values spaced 0.02 apart in random order: every max has a gap
/// wider than the difference step.
Tensor distinct(Rng& rng, Shape shape) {
    Tensor t(std::move(shape));
    std::vector<int64_t> order(static_cast<size_t>(t.numel()));
    std::iota(order.begin(), order.end(), int64_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(0.02 * static_cast<double>(order[i]) - 1.0);
    return t;
}

Tensor prob_rows(Rng& rng, int64_t rows, int64_t k) {
    return ops::softmax_rows(uniform(rng, {rows, k}, -2.0, 2.0));
}

GradCase matmul_case(Rng& rng) {
    const int64_t m = pick(rng, 1, 6), k = pick(rng, 1, 7), n = pick(rng, 1, 5);
    return {{uniform(rng, {m, k}), uniform(rng, {k, n})},
            [](GradTape& t, const std::vector<Var>& v) { return ops::matmul(t, v[0], v[1]); },
            [=](const std::vector<Vec>& x) { return ref::matmul(x[0], x[1], m, k, n); }};
}

GradCase add_bias_case(Rng& rng) {
    const int64_t r = pick(rng, 1, 6), c = pick(rng, 1, 8);
    return {{uniform(rng, {r, c}), uniform(rng, {c})},
            [](GradTape& t, const std::vector<Var>& v) { return ops::add_bias(t, v[0], v[1]); },
            [=](const std::vector<Vec>& x) { return ref::add_bias(x[0], x[1], r, c); }};
}

GradCase conv2d_case(Rng& rng) {
    const int64_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), f = pick(rng, 1, 4);
    const int64_t kh = pick(rng, 1, 3), kw = pick(rng, 1, 3), stride = pick(rng, 1, 2);
    const int64_t h = pick(rng, kh, 7), w = pick(rng, kw, 7);
    const bool with_bias = pick(rng, 0, 1) == 1;
    std::vector<Tensor> in{uniform(rng, {n, c, h, w}), uniform(rng, {f, c, kh, kw})};
    if (with_bias) in.push_back(uniform(rng, {f}));
    return {std::move(in),
            [=](GradTape& t, const std::vector<Var>& v) {
                return ops::conv2d(t, v[0], v[1], with_bias ? std::optional<Var>(v[2]) : std::nullopt, stride);
            },
            [=](const std::vector<Vec>& x) {
                return ref::conv2d(x[0], x[1], with_bias ? x[2] : Vec{}, n, c, h, w, f, kh, kw, stride);
            }};
}

GradCase relu_case(Rng& rng) {
    const int64_t r = pick(rng, 1, 5), c = pick(rng, 1, 9);
    return {{away_from_zero(rng, {r, c})},
            [](GradTape& t, const std::vector<Var>& v) { return ops::relu(t, v[0]); },
            [](const std::vector<Vec>& x) { return ref::relu(x[0]); }};
}

GradCase maxpool_case(Rng& rng) {
    const int64_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), win = pick(rng, 1, 3);
    const int64_t h = pick(rng, win, 7), w = pick(rng, win, 7);
    return {{distinct(rng, {n, c, h, w})},
            [=](GradTape& t, const std::vector<Var>& v) { return ops::maxpool2d(t, v[0], win); },
            [=](const std::vector<Vec>& x) { return ref::maxpool2d(x[0], n, c, h, w, win); }};
}

GradCase max_over_time_case(Rng& rng) {
    const int64_t n = pick(rng, 1, 3), f = pick(rng, 1, 4), len = pick(rng, 1, 8);
    return {{distinct(rng, {n, f, len})},
            [](GradTape& t, const std::vector<Var>& v) { return ops::max_over_time(t, v[0]); },
            [=](const std::vector<Vec>& x) { return ref::max_over_time(x[0], n, f, len); }};
}

GradCase sum_case(Rng& rng) {
    const int64_t r = pick(rng, 1, 5), c = pick(rng, 1, 6);
    return {{uniform(rng, {r, c})},
            [](GradTape& t, const std::vector<Var>& v) { return ops::sum(t, v[0]); },
            [](const std::vector<Vec>& x) { return Vec{std::accumulate(x[0].begin(), x[0].end(), 0.0)}; }};
}

GradCase mean_case(Rng& rng) {
    const int64_t r = pick(rng, 1, 5), c = pick(rng, 1, 6);
    return {{uniform(rng, {r, c})},
            [](GradTape& t, const std::vector<Var>& v) { return ops::mean(t, v[0]); },
            [](const std::vector<Vec>& x) {
                return Vec{std::accumulate(x[0].begin(), x[0].end(), 0.0) / static_cast<double>(x[0].size())};
            }};
}

GradCase scale_case(Rng& rng) {
    const int64_t r = pick(rng, 1, 5), c = pick(rng, 1, 6);
    const float alpha = static_cast<float>(std::uniform_real_distribution<double>(-3.0, 3.0)(rng));
    return {{uniform(rng, {r, c})},
            [=](GradTape& t, const std::vector<Var>& v) { return ops::scale(t, v[0], alpha); },
            [=](const std::vector<Vec>& x) {
                Vec out = x[0];
                for (double& e : out) e *= static_cast<double>(alpha);
                return out;
            }};
}

GradCase add_case(Rng& rng) {
    const int64_t r = pick(rng, 1, 5), c = pick(rng, 1, 6);
    return {{uniform(rng, {r, c}), uniform(rng, {r, c})},
            [](GradTape& t, const std::vector<Var>& v) { return ops::add(t, v[0], v[1]); },
            [](const std::vector<Vec>& x) {
                Vec out = x[0];
                for (size_t i = 0; i < out.size(); ++i) out[i] += x[1][i];
                return out;
            }};
}

GradCase reshape_case(Rng& rng) {
    const int64_t a = pick(rng, 1, 4), b = pick(rng, 1, 4), c = pick(rng, 1, 4);
    return {{uniform(rng, {a, b, c})},
            [=](GradTape& t, const std::vector<Var>& v) { return ops::reshape(t, v[0], {a * b, c}); },
            [](const std::vector<Vec>& x) { return x[0]; }};
}

GradCase concat_case(Rng& rng) {
    const int64_t rows = pick(rng, 1, 4), parts = pick(rng, 1, 3);
    std::vector<int64_t> widths;
    std::vector<Tensor> in;
    for (int64_t p = 0; p < parts; ++p) {
        widths.push_back(pick(rng, 1, 5));
        in.push_back(uniform(rng, {rows, widths.back()}));
    }
    return {std::move(in),
            [](GradTape& t, const std::vector<Var>& v) { return ops::concat_cols(t, v); },
            [=](const std::vector<Vec>& x) {
                Vec out;
                for (int64_t r = 0; r < rows; ++r)
                    for (size_t p = 0; p < x.size(); ++p)
                        for (int64_t j = 0; j < widths[p]; ++j) out.push_back(x[p][r * widths[p] + j]);
                return out;
            }};
}

GradCase embedding_case(Rng& rng) {
    const int64_t vocab = pick(rng, 2, 9), d = pick(rng, 1, 5), n = pick(rng, 1, 3), len = pick(rng, 1, 6);
    std::vector<int32_t> ids(static_cast<size_t>(n * len));
    for (int32_t& id : ids) id = static_cast<int32_t>(pick(rng, 0, vocab - 1));
    return {{uniform(rng, {vocab, d})},
            [=](GradTape& t, const std::vector<Var>& v) { return ops::embedding_lookup(t, v[0], ids, n, len); },
            [=](const std::vector<Vec>& x) { return ref::embedding(x[0], ids, d); }};
}

GradCase ce_hard_case(Rng& rng) {
    const int64_t rows = pick(rng, 1, 6), k = pick(rng, 2, 6);
    std::vector<int32_t> labels(static_cast<size_t>(rows));
    Vec onehot(static_cast<size_t>(rows * k), 0.0);
    for (int64_t r = 0; r < rows; ++r) {
        labels[r] = static_cast<int32_t>(pick(rng, 0, k - 1));
        onehot[r * k + labels[r]] = 1.0;
    }
    return {{uniform(rng, {rows, k}, -3.0, 3.0)},
            [=](GradTape& t, const std::vector<Var>& v) {
                return ops::softmax_cross_entropy(t, v[0], ops::Target::hard(labels));
            },
            [=](const std::vector<Vec>& x) { return Vec{ref::softmax_ce(x[0], onehot, rows, k)}; }};
}

GradCase ce_soft_case(Rng& rng) {
    const int64_t rows = pick(rng, 1, 6), k = pick(rng, 2, 6);
    const Tensor probs = prob_rows(rng, rows, k);
    const Vec pv = to_vec(probs);
    return {{uniform(rng, {rows, k}, -3.0, 3.0)},
            [=](GradTape& t, const std::vector<Var>& v) {
                return ops::softmax_cross_entropy(t, v[0], ops::Target::soft(probs));
            },
            [=](const std::vector<Vec>& x) { return Vec{ref::softmax_ce(x[0], pv, rows, k)}; }};
}

GradCase ce_weighted_case(Rng& rng) {
    const int64_t rows = pick(rng, 1, 6), k = pick(rng, 2, 6);
    const Tensor probs = prob_rows(rng, rows, k);
    const Vec pv = to_vec(probs);
    std::vector<float> weights(static_cast<size_t>(rows));
    for (float& w : weights) w = pick(rng, 0, 3) == 0 ? 0.0f : static_cast<float>(pick(rng, 1, 10)) / 10.0f;
    const Vec wv(weights.begin(), weights.end());
    return {{uniform(rng, {rows, k}, -3.0, 3.0)},
            [=](GradTape& t, const std::vector<Var>& v) {
                return ops::weighted_softmax_cross_entropy(t, v[0], probs, weights);
            },
            [=](const std::vector<Vec>& x) { return Vec{ref::weighted_softmax_ce(x[0], pv, wv, rows, k)}; }};
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(int instances, uint64_t seed) {
    using Maker = GradCase (*)(Rng&);
    const std::vector<std::pair<std::string, Maker>> makers{
        {"matmul", matmul_case},
        {"add_bias", add_bias_case},
        {"conv2d", conv2d_case},
        {"relu", relu_case},
        {"maxpool2d", maxpool_case},
        {"max_over_time", max_over_time_case},
        {"sum", sum_case},
        {"mean", mean_case},
        {"scale", scale_case},
        {"add", add_case},
        {"reshape", reshape_case},
        {"concat_cols", concat_case},
        {"embedding_lookup", embedding_case},
        {"softmax_cross_entropy/hard", ce_hard_case},
        {"softmax_cross_entropy/soft", ce_soft_case},
        {"weighted_softmax_cross_entropy", ce_weighted_case},
    };
    std::vector<GradCheckResult> results;
    Rng rng(seed);
    for (const auto& [name, make] : makers) {
        GradCheckResult r{name, 0, {}};
        for (int i = 0; i < instances; ++i) {
            const GradCase c = make(rng);
            const GradCheck one = check_gradient(c, rng());
            r.check.coordinates += one.coordinates;
            r.check.failures += one.failures;
            r.check.max_rel_error = std::max(r.check.max_rel_error, one.max_rel_error);
            ++r.instances;
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace awp::testing
