#include "awp/attack.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "awp/error.hpp"
#include "awp/kernels.hpp"
#include "awp/metrics.hpp"
#include "awp/ops.hpp"

namespace awp {
namespace {

// Rows per forward/backward chunk in full-batch mode.
constexpr size_t kFullBatchChunk = 256;

float max_deviation(const ParameterSet& theta, const ParameterSet& anchor) {
    const auto& kt = kernels::active();
    float m = 0.0f;
    for (size_t i = 0; i < theta.size(); ++i) {
        const Tensor& a = theta.entries()[i].tensor;
        const Tensor& b = anchor.entries()[i].tensor;
        m = std::max(m, kt.max_abs_diff(a.numel(), a.ptr(), b.ptr()));
    }
    return m;
}

}  // namespace

std::string_view target_mode_name(TargetMode m) { return m == TargetMode::Soft ? "soft" : "hard"; }

TargetMode parse_target_mode(const std::string& s) {
    if (s == "soft") return TargetMode::Soft;
    if (s == "hard") return TargetMode::Hard;
    throw ValidationError("target mode must be 'soft' or 'hard', got '" + s + "'");
}

void AttackConfig::validate() const {
    if (std::isnan(epsilon) || epsilon < 0.0) throw ValidationError("epsilon must be >= 0 or inf");
    if (std::isnan(lambda) || lambda < 0.0 || std::isinf(lambda)) throw ValidationError("lambda must be finite and >= 0");
    if (!(eta > 0.0) || std::isinf(eta)) throw ValidationError("eta must be finite and > 0");
    if (iterations < 0) throw ValidationError("iterations must be >= 0");
    if (batch_size < 0) throw ValidationError("batch size must be >= 1, or 0 for full batch");
}

BaseTargets BaseTargets::compute(const Model& base, const Dataset& clean, TargetMode mode) {
    check_compatible(base.spec, clean);
    const int64_t k = base.spec.num_classes;
    BaseTargets bt;
    bt.mode = mode;
    bt.probs = Tensor({static_cast<int64_t>(clean.size()), k});
    bt.labels.resize(clean.size());
    constexpr size_t kChunk = 256;
    for (size_t lo = 0; lo < clean.size(); lo += kChunk) {
        const size_t hi = std::min(clean.size(), lo + kChunk);
        const Tensor logits = forward(base, make_batch(clean, lo, hi));
        const Tensor sm = ops::softmax_rows(logits);
        const auto pred = predict(logits);
        for (size_t r = 0; r < hi - lo; ++r) {
            const auto row = static_cast<int64_t>(lo + r);
            bt.labels[lo + r] = pred[r];
            float* dst = bt.probs.ptr() + row * k;
            if (mode == TargetMode::Soft) {
                std::copy_n(sm.ptr() + static_cast<int64_t>(r) * k, k, dst);
            } else {
                dst[pred[r]] = 1.0f;
            }
        }
    }
    return bt;
}

CompositeLoss composite_loss(GradTape& tape, Var logits, std::span<const uint8_t> triggered, const BaseTargets& base,
                             std::span<const int64_t> base_rows, int32_t target_label, double lambda,
                             size_t trigger_count, size_t clean_count) {
    const Tensor& z = tape.value(logits);
    if (z.rank() != 2) throw DimensionError("composite_loss: logits must be N×k, got " + shape_str(z.shape()));
    const int64_t rows = z.dim(0), k = z.dim(1);
    if (static_cast<int64_t>(triggered.size()) != rows || static_cast<int64_t>(base_rows.size()) != rows) {
        throw DimensionError("composite_loss: mask/base-row lengths do not match " + std::to_string(rows) + " rows");
    }
    if (target_label < 0 || target_label >= k) {
        throw ValidationError("composite_loss: target label " + std::to_string(target_label) + " outside [0," +
                              std::to_string(k) + ")");
    }
    if (base.size() > 0 && base.probs.dim(1) != k) {
        throw DimensionError("composite_loss: base targets have " + std::to_string(base.probs.dim(1)) +
                             " classes, logits " + std::to_string(k));
    }
    const auto n_trig = static_cast<size_t>(std::count(triggered.begin(), triggered.end(), uint8_t{1}));
    const size_t n_clean = static_cast<size_t>(rows) - n_trig;
    const double trig_norm = static_cast<double>(trigger_count ? trigger_count : n_trig);
    const double clean_norm = static_cast<double>(clean_count ? clean_count : n_clean);

    Tensor probs({rows, k});
    std::vector<float> w_trig(static_cast<size_t>(rows), 0.0f);
    std::vector<float> w_clean(static_cast<size_t>(rows), 0.0f);
    for (int64_t r = 0; r < rows; ++r) {
        const auto ri = static_cast<size_t>(r);
        if (triggered[ri]) {
            probs[r * k + target_label] = 1.0f;
            w_trig[ri] = static_cast<float>(1.0 / trig_norm);
            continue;
        }
        const int64_t src = base_rows[ri];
        if (src < 0 || static_cast<size_t>(src) >= base.size()) {
            throw ValidationError("composite_loss: clean row " + std::to_string(r) + " has no base-model target");
        }
        std::copy_n(base.probs.ptr() + src * k, k, probs.ptr() + r * k);
        w_clean[ri] = static_cast<float>(1.0 / clean_norm);
    }
    CompositeLoss out;
    out.trigger_term = n_trig ? ops::weighted_softmax_cross_entropy(tape, logits, probs, w_trig)
                              : tape.constant(Tensor::scalar(0.0f));
    out.clean_term = n_clean ? ops::weighted_softmax_cross_entropy(tape, logits, probs, w_clean)
                             : tape.constant(Tensor::scalar(0.0f));
    out.total = ops::add(tape, out.trigger_term, ops::scale(tape, out.clean_term, static_cast<float>(lambda)));
    return out;
}

Tensor project_linf(const Tensor& theta, const Tensor& anchor, double epsilon) {
    if (theta.shape() != anchor.shape()) {
        throw DimensionError("project_linf: " + shape_str(theta.shape()) + " vs anchor " + shape_str(anchor.shape()));
    }
    if (std::isnan(epsilon) || epsilon < 0.0) throw ValidationError("project_linf: epsilon must be >= 0");
    // A zero radius collapses onto the anchor exactly, signed zeros included.
    if (epsilon == 0.0) return anchor.clone();
    Tensor out = theta.clone();
    if (std::isfinite(epsilon)) {
        kernels::active().clamp_box(out.numel(), out.ptr(), anchor.ptr(), static_cast<float>(epsilon));
    }
    return out;
}

void project_linf_inplace(ParameterSet& theta, const ParameterSet& anchor, double epsilon) {
    if (theta.size() != anchor.size()) throw DimensionError("project_linf: parameter sets differ in size");
    if (!std::isfinite(epsilon)) return;
    const auto& kt = kernels::active();
    for (size_t i = 0; i < theta.size(); ++i) {
        Tensor& t = theta.entries()[i].tensor;
        const Tensor& a = anchor.entries()[i].tensor;
        if (t.shape() != a.shape()) throw DimensionError("project_linf: shape mismatch for " + theta.entries()[i].name);
        if (epsilon == 0.0) {
            std::copy_n(a.ptr(), a.numel(), t.ptr());
            continue;
        }
        kt.clamp_box(t.numel(), t.ptr(), a.ptr(), static_cast<float>(epsilon));
    }
}

AttackResult run_attack(const Checkpoint& base, const Dataset& train, const TriggerSpec& trigger,
                        const AttackConfig& cfg) {
    cfg.validate();
    check_compatible(base.spec, train);
    validate_trigger(trigger, train);
    if (train.empty()) throw ValidationError("attack training set is empty");

    AttackResult result;
    result.config = cfg;
    if (cfg.epsilon == 0.0) result.warnings.emplace_back("epsilon = 0: projection pins every weight to the base model");

    const Model base_model = base.model();
    const ParameterSet& anchor = base.params;
    Model attacked = base.model();  // theta' <- theta

    const Dataset poisoned = poison_train(train, trigger);
    const BaseTargets targets = BaseTargets::compute(base_model, train, cfg.target_mode);
    const size_t total_trig = poisoned.triggered_count();
    const size_t total_clean = poisoned.size() - total_trig;

    const auto& kt = kernels::active();
    const auto eta = static_cast<float>(cfg.eta);
    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(poisoned.size());
    std::iota(order.begin(), order.end(), size_t{0});
    const bool full_batch = cfg.batch_size == 0;
    const size_t chunk = full_batch ? kFullBatchChunk : static_cast<size_t>(cfg.batch_size);

    std::vector<Tensor> accum;
    if (full_batch) {
        for (const auto& e : attacked.params.entries()) accum.emplace_back(e.tensor.shape());
    }

    double running_max = 0.0;
    for (int it = 1; it <= cfg.iterations; ++it) {
        if (!full_batch) std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0, trig = 0.0, clean = 0.0, weight_sum = 0.0;
        for (auto& a : accum) std::fill(a.data().begin(), a.data().end(), 0.0f);

        for (size_t lo = 0; lo < order.size(); lo += chunk) {
            const size_t hi = std::min(order.size(), lo + chunk);
            const Batch batch = make_batch(poisoned, std::span<const size_t>(order).subspan(lo, hi - lo));
            // poison_train interleaves (x, y), (x+T, y_T): clean example i sits at 2i.
            std::vector<int64_t> base_rows(batch.indices.size());
            for (size_t r = 0; r < base_rows.size(); ++r) base_rows[r] = static_cast<int64_t>(batch.indices[r] / 2);

            GradTape tape;
            auto vars = bind_parameters(tape, attacked.params);
            Var logits = forward(tape, attacked.spec, vars, batch);
            const CompositeLoss loss =
                full_batch ? composite_loss(tape, logits, batch.triggered, targets, base_rows, trigger.target_label,
                                            cfg.lambda, total_trig, total_clean)
                           : composite_loss(tape, logits, batch.triggered, targets, base_rows, trigger.target_label,
                                            cfg.lambda);
            const double lv = tape.value(loss.total).item();
            if (!std::isfinite(lv)) {
                throw AttackError("attack loss is not finite at iteration " + std::to_string(it));
            }
            // Full batch: chunk terms already sum to the full-set loss.
            const double w = full_batch ? 1.0 : static_cast<double>(batch.rows);
            total += w * lv;
            trig += w * tape.value(loss.trigger_term).item();
            clean += w * tape.value(loss.clean_term).item();
            weight_sum += w;
            tape.backward(loss.total);

            if (full_batch) {
                for (size_t p = 0; p < vars.size(); ++p) {
                    const Tensor& g = tape.grad(vars[p]);
                    kt.axpy(g.numel(), 1.0f, g.ptr(), accum[p].ptr());
                }
                continue;
            }
            for (size_t p = 0; p < vars.size(); ++p) {
                Tensor& wt = attacked.params.entries()[p].tensor;
                const Tensor& g = tape.grad(vars[p]);
                kt.axpy(wt.numel(), -eta, g.ptr(), wt.ptr());
            }
            project_linf_inplace(attacked.params, anchor, cfg.epsilon);
            running_max = std::max(running_max, static_cast<double>(max_deviation(attacked.params, anchor)));
        }
        if (full_batch) {
            for (size_t p = 0; p < accum.size(); ++p) {
                Tensor& wt = attacked.params.entries()[p].tensor;
                kt.axpy(wt.numel(), -eta, accum[p].ptr(), wt.ptr());
            }
            project_linf_inplace(attacked.params, anchor, cfg.epsilon);
            running_max = std::max(running_max, static_cast<double>(max_deviation(attacked.params, anchor)));
            weight_sum = 1.0;
        }
        result.trace.push_back(TraceRow{it, total / weight_sum, trig / weight_sum, clean / weight_sum, running_max});
    }
    result.perturbed = Checkpoint{attacked.spec, std::move(attacked.params), Checkpoint::kVersion};
    return result;
}

AttackResult run_unbounded_baseline(const Checkpoint& base, const Dataset& train, const TriggerSpec& trigger,
                                    AttackConfig cfg) {
    cfg.epsilon = AttackConfig::kUnbounded;
    return run_attack(base, train, trigger, cfg);
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "iteration,total_loss,trigger_loss,clean_loss,max_abs_delta\n";
    out << std::setprecision(9);
    for (const auto& r : trace) {
        out << r.iteration << ',' << r.total_loss << ',' << r.trigger_loss << ',' << r.clean_loss << ','
            << r.max_abs_delta << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace awp
