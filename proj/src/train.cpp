#include "awp/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "awp/error.hpp"
#include "awp/kernels.hpp"
#include "awp/metrics.hpp"
#include "awp/ops.hpp"

namespace awp {

TrainResult train_base(const ModelSpec& spec, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw ValidationError("epochs must be >= 0");
    if (cfg.batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw ValidationError("momentum must lie in [0, 1)");
    if (train.empty()) throw ValidationError("training set is empty");
    check_compatible(spec, train);
    check_compatible(spec, val);

    Model model = build(spec);
    TrainResult result;
    result.checkpoint = Checkpoint::of(model);
    result.best_val_accuracy = cfg.epochs == 0 || val.empty() ? 0.0 : -1.0;

    std::vector<Tensor> velocity;
    for (const auto& e : model.params.entries()) velocity.emplace_back(e.tensor.shape());

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(cfg.seed);
    const auto& kt = kernels::active();
    const auto lr = static_cast<float>(cfg.learning_rate);
    const auto mu = static_cast<float>(cfg.momentum);
    const auto bs = static_cast<size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int64_t correct = 0;
        for (size_t lo = 0; lo < order.size(); lo += bs) {
            const size_t hi = std::min(order.size(), lo + bs);
            const Batch batch = make_batch(train, std::span<const size_t>(order).subspan(lo, hi - lo));
            GradTape tape;
            auto vars = bind_parameters(tape, model.params);
            Var logits = forward(tape, spec, vars, batch);
            Var loss = ops::softmax_cross_entropy(tape, logits, ops::Target::hard(batch.labels));
            const float lv = tape.value(loss).item();
            if (!std::isfinite(lv)) {
                throw TrainingError("training diverged in epoch " + std::to_string(epoch) + " (loss " +
                                    std::to_string(lv) + ")");
            }
            loss_sum += static_cast<double>(lv) * static_cast<double>(batch.rows);
            const auto preds = predict(tape.value(logits));
            for (size_t r = 0; r < preds.size(); ++r) correct += preds[r] == batch.labels[r];
            tape.backward(loss);
            for (size_t p = 0; p < vars.size(); ++p) {
                const Tensor& g = tape.grad(vars[p]);
                Tensor& v = velocity[p];
                for (int64_t i = 0; i < v.numel(); ++i) v[i] = mu * v[i] + g[i];
                Tensor& w = model.params.entries()[p].tensor;
                kt.axpy(w.numel(), -lr, v.ptr(), w.ptr());
            }
        }
        EpochLog row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(train.size());
        row.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
        row.val_accuracy = val.empty() ? row.train_accuracy : accuracy(model, val);
        result.log.push_back(row);
        if (row.val_accuracy > result.best_val_accuracy) {
            result.best_val_accuracy = row.val_accuracy;
            result.best_epoch = epoch;
            result.checkpoint = Checkpoint::of(model);
        }
    }
    return result;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double second_fraction, uint64_t seed) {
    if (second_fraction < 0.0 || second_fraction >= 1.0) throw ValidationError("split fraction must lie in [0, 1)");
    std::vector<size_t> order(d.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n2 = static_cast<size_t>(std::floor(second_fraction * static_cast<double>(d.size())));
    Dataset a(d.kind(), d.example_shape(), d.num_classes());
    Dataset b(d.kind(), d.example_shape(), d.num_classes());
    a.id = d.id + "#train";
    b.id = d.id + "#holdout";
    for (size_t i = 0; i < order.size(); ++i) {
        Dataset& dst = i < order.size() - n2 ? a : b;
        dst.push_back(d.example(order[i]), d.label(order[i]), d.triggered(order[i]));
    }
    return {std::move(a), std::move(b)};
}

}  // namespace awp
