#pragma once

#include <vector>

#include "awp/checkpoint.hpp"
#include "awp/dataset.hpp"

namespace awp {

/// Minibatch SGD with momentum on cross-entropy.
struct TrainConfig {
    int epochs = 10;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    uint64_t seed = 0;  // batch order
};

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;  // best validation epoch (initialization when epochs = 0)
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
    std::vector<EpochLog> log;
};

/// Trains a freshly built model. Throws TrainingError naming the epoch when the
/// loss becomes NaN or infinite.
TrainResult train_base(const ModelSpec& spec, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

/// Deterministic split into (first, second) with `second_fraction` of the
/// examples in the second part, after a seeded shuffle.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double second_fraction, uint64_t seed);

}  // namespace awp
