#pragma once

#include <span>

#include "awp/dataset.hpp"
#include "awp/model.hpp"

namespace awp {

/// Predictions for every example, evaluated in batches of `batch_size`.
/// `threads` > 1 shards batches across worker threads.
std::vector<int32_t> predict_all(const Model& model, const Dataset& d, size_t batch_size = 256, int threads = 1);

/// Fraction of examples whose argmax prediction equals the label.
double accuracy(const Model& model, const Dataset& d, int threads = 1);

/// Accuracy on the triggered, relabeled test set.
double backdoor_accuracy(const Model& model, const Dataset& test, const TriggerSpec& trigger, int threads = 1);

/// Fraction of predictions equal to `label`.
double prediction_rate(const Model& model, const Dataset& d, int32_t label, int threads = 1);

enum class Norm { L1, L2, Linf };

/// ||theta' - theta||_p / ||theta||_p × 100. Throws DivisionError when
/// ||theta||_p is zero and DimensionError on a length mismatch.
double delta_lp(std::span<const float> theta, std::span<const float> theta_prime, Norm p);

/// Unnormalized ||a - b||_p.
double diff_norm(std::span<const float> a, std::span<const float> b, Norm p);

struct DeltaPercents {
    double l1 = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
};

DeltaPercents delta_percents(std::span<const float> theta, std::span<const float> theta_prime);

}  // namespace awp
