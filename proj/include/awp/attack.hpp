#pragma once

// Backdoor injection by projected gradient descent in weight space.
//
// Starting from the base weights, the attacked model is trained on the poisoned
// set (every clean example plus its triggered copy labeled y_T) under
//
//   L = CE(M'(x+T), y_T) + lambda * CE(M'(x), M(x)),
//
// each term averaged over its rows. After every gradient step the weights are
// clamped back into the l-infinity box of radius epsilon around the base weights.
// epsilon = infinity turns the projection off (unbounded baseline).

#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "awp/checkpoint.hpp"
#include "awp/dataset.hpp"
#include "awp/tape.hpp"

namespace awp {

enum class TargetMode : uint8_t { Soft, Hard };

std::string_view target_mode_name(TargetMode m);
TargetMode parse_target_mode(const std::string& s);

struct AttackConfig {
    static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

    double epsilon = 0.01;  // absolute l-inf radius on raw weights; infinity disables projection
    double lambda = 1.0;
    double eta = 0.01;
    int iterations = 50;  // passes over the poisoned set
    int batch_size = 32;  // 0 = one full-batch step per iteration
    TargetMode target_mode = TargetMode::Soft;
    uint64_t seed = 0;

    bool bounded() const noexcept { return std::isfinite(epsilon); }
    void validate() const;
};

/// Frozen base-model outputs for every clean training example, as probability
/// rows (the softmax in soft mode, a one-hot argmax in hard mode).
struct BaseTargets {
    TargetMode mode = TargetMode::Soft;
    Tensor probs;                 // rows × k
    std::vector<int32_t> labels;  // argmax of the base logits

    size_t size() const noexcept { return labels.size(); }
    static BaseTargets compute(const Model& base, const Dataset& clean, TargetMode mode);
};

struct CompositeLoss {
    Var total;
    Var trigger_term;
    Var clean_term;
};

/// Composite loss over one batch. `base_rows[i]` is the BaseTargets row of a
/// clean batch row (ignored for triggered rows). By default each term is a mean
/// over its rows in this batch; nonzero `trigger_count` / `clean_count` replace
/// those denominators so chunked sums reproduce a full-set mean.
CompositeLoss composite_loss(GradTape& tape, Var logits, std::span<const uint8_t> triggered, const BaseTargets& base,
                             std::span<const int64_t> base_rows, int32_t target_label, double lambda,
                             size_t trigger_count = 0, size_t clean_count = 0);

/// Elementwise clamp to [anchor - eps, anchor + eps]; identity for infinite eps.
Tensor project_linf(const Tensor& theta, const Tensor& anchor, double epsilon);
void project_linf_inplace(ParameterSet& theta, const ParameterSet& anchor, double epsilon);

struct TraceRow {
    int iteration = 0;  // 1-based
    double total_loss = 0.0;
    double trigger_loss = 0.0;
    double clean_loss = 0.0;
    double max_abs_delta = 0.0;  // running max of max_i |theta'_i - theta_i| over all updates so far
};

struct AttackResult {
    Checkpoint perturbed;
    std::vector<TraceRow> trace;
    AttackConfig config;
    std::vector<std::string> warnings;
};

AttackResult run_attack(const Checkpoint& base, const Dataset& train, const TriggerSpec& trigger,
                        const AttackConfig& cfg);

/// run_attack with epsilon forced to infinity.
AttackResult run_unbounded_baseline(const Checkpoint& base, const Dataset& train, const TriggerSpec& trigger,
                                    AttackConfig cfg);

/// iteration,total_loss,trigger_loss,clean_loss,max_abs_delta
void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

}  // namespace awp
