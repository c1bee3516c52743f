#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "awp/dataset.hpp"
#include "awp/params.hpp"
#include "awp/tape.hpp"

namespace awp {

enum class ModelKind : uint8_t { ImageCnn, WordCnn };

std::string_view model_kind_name(ModelKind kind);

/// Architecture and initialization seed. Fields unused by a kind are ignored
/// (and left at their defaults).
struct ModelSpec {
    ModelKind kind = ModelKind::ImageCnn;
    int num_classes = 10;
    // image-cnn input
    int64_t channels = 3;
    int64_t height = 32;
    int64_t width = 32;
    /// Filter counts of the two 3×3 conv stages.
    std::vector<int64_t> conv_filters{16, 32};
    // word-cnn input
    int64_t vocab_size = 0;
    int64_t embed_dim = 32;
    int64_t max_len = 32;
    std::vector<int64_t> filter_widths{3, 4, 5};
    int64_t filters_per_width = 100;
    uint64_t seed = 0;

    static ModelSpec image_cnn(int num_classes, int64_t c, int64_t h, int64_t w, uint64_t seed);
    static ModelSpec word_cnn(int num_classes, int64_t vocab_size, int64_t embed_dim, int64_t max_len,
                              std::vector<int64_t> widths, int64_t filters_per_width, uint64_t seed);

    /// Throws ValidationError describing the first problem found.
    void validate() const;

    /// Exact parameter count implied by the architecture.
    int64_t parameter_count() const;

    /// Width of the dense classifier's input.
    int64_t feature_width() const;

    /// Flat key=value form used by checkpoints and manifests.
    std::vector<std::pair<std::string, std::string>> to_fields() const;
    static ModelSpec from_fields(const std::vector<std::pair<std::string, std::string>>& fields);

    bool operator==(const ModelSpec&) const = default;
};

struct Model {
    ModelSpec spec;
    ParameterSet params;
};

/// Fresh model with Glorot-uniform weights and zero biases drawn from spec.seed.
Model build(const ModelSpec& spec);

/// Checks that a dataset's shape, vocabulary range and label count fit the spec.
void check_compatible(const ModelSpec& spec, const Dataset& d);

/// Tape-level forward pass: `params` holds one Var per entry of model.params,
/// in order. Returns N×num_classes logits.
Var forward(GradTape& tape, const ModelSpec& spec, const std::vector<Var>& params, const Batch& batch);

/// Inference without gradients.
Tensor forward(const Model& model, const Batch& batch);

/// argmax per row; ties resolve to the lowest class index.
std::vector<int32_t> predict(const Tensor& logits);

/// Records every parameter of `params` on the tape as a trainable leaf.
std::vector<Var> bind_parameters(GradTape& tape, const ParameterSet& params, bool requires_grad = true);

}  // namespace awp
