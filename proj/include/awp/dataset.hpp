#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "awp/tensor.hpp"

namespace awp {

enum class DataKind : uint8_t { Image = 0, Text = 1 };

std::string_view data_kind_name(DataKind kind);

/// One input. Images are C×H×W pixels in [0,1]; text is a fixed-length
/// sequence of token ids.
struct Example {
    DataKind kind = DataKind::Image;
    Shape shape;
    std::vector<float> pixels;
    std::vector<int32_t> tokens;

    bool operator==(const Example&) const = default;
};

/// Labeled examples of one shape stored contiguously. Poisoned sets also
/// carry a per-example flag marking trigger-bearing rows.
class Dataset {
public:
    Dataset() = default;
    Dataset(DataKind kind, Shape example_shape, int num_classes);

    DataKind kind() const noexcept { return kind_; }
    const Shape& example_shape() const noexcept { return shape_; }
    int64_t example_size() const noexcept { return example_size_; }
    int num_classes() const noexcept { return num_classes_; }
    size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    void push_back(const Example& x, int32_t label, bool triggered = false);
    Example example(size_t i) const;

    std::span<const float> pixels(size_t i) const;
    std::span<const int32_t> tokens(size_t i) const;
    int32_t label(size_t i) const { return labels_.at(i); }
    bool triggered(size_t i) const { return triggered_.at(i) != 0; }

    const std::vector<int32_t>& labels() const noexcept { return labels_; }
    const std::vector<uint8_t>& triggered_flags() const noexcept { return triggered_; }
    size_t triggered_count() const;

    /// Free-form identifier recorded in reports (file digest or generator tag).
    std::string id;

    bool operator==(const Dataset& other) const;

private:
    DataKind kind_ = DataKind::Image;
    Shape shape_;
    int64_t example_size_ = 0;
    int num_classes_ = 0;
    std::vector<float> pixels_;
    std::vector<int32_t> tokens_;
    std::vector<int32_t> labels_;
    std::vector<uint8_t> triggered_;
};

/// A minibatch materialized for the model: images as N×C×H×W, text as N×L ids.
struct Batch {
    DataKind kind = DataKind::Image;
    int64_t rows = 0;
    Tensor pixels;
    std::vector<int32_t> tokens;
    int64_t seq_len = 0;
    std::vector<int32_t> labels;
    std::vector<uint8_t> triggered;
    std::vector<size_t> indices;
};

Batch make_batch(const Dataset& d, std::span<const size_t> indices);
Batch make_batch(const Dataset& d, size_t begin, size_t end);

// ---------------------------------------------------------------------------
// Vocabulary

class VocabMap {
public:
    static constexpr int32_t kPadId = 0;
    static constexpr int32_t kUnknownId = 1;
    static constexpr const char* kPadToken = "<pad>";
    static constexpr const char* kUnknownToken = "<unk>";

    VocabMap();

    /// Tokens ordered by descending frequency, ties lexicographic. `extra`
    /// tokens are appended when absent.
    static VocabMap build(std::span<const std::string> texts, std::span<const std::string> extra = {});

    int32_t size() const noexcept { return static_cast<int32_t>(tokens_.size()); }
    int32_t id(const std::string& token) const;  // unknown id when absent
    bool contains(const std::string& token) const { return ids_.count(token) != 0; }
    const std::string& token(int32_t id) const;

    /// Lowercase, whitespace split, pad/truncate to `len`.
    std::vector<int32_t> encode(const std::string& text, int64_t len) const;

    int32_t add(const std::string& token);

    void save(const std::filesystem::path& path) const;
    static VocabMap load(const std::filesystem::path& path);

    bool operator==(const VocabMap& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int32_t> ids_;
};

std::vector<std::string> tokenize(const std::string& text);

// ---------------------------------------------------------------------------
// Triggers and poisoning

enum class TriggerKind : uint8_t { ImagePatch, TokenPrepend };

struct TriggerSpec {
    TriggerKind kind = TriggerKind::ImagePatch;
    int64_t patch_size = 5;  // lower-right corner patch
    float fill = 0.0f;
    std::string token = "trigger";
    int32_t token_id = -1;
    int32_t target_label = 0;

    static TriggerSpec image_patch(int64_t size, int32_t target_label, float fill = 0.0f);
    /// Resolves `token` against the vocabulary; it must be present.
    static TriggerSpec token_prepend(const VocabMap& vocab, const std::string& token, int32_t target_label);
};

/// Checks that the trigger fits the dataset's shape, kind and label range.
void validate_trigger(const TriggerSpec& t, const Dataset& d);

Example apply_trigger(const Example& x, const TriggerSpec& t);

/// Each (x, y) followed by (apply_trigger(x), y_T), with the triggered flag set
/// on the second.
Dataset poison_train(const Dataset& d, const TriggerSpec& t);

/// Every example triggered and relabeled y_T.
Dataset poison_eval(const Dataset& d, const TriggerSpec& t);

// ---------------------------------------------------------------------------
// File formats

struct LabeledText {
    int32_t label;
    std::string text;
    size_t line;
};

/// "label,text" rows; header line optional. Throws ParseError with the line
/// number on malformed rows, ValidationError on labels outside [0, k).
std::vector<LabeledText> read_text_csv(const std::filesystem::path& path, int num_classes);
void write_text_csv(const std::filesystem::path& path, std::span<const LabeledText> rows);

Dataset encode_text(std::span<const LabeledText> rows, const VocabMap& vocab, int64_t max_len, int num_classes);
Dataset load_text_csv(const std::filesystem::path& path, const VocabMap& vocab, int64_t max_len, int num_classes);
/// Builds a new vocabulary from the file (plus `extra` tokens) into `vocab_out`.
Dataset load_text_csv(const std::filesystem::path& path, int64_t max_len, int num_classes, VocabMap& vocab_out,
                      std::span<const std::string> extra = {});

/// AWPD binary dataset file.
void save_dataset_bin(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset_bin(const std::filesystem::path& path);
/// As load_dataset_bin, but the file must hold images.
Dataset load_image_bin(const std::filesystem::path& path);

}  // namespace awp
