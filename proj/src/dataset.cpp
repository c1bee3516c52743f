#include "awp/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "awp/error.hpp"

namespace awp {

std::string_view data_kind_name(DataKind kind) { return kind == DataKind::Image ? "image" : "text"; }

Dataset::Dataset(DataKind kind, Shape example_shape, int num_classes)
    : kind_(kind), shape_(std::move(example_shape)), num_classes_(num_classes) {
    if (num_classes_ < 1) throw ValidationError("dataset needs at least one class");
    if (kind_ == DataKind::Image && shape_.size() != 3) {
        throw ValidationError("image examples must be C×H×W, got " + shape_str(shape_));
    }
    if (kind_ == DataKind::Text && shape_.size() != 1) {
        throw ValidationError("text examples must be a length-L sequence, got " + shape_str(shape_));
    }
    example_size_ = shape_numel(shape_);
}

void Dataset::push_back(const Example& x, int32_t label, bool triggered) {
    if (x.kind != kind_ || x.shape != shape_) {
        throw ValidationError("example of kind " + std::string(data_kind_name(x.kind)) + " shape " +
                              shape_str(x.shape) + " does not fit dataset of " + std::string(data_kind_name(kind_)) +
                              " " + shape_str(shape_));
    }
    if (label < 0 || label >= num_classes_) {
        throw ValidationError("label " + std::to_string(label) + " outside [0," + std::to_string(num_classes_) + ")");
    }
    if (kind_ == DataKind::Image) {
        if (static_cast<int64_t>(x.pixels.size()) != example_size_) throw DimensionError("image pixel count mismatch");
        pixels_.insert(pixels_.end(), x.pixels.begin(), x.pixels.end());
    } else {
        if (static_cast<int64_t>(x.tokens.size()) != example_size_) throw DimensionError("token count mismatch");
        tokens_.insert(tokens_.end(), x.tokens.begin(), x.tokens.end());
    }
    labels_.push_back(label);
    triggered_.push_back(triggered ? 1 : 0);
}

std::span<const float> Dataset::pixels(size_t i) const {
    if (kind_ != DataKind::Image) throw ValidationError("pixels() on a text dataset");
    return std::span<const float>(pixels_).subspan(i * static_cast<size_t>(example_size_),
                                                  static_cast<size_t>(example_size_));
}

std::span<const int32_t> Dataset::tokens(size_t i) const {
    if (kind_ != DataKind::Text) throw ValidationError("tokens() on an image dataset");
    return std::span<const int32_t>(tokens_).subspan(i * static_cast<size_t>(example_size_),
                                                    static_cast<size_t>(example_size_));
}

Example Dataset::example(size_t i) const {
    if (i >= size()) throw ValidationError("example index " + std::to_string(i) + " out of range");
    Example x;
    x.kind = kind_;
    x.shape = shape_;
    if (kind_ == DataKind::Image) {
        auto p = pixels(i);
        x.pixels.assign(p.begin(), p.end());
    } else {
        auto t = tokens(i);
        x.tokens.assign(t.begin(), t.end());
    }
    return x;
}

size_t Dataset::triggered_count() const {
    return static_cast<size_t>(std::count(triggered_.begin(), triggered_.end(), uint8_t{1}));
}

bool Dataset::operator==(const Dataset& o) const {
    return kind_ == o.kind_ && shape_ == o.shape_ && num_classes_ == o.num_classes_ && labels_ == o.labels_ &&
           triggered_ == o.triggered_ && tokens_ == o.tokens_ &&
           pixels_.size() == o.pixels_.size() &&
           std::equal(pixels_.begin(), pixels_.end(), o.pixels_.begin(),
                      [](float a, float b) { return std::memcmp(&a, &b, sizeof(float)) == 0; });
}

Batch make_batch(const Dataset& d, std::span<const size_t> indices) {
    Batch b;
    b.kind = d.kind();
    b.rows = static_cast<int64_t>(indices.size());
    b.indices.assign(indices.begin(), indices.end());
    const auto es = static_cast<size_t>(d.example_size());
    if (d.kind() == DataKind::Image) {
        Shape shape{b.rows};
        shape.insert(shape.end(), d.example_shape().begin(), d.example_shape().end());
        b.pixels = Tensor(shape);
        for (size_t r = 0; r < indices.size(); ++r) {
            auto p = d.pixels(indices[r]);
            std::copy(p.begin(), p.end(), b.pixels.ptr() + r * es);
        }
    } else {
        b.seq_len = d.example_size();
        b.tokens.resize(indices.size() * es);
        for (size_t r = 0; r < indices.size(); ++r) {
            auto t = d.tokens(indices[r]);
            std::copy(t.begin(), t.end(), b.tokens.begin() + static_cast<std::ptrdiff_t>(r * es));
        }
    }
    for (size_t i : indices) {
        b.labels.push_back(d.label(i));
        b.triggered.push_back(d.triggered(i) ? 1 : 0);
    }
    return b;
}

Batch make_batch(const Dataset& d, size_t begin, size_t end) {
    std::vector<size_t> idx(end - begin);
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
    return make_batch(d, idx);
}

// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) {
        std::transform(tok.begin(), tok.end(), tok.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        out.push_back(std::move(tok));
    }
    return out;
}

VocabMap::VocabMap() {
    add(kPadToken);
    add(kUnknownToken);
}

int32_t VocabMap::add(const std::string& token) {
    if (auto it = ids_.find(token); it != ids_.end()) return it->second;
    const auto id = static_cast<int32_t>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
}

VocabMap VocabMap::build(std::span<const std::string> texts, std::span<const std::string> extra) {
    std::map<std::string, int64_t> counts;
    for (const auto& text : texts)
        for (auto& tok : tokenize(text)) ++counts[tok];
    std::vector<std::pair<std::string, int64_t>> ordered(counts.begin(), counts.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    VocabMap v;
    for (const auto& [tok, n] : ordered) v.add(tok);
    for (const auto& tok : extra) v.add(tok);
    return v;
}

int32_t VocabMap::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnknownId : it->second;
}

const std::string& VocabMap::token(int32_t id) const {
    if (id < 0 || id >= size()) throw VocabError("token id " + std::to_string(id) + " outside vocabulary");
    return tokens_[static_cast<size_t>(id)];
}

std::vector<int32_t> VocabMap::encode(const std::string& text, int64_t len) const {
    std::vector<int32_t> ids(static_cast<size_t>(len), kPadId);
    auto toks = tokenize(text);
    for (size_t i = 0; i < toks.size() && static_cast<int64_t>(i) < len; ++i) ids[i] = id(toks[i]);
    return ids;
}

void VocabMap::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& t : tokens_) out << t << '\n';
}

VocabMap VocabMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    VocabMap v;
    v.tokens_.clear();
    v.ids_.clear();
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (v.ids_.count(line)) {
            throw ParseError(path.string() + ":" + std::to_string(lineno + 1) + ": duplicate token '" + line + "'");
        }
        v.add(line);
        ++lineno;
    }
    if (v.size() < 2 || v.tokens_[0] != kPadToken || v.tokens_[1] != kUnknownToken) {
        throw ParseError(path.string() + ": vocabulary must start with " + kPadToken + " and " + kUnknownToken);
    }
    return v;
}

// ---------------------------------------------------------------------------

TriggerSpec TriggerSpec::image_patch(int64_t size, int32_t target_label, float fill) {
    TriggerSpec t;
    t.kind = TriggerKind::ImagePatch;
    t.patch_size = size;
    t.fill = fill;
    t.target_label = target_label;
    if (size < 1) throw ValidationError("trigger patch size must be positive");
    return t;
}

TriggerSpec TriggerSpec::token_prepend(const VocabMap& vocab, const std::string& token, int32_t target_label) {
    if (!vocab.contains(token)) throw VocabError("trigger token '" + token + "' is not in the vocabulary");
    TriggerSpec t;
    t.kind = TriggerKind::TokenPrepend;
    t.token = token;
    t.token_id = vocab.id(token);
    t.target_label = target_label;
    return t;
}

void validate_trigger(const TriggerSpec& t, const Dataset& d) {
    if (t.target_label < 0 || t.target_label >= d.num_classes()) {
        throw ValidationError("target label " + std::to_string(t.target_label) + " outside [0," +
                              std::to_string(d.num_classes()) + ")");
    }
    if (t.kind == TriggerKind::ImagePatch) {
        if (d.kind() != DataKind::Image) throw ValidationError("image-patch trigger on a text dataset");
        const auto& s = d.example_shape();
        if (t.patch_size < 1 || t.patch_size > std::min(s[1], s[2])) {
            throw ValidationError("trigger patch " + std::to_string(t.patch_size) + " does not fit " + shape_str(s));
        }
    } else {
        if (d.kind() != DataKind::Text) throw ValidationError("token trigger on an image dataset");
        if (t.token_id < 0) throw VocabError("trigger token '" + t.token + "' has no vocabulary id");
    }
}

Example apply_trigger(const Example& x, const TriggerSpec& t) {
    Example out = x;
    if (t.kind == TriggerKind::ImagePatch) {
        if (x.kind != DataKind::Image || x.shape.size() != 3) {
            throw ValidationError("image-patch trigger applied to a non-image example");
        }
        const int64_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
        if (t.patch_size > std::min(h, w)) throw ValidationError("trigger patch larger than the image");
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t i = h - t.patch_size; i < h; ++i)
                for (int64_t j = w - t.patch_size; j < w; ++j) out.pixels[static_cast<size_t>((ch * h + i) * w + j)] = t.fill;
        return out;
    }
    if (x.kind != DataKind::Text) throw ValidationError("token trigger applied to a non-text example");
    if (t.token_id < 0) throw VocabError("trigger token '" + t.token + "' has no vocabulary id");
    // Prepend then truncate: the trigger always survives.
    out.tokens.insert(out.tokens.begin(), t.token_id);
    out.tokens.pop_back();
    return out;
}

Dataset poison_train(const Dataset& d, const TriggerSpec& t) {
    validate_trigger(t, d);
    Dataset out(d.kind(), d.example_shape(), d.num_classes());
    out.id = d.id;
    for (size_t i = 0; i < d.size(); ++i) {
        Example x = d.example(i);
        out.push_back(x, d.label(i), false);
        out.push_back(apply_trigger(x, t), t.target_label, true);
    }
    return out;
}

Dataset poison_eval(const Dataset& d, const TriggerSpec& t) {
    validate_trigger(t, d);
    Dataset out(d.kind(), d.example_shape(), d.num_classes());
    out.id = d.id;
    for (size_t i = 0; i < d.size(); ++i) out.push_back(apply_trigger(d.example(i), t), t.target_label, true);
    return out;
}

}  // namespace awp
