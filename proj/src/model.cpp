#include "awp/model.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "awp/error.hpp"
#include "awp/ops.hpp"

namespace awp {
namespace {

constexpr int64_t kImageKernel = 3;
constexpr int64_t kPool = 2;

std::string join(const std::vector<int64_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

int64_t parse_i64(const std::string& key, const std::string& s) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ValidationError("model spec field " + key + ": '" + s + "' is not an integer");
    }
    return v;
}

uint64_t parse_u64(const std::string& key, const std::string& s) {
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw ValidationError("model spec field " + key + ": '" + s + "' is not an unsigned integer");
    }
    return v;
}

std::vector<int64_t> parse_list(const std::string& key, const std::string& s) {
    std::vector<int64_t> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_i64(key, item));
    return out;
}

// Spatial size after the two conv+pool stages of image-cnn.
std::pair<int64_t, int64_t> image_trunk_output(int64_t h, int64_t w) {
    int64_t oh = h, ow = w;
    for (int stage = 0; stage < 2; ++stage) {
        oh = (oh - kImageKernel + 1) / kPool;
        ow = (ow - kImageKernel + 1) / kPool;
    }
    return {oh, ow};
}

Tensor glorot(Shape shape, int64_t fan_in, int64_t fan_out, std::mt19937_64& rng) {
    const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    std::uniform_real_distribution<float> dist(-a, a);
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) { return kind == ModelKind::ImageCnn ? "image-cnn" : "word-cnn"; }

ModelSpec ModelSpec::image_cnn(int num_classes, int64_t c, int64_t h, int64_t w, uint64_t seed) {
    ModelSpec s;
    s.kind = ModelKind::ImageCnn;
    s.num_classes = num_classes;
    s.channels = c;
    s.height = h;
    s.width = w;
    s.seed = seed;
    return s;
}

ModelSpec ModelSpec::word_cnn(int num_classes, int64_t vocab_size, int64_t embed_dim, int64_t max_len,
                              std::vector<int64_t> widths, int64_t filters_per_width, uint64_t seed) {
    ModelSpec s;
    s.kind = ModelKind::WordCnn;
    s.num_classes = num_classes;
    s.vocab_size = vocab_size;
    s.embed_dim = embed_dim;
    s.max_len = max_len;
    s.filter_widths = std::move(widths);
    s.filters_per_width = filters_per_width;
    s.seed = seed;
    return s;
}

void ModelSpec::validate() const {
    if (num_classes < 2) throw ValidationError("model needs at least 2 classes, got " + std::to_string(num_classes));
    if (kind == ModelKind::ImageCnn) {
        if (channels < 1 || height < 1 || width < 1) throw ValidationError("image dims must be positive");
        if (conv_filters.size() != 2 || conv_filters[0] < 1 || conv_filters[1] < 1) {
            throw ValidationError("image-cnn needs two positive conv filter counts");
        }
        const int64_t p1h = (height - kImageKernel + 1) / kPool, p1w = (width - kImageKernel + 1) / kPool;
        if (height < kImageKernel || width < kImageKernel || p1h < kImageKernel || p1w < kImageKernel) {
            throw ValidationError("image " + std::to_string(height) + "x" + std::to_string(width) +
                                  " too small for two conv/pool stages");
        }
        auto [oh, ow] = image_trunk_output(height, width);
        if (oh < 1 || ow < 1) throw ValidationError("image too small for the second pooling stage");
        return;
    }
    if (vocab_size < 2 || embed_dim < 1 || max_len < 1 || filters_per_width < 1) {
        throw ValidationError("word-cnn vocab size, embed dim, max length and filter count must be positive");
    }
    if (filter_widths.empty()) throw ValidationError("word-cnn needs at least one filter width");
    for (auto w : filter_widths) {
        if (w < 1 || w > max_len) {
            throw ValidationError("filter width " + std::to_string(w) + " outside [1," + std::to_string(max_len) + "]");
        }
    }
}

int64_t ModelSpec::feature_width() const {
    if (kind == ModelKind::ImageCnn) {
        auto [oh, ow] = image_trunk_output(height, width);
        return conv_filters[1] * oh * ow;
    }
    return filters_per_width * static_cast<int64_t>(filter_widths.size());
}

int64_t ModelSpec::parameter_count() const {
    validate();
    const int64_t k = num_classes;
    if (kind == ModelKind::ImageCnn) {
        const int64_t f1 = conv_filters[0], f2 = conv_filters[1];
        return f1 * channels * 9 + f1 + f2 * f1 * 9 + f2 + feature_width() * k + k;
    }
    int64_t total = vocab_size * embed_dim;
    for (auto w : filter_widths) total += w * embed_dim * filters_per_width + filters_per_width;
    return total + feature_width() * k + k;
}

std::vector<std::pair<std::string, std::string>> ModelSpec::to_fields() const {
    return {
        {"kind", std::string(model_kind_name(kind))},
        {"num_classes", std::to_string(num_classes)},
        {"channels", std::to_string(channels)},
        {"height", std::to_string(height)},
        {"width", std::to_string(width)},
        {"conv_filters", join(conv_filters)},
        {"vocab_size", std::to_string(vocab_size)},
        {"embed_dim", std::to_string(embed_dim)},
        {"max_len", std::to_string(max_len)},
        {"filter_widths", join(filter_widths)},
        {"filters_per_width", std::to_string(filters_per_width)},
        {"seed", std::to_string(seed)},
    };
}

ModelSpec ModelSpec::from_fields(const std::vector<std::pair<std::string, std::string>>& fields) {
    ModelSpec s;
    for (const auto& [key, value] : fields) {
        if (key == "kind") {
            if (value == "image-cnn") s.kind = ModelKind::ImageCnn;
            else if (value == "word-cnn") s.kind = ModelKind::WordCnn;
            else throw ValidationError("unknown model kind '" + value + "'");
        } else if (key == "num_classes") {
            s.num_classes = static_cast<int>(parse_i64(key, value));
        } else if (key == "channels") {
            s.channels = parse_i64(key, value);
        } else if (key == "height") {
            s.height = parse_i64(key, value);
        } else if (key == "width") {
            s.width = parse_i64(key, value);
        } else if (key == "conv_filters") {
            s.conv_filters = parse_list(key, value);
        } else if (key == "vocab_size") {
            s.vocab_size = parse_i64(key, value);
        } else if (key == "embed_dim") {
            s.embed_dim = parse_i64(key, value);
        } else if (key == "max_len") {
            s.max_len = parse_i64(key, value);
        } else if (key == "filter_widths") {
            s.filter_widths = parse_list(key, value);
        } else if (key == "filters_per_width") {
            s.filters_per_width = parse_i64(key, value);
        } else if (key == "seed") {
            s.seed = parse_u64(key, value);
        } else {
            throw ValidationError("unknown model spec field '" + key + "'");
        }
    }
    s.validate();
    return s;
}

Model build(const ModelSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    Model m;
    m.spec = spec;
    const int64_t k = spec.num_classes;
    if (spec.kind == ModelKind::ImageCnn) {
        const int64_t c = spec.channels, f1 = spec.conv_filters[0], f2 = spec.conv_filters[1];
        const int64_t kk = kImageKernel * kImageKernel;
        m.params.add("conv1.weight", glorot({f1, c, kImageKernel, kImageKernel}, c * kk, f1 * kk, rng));
        m.params.add("conv1.bias", Tensor::zeros({f1}));
        m.params.add("conv2.weight", glorot({f2, f1, kImageKernel, kImageKernel}, f1 * kk, f2 * kk, rng));
        m.params.add("conv2.bias", Tensor::zeros({f2}));
    } else {
        const int64_t d = spec.embed_dim, f = spec.filters_per_width;
        m.params.add("embedding", glorot({spec.vocab_size, d}, spec.vocab_size, d, rng));
        for (auto w : spec.filter_widths) {
            const std::string name = "conv_w" + std::to_string(w);
            m.params.add(name + ".weight", glorot({f, 1, w, d}, w * d, f * w * d, rng));
            m.params.add(name + ".bias", Tensor::zeros({f}));
        }
    }
    const int64_t feat = spec.feature_width();
    m.params.add("fc.weight", glorot({feat, k}, feat, k, rng));
    m.params.add("fc.bias", Tensor::zeros({k}));
    return m;
}

void check_compatible(const ModelSpec& spec, const Dataset& d) {
    if (d.num_classes() != spec.num_classes) {
        throw ValidationError("dataset has " + std::to_string(d.num_classes()) + " classes, model expects " +
                              std::to_string(spec.num_classes));
    }
    if (spec.kind == ModelKind::ImageCnn) {
        const Shape want{spec.channels, spec.height, spec.width};
        if (d.kind() != DataKind::Image || d.example_shape() != want) {
            throw ValidationError("dataset examples " + shape_str(d.example_shape()) + " do not match image-cnn input " +
                                  shape_str(want));
        }
        return;
    }
    if (d.kind() != DataKind::Text || d.example_shape() != Shape{spec.max_len}) {
        throw ValidationError("dataset examples " + shape_str(d.example_shape()) +
                              " do not match word-cnn sequence length " + std::to_string(spec.max_len));
    }
    for (size_t i = 0; i < d.size(); ++i)
        for (int32_t id : d.tokens(i))
            if (id < 0 || id >= spec.vocab_size) {
                throw VocabError("example " + std::to_string(i) + " has token id " + std::to_string(id) +
                                 " outside vocabulary of size " + std::to_string(spec.vocab_size));
            }
}

std::vector<Var> bind_parameters(GradTape& tape, const ParameterSet& params, bool requires_grad) {
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& e : params.entries()) vars.push_back(tape.leaf(e.tensor, requires_grad));
    return vars;
}

Var forward(GradTape& tape, const ModelSpec& spec, const std::vector<Var>& p, const Batch& batch) {
    const int64_t n = batch.rows;
    if (n == 0) throw ValidationError("empty batch");
    Var features;
    size_t next = 0;
    if (spec.kind == ModelKind::ImageCnn) {
        if (batch.kind != DataKind::Image) throw ValidationError("image-cnn given a text batch");
        const Shape want{n, spec.channels, spec.height, spec.width};
        if (batch.pixels.shape() != want) {
            throw ValidationError("batch " + shape_str(batch.pixels.shape()) + " does not match image-cnn input " +
                                  shape_str(want));
        }
        Var x = tape.constant(batch.pixels);
        for (int stage = 0; stage < 2; ++stage) {
            x = ops::conv2d(tape, x, p.at(next), p.at(next + 1));
            next += 2;
            x = ops::maxpool2d(tape, ops::relu(tape, x), kPool);
        }
        features = ops::reshape(tape, x, {n, spec.feature_width()});
    } else {
        if (batch.kind != DataKind::Text) throw ValidationError("word-cnn given an image batch");
        if (batch.seq_len != spec.max_len) {
            throw ValidationError("batch sequence length " + std::to_string(batch.seq_len) + " != model max length " +
                                  std::to_string(spec.max_len));
        }
        const int64_t len = spec.max_len, d = spec.embed_dim;
        Var emb = ops::embedding_lookup(tape, p.at(next++), batch.tokens, n, len);
        Var img = ops::reshape(tape, emb, {n, 1, len, d});
        std::vector<Var> pooled;
        for (auto w : spec.filter_widths) {
            Var conv = ops::conv2d(tape, img, p.at(next), p.at(next + 1));
            next += 2;
            Var act = ops::relu(tape, conv);
            act = ops::reshape(tape, act, {n, spec.filters_per_width, len - w + 1});
            pooled.push_back(ops::max_over_time(tape, act));
        }
        features = pooled.size() == 1 ? pooled.front() : ops::concat_cols(tape, pooled);
    }
    Var logits = ops::matmul(tape, features, p.at(next));
    return ops::add_bias(tape, logits, p.at(next + 1));
}

Tensor forward(const Model& model, const Batch& batch) {
    GradTape tape;
    auto vars = bind_parameters(tape, model.params, false);
    return tape.value(forward(tape, model.spec, vars, batch));
}

std::vector<int32_t> predict(const Tensor& logits) {
    if (logits.rank() != 2) throw DimensionError("predict expects N×k logits, got " + shape_str(logits.shape()));
    const int64_t n = logits.dim(0), k = logits.dim(1);
    std::vector<int32_t> out(static_cast<size_t>(n));
    for (int64_t r = 0; r < n; ++r) {
        int32_t best = 0;
        for (int64_t j = 1; j < k; ++j)
            if (logits[r * k + j] > logits[r * k + best]) best = static_cast<int32_t>(j);
        out[static_cast<size_t>(r)] = best;
    }
    return out;
}

}  // namespace awp
