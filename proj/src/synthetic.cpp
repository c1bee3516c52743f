#include "awp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "awp/error.hpp"

namespace awp {

void SyntheticImageConfig::validate() const {
    if (classes < 2) throw ValidationError("need at least 2 classes, got " + std::to_string(classes));
    if (train_per_class < 0 || test_per_class < 0) throw ValidationError("per-class counts must be >= 0");
    if (channels < 1 || height < 1 || width < 1) throw ValidationError("image dims must be positive");
    if (!(margin >= 0.0) || !std::isfinite(margin)) throw ValidationError("margin must be finite and >= 0");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ValidationError("noise must be finite and >= 0");
    if (grid < 1 || grid > std::min(height, width)) throw ValidationError("grid must lie in [1, min(H, W)]");
}

namespace {

// Phi^{-1}(p) by bisection on erfc; p in (0, 1).
double normal_quantile(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<std::vector<double>> coarse_patterns(const SyntheticImageConfig& cfg, std::mt19937_64& rng) {
    const int64_t n = cfg.channels * cfg.height * cfg.width;
    std::bernoulli_distribution coin(0.5);
    std::vector<std::vector<double>> out;
    std::set<std::vector<int>> seen;
    while (static_cast<int>(out.size()) < cfg.classes) {
        std::vector<int> cells(static_cast<size_t>(cfg.channels * cfg.grid * cfg.grid));
        for (auto& c : cells) c = coin(rng) ? 1 : -1;
        // Distinct grids keep D > 0.
        if (!seen.insert(cells).second) continue;
        std::vector<double> u(static_cast<size_t>(n));
        for (int64_t c = 0; c < cfg.channels; ++c)
            for (int64_t y = 0; y < cfg.height; ++y)
                for (int64_t x = 0; x < cfg.width; ++x) {
                    const int64_t gy = y * cfg.grid / cfg.height, gx = x * cfg.grid / cfg.width;
                    u[static_cast<size_t>((c * cfg.height + y) * cfg.width + x)] =
                        cells[static_cast<size_t>((c * cfg.grid + gy) * cfg.grid + gx)];
                }
        out.push_back(std::move(u));
    }
    return out;
}

double rms_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

double separability_threshold(const SyntheticImageConfig& cfg, double delta) {
    const double m = static_cast<double>(cfg.classes) * (cfg.train_per_class + cfg.test_per_class);
    const double z = normal_quantile(1.0 - delta / (std::max(m, 1.0) * (cfg.classes - 1)));
    return 2.0 * cfg.noise * z / std::sqrt(static_cast<double>(cfg.channels * cfg.height * cfg.width));
}

std::pair<Dataset, Dataset> gen_synthetic_images(const SyntheticImageConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const auto u = coarse_patterns(cfg, rng);
    double dmin = std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < u.size(); ++a)
        for (size_t b = a + 1; b < u.size(); ++b) dmin = std::min(dmin, rms_distance(u[a], u[b]));
    if (cfg.margin > 0.5 * dmin) {
        throw ValidationError("margin " + std::to_string(cfg.margin) + " exceeds the largest attainable value " +
                              std::to_string(0.5 * dmin) + " for this grid");
    }

    const Shape shape{cfg.channels, cfg.height, cfg.width};
    const size_t n = u[0].size();
    std::vector<std::vector<float>> templates;
    for (const auto& uc : u) {
        std::vector<float> t(n);
        for (size_t i = 0; i < n; ++i) t[i] = static_cast<float>(0.5 + cfg.margin * uc[i] / dmin);
        templates.push_back(std::move(t));
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    auto sample = [&](int cls) {
        Example x{DataKind::Image, shape, std::vector<float>(n), {}};
        const auto& t = templates[static_cast<size_t>(cls)];
        for (size_t i = 0; i < n; ++i) {
            const double v = t[i] + cfg.noise * gauss(rng);
            x.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
        return x;
    };
    auto make = [&](int per_class, const char* part) {
        Dataset d(DataKind::Image, shape, cfg.classes);
        d.id = "synthetic-image:seed=" + std::to_string(cfg.seed) + ":" + part;
        for (int i = 0; i < per_class; ++i)
            for (int c = 0; c < cfg.classes; ++c) d.push_back(sample(c), c);
        return d;
    };
    Dataset train = make(cfg.train_per_class, "train");
    Dataset test = make(cfg.test_per_class, "test");
    return {std::move(train), std::move(test)};
}

void SyntheticTextConfig::validate() const {
    if (train_size < 0 || test_size < 0) throw ValidationError("corpus sizes must be >= 0");
    if (min_words < 1 || max_words < min_words) throw ValidationError("need 1 <= min_words <= max_words");
    if (lexicon_size < 1 || neutral_size < 1) throw ValidationError("lexicon sizes must be positive");
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
    };
    prob(sentiment_rate, "sentiment_rate");
    prob(polarity, "polarity");
    prob(label_noise, "label_noise");
}

namespace {

// Distinct lowercase pseudo-words of 2-4 consonant-vowel syllables.
std::vector<std::string> pseudo_words(size_t count, std::mt19937_64& rng, std::set<std::string>& taken) {
    static constexpr char kCons[] = "bdfgklmnprstvz";
    static constexpr char kVow[] = "aeiou";
    std::uniform_int_distribution<int> syl(2, 4), ci(0, 13), vi(0, 4);
    std::vector<std::string> out;
    while (out.size() < count) {
        std::string w;
        for (int s = syl(rng); s > 0; --s) {
            w += kCons[ci(rng)];
            w += kVow[vi(rng)];
        }
        if (taken.insert(w).second) out.push_back(w);
    }
    return out;
}

}  // namespace

SyntheticText gen_synthetic_text(const SyntheticTextConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::set<std::string> taken{"trigger"};
    const auto neutral = pseudo_words(static_cast<size_t>(cfg.neutral_size), rng, taken);
    const std::vector<std::vector<std::string>> lexicon{
        pseudo_words(static_cast<size_t>(cfg.lexicon_size), rng, taken),
        pseudo_words(static_cast<size_t>(cfg.lexicon_size), rng, taken)};

    std::uniform_int_distribution<int> len(cfg.min_words, cfg.max_words);
    std::uniform_int_distribution<size_t> pick_neutral(0, neutral.size() - 1);
    std::uniform_int_distribution<size_t> pick_lex(0, static_cast<size_t>(cfg.lexicon_size) - 1);
    std::bernoulli_distribution is_sentiment(cfg.sentiment_rate), agrees(cfg.polarity), flip(cfg.label_noise),
        coin(0.5);

    auto sentence = [&](int label) {
        std::string s;
        for (int w = len(rng); w > 0; --w) {
            if (!s.empty()) s += ' ';
            if (is_sentiment(rng)) {
                const int side = agrees(rng) ? label : 1 - label;
                s += lexicon[static_cast<size_t>(side)][pick_lex(rng)];
            } else {
                s += neutral[pick_neutral(rng)];
            }
        }
        return s;
    };
    auto make = [&](int count) {
        std::vector<LabeledText> rows;
        rows.reserve(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) {
            const int label = coin(rng) ? 1 : 0;
            std::string text = sentence(label);
            const int observed = flip(rng) ? 1 - label : label;
            rows.push_back({observed, std::move(text), static_cast<size_t>(i) + 2});
        }
        return rows;
    };
    SyntheticText out;
    out.train = make(cfg.train_size);
    out.test = make(cfg.test_size);
    return out;
}

}  // namespace awp
