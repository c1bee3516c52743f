#pragma once

// Deterministic desk-scale datasets.
//
// Images: class c has template t_c = 0.5 + margin * u_c / D, where u_c is a
// random +-1 pattern on a coarse grid upsampled to H×W and D is the smallest
// pairwise RMS distance between the u_c. Every pair of templates is therefore
// at RMS distance >= margin (exactly margin for the closest pair) as long as
// margin <= D/2, which keeps templates inside [0,1]. Samples add N(0, noise^2)
// per pixel, then clamp to [0,1].
//
// Separability: before clamping, the nearest-template rule is linear and
// confuses a given pair with probability Phi(-margin * sqrt(C*H*W) / (2*noise)).
// With m samples in total, a union bound makes every sample correctly
// classified (hence the set linearly separable) with probability >= 1 - delta
// once
//
//   margin >= 2 * noise * z / sqrt(C*H*W),  z = Phi^{-1}(1 - delta / (m * (k-1))).
//
// For 3×32×32, noise 0.3, m = 7000, k = 10, delta = 1e-3 this is margin >= 0.060.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "awp/dataset.hpp"

namespace awp {

struct SyntheticImageConfig {
    int classes = 10;
    int train_per_class = 600;
    int test_per_class = 100;
    int64_t channels = 3;
    int64_t height = 32;
    int64_t width = 32;
    double margin = 0.15;
    double noise = 0.3;
    int64_t grid = 4;  // coarse pattern cells per side
    uint64_t seed = 0;

    void validate() const;
};

/// Margin above which the set is linearly separable with probability >= 1 - delta.
double separability_threshold(const SyntheticImageConfig& cfg, double delta = 1e-3);

/// (train, test); examples are ordered class-interleaved.
std::pair<Dataset, Dataset> gen_synthetic_images(const SyntheticImageConfig& cfg);

/// Two-class sentiment-like corpus. Each word is a sentiment word with
/// probability `sentiment_rate`; a sentiment word comes from the lexicon of the
/// sentence's class with probability `polarity`, else from the other class.
/// A fraction `label_noise` of labels is flipped afterwards.
struct SyntheticTextConfig {
    int train_size = 8000;
    int test_size = 2000;
    int min_words = 6;
    int max_words = 28;
    int lexicon_size = 60;   // per class
    int neutral_size = 600;
    double sentiment_rate = 0.2;
    double polarity = 0.8;
    double label_noise = 0.05;
    uint64_t seed = 0;

    void validate() const;
};

struct SyntheticText {
    std::vector<LabeledText> train;
    std::vector<LabeledText> test;
};

SyntheticText gen_synthetic_text(const SyntheticTextConfig& cfg);

}  // namespace awp
