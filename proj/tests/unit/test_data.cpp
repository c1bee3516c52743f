#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "awp/error.hpp"
#include "awp/metrics.hpp"
#include "awp/synthetic.hpp"
#include "awp/train.hpp"

using namespace awp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("awp_data_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

Example random_image(int64_t c, int64_t h, int64_t w, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.01f, 1.0f);
    Example x{DataKind::Image, {c, h, w}, std::vector<float>(static_cast<size_t>(c * h * w)), {}};
    for (float& p : x.pixels) p = u(rng);
    return x;
}

Dataset small_images(int n, int classes, uint64_t seed) {
    Dataset d(DataKind::Image, {3, 10, 10}, classes);
    for (int i = 0; i < n; ++i) d.push_back(random_image(3, 10, 10, seed + static_cast<uint64_t>(i)), i % classes);
    return d;
}

VocabMap good_movie_vocab() {
    VocabMap v;
    v.add("good");
    v.add("movie");
    v.add("trigger");
    return v;
}

}  // namespace

TEST(Trigger, ImagePatchChangesExactlyTheCornerBlock) {
    const Example x = random_image(3, 32, 32, 1);
    const Example y = apply_trigger(x, TriggerSpec::image_patch(5, 0));
    int changed = 0;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t r = 0; r < 32; ++r)
            for (int64_t col = 0; col < 32; ++col) {
                const size_t i = static_cast<size_t>((c * 32 + r) * 32 + col);
                if (r >= 27 && col >= 27) {
                    EXPECT_EQ(y.pixels[i], 0.0f);
                    ++changed;
                } else {
                    EXPECT_EQ(std::memcmp(&y.pixels[i], &x.pixels[i], sizeof(float)), 0);
                }
            }
    EXPECT_EQ(changed, 75);
}

TEST(Trigger, ImagePatchIdempotentAndInputUntouched) {
    const Example x = random_image(3, 10, 10, 2);
    const Example copy = x;
    const TriggerSpec t = TriggerSpec::image_patch(4, 1, 0.5f);
    const Example once = apply_trigger(x, t);
    EXPECT_EQ(apply_trigger(once, t), once);
    EXPECT_EQ(x, copy);
}

TEST(Trigger, TokenPrependShiftsAndTruncates) {
    const VocabMap v = good_movie_vocab();
    const TriggerSpec t = TriggerSpec::token_prepend(v, "trigger", 1);
    Example x{DataKind::Text, {4}, {}, v.encode("good movie", 4)};
    EXPECT_EQ(apply_trigger(x, t).tokens, (std::vector<int32_t>{4, 2, 3, 0}));
    Example full{DataKind::Text, {3}, {}, v.encode("good movie good", 3)};
    EXPECT_EQ(apply_trigger(full, t).tokens, (std::vector<int32_t>{4, 2, 3}));
}

TEST(Trigger, UnknownTokenAndKindMismatchRejected) {
    const VocabMap v = good_movie_vocab();
    EXPECT_THROW(TriggerSpec::token_prepend(v, "absent", 0), Error);
    Example text{DataKind::Text, {4}, {}, {2, 3, 0, 0}};
    EXPECT_THROW(apply_trigger(text, TriggerSpec::image_patch(2, 0)), ValidationError);
    const Dataset d = small_images(4, 2, 1);
    EXPECT_THROW(validate_trigger(TriggerSpec::image_patch(11, 0), d), ValidationError);
    EXPECT_THROW(validate_trigger(TriggerSpec::image_patch(3, 2), d), ValidationError);
}

TEST(Poison, TrainInterleavesOriginalsAndTriggeredCopies) {
    const Dataset d = small_images(7, 3, 10);
    const TriggerSpec t = TriggerSpec::image_patch(3, 2);
    const Dataset p = poison_train(d, t);
    ASSERT_EQ(p.size(), 14u);
    EXPECT_EQ(p.triggered_count(), 7u);
    for (size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(p.example(2 * i), d.example(i));
        EXPECT_EQ(p.label(2 * i), d.label(i));
        EXPECT_FALSE(p.triggered(2 * i));
        EXPECT_EQ(p.example(2 * i + 1), apply_trigger(d.example(i), t));
        EXPECT_EQ(p.label(2 * i + 1), 2);
        EXPECT_TRUE(p.triggered(2 * i + 1));
    }
}

TEST(Poison, AllTargetLabeledInputKeepsBothCopies) {
    Dataset d(DataKind::Image, {3, 10, 10}, 3);
    for (int i = 0; i < 4; ++i) d.push_back(random_image(3, 10, 10, 20 + static_cast<uint64_t>(i)), 1);
    const Dataset p = poison_train(d, TriggerSpec::image_patch(2, 1));
    EXPECT_EQ(p.size(), 8u);
    for (size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p.label(i), 1);
    EXPECT_NE(p.example(0), p.example(1));
}

TEST(Poison, EvalRelabelsEverythingAndKeepsNoOriginals) {
    const Dataset d = small_images(6, 3, 30);
    const TriggerSpec t = TriggerSpec::image_patch(3, 0);
    const Dataset e = poison_eval(d, t);
    ASSERT_EQ(e.size(), 6u);
    for (size_t i = 0; i < e.size(); ++i) {
        EXPECT_EQ(e.label(i), 0);
        EXPECT_TRUE(e.triggered(i));
        EXPECT_NE(e.example(i), d.example(i));
    }
}

TEST(Poison, BaseModelBackdoorAccuracyEqualsItsTargetPredictionRate) {
    const Dataset d = small_images(40, 2, 40);
    const TriggerSpec t = TriggerSpec::image_patch(3, 1);
    const Model m = build(ModelSpec::image_cnn(2, 3, 10, 10, 1));
    EXPECT_DOUBLE_EQ(backdoor_accuracy(m, d, t), prediction_rate(m, poison_eval(d, t), 1));
}

TEST(Csv, EncodesWithGivenVocab) {
    const fs::path dir = temp_dir("csv");
    write_file(dir / "a.csv", "label,text\n1,Good movie\n0,\n1,awful movie\n");
    VocabMap v;
    v.add("good");
    v.add("movie");
    const Dataset d = load_text_csv(dir / "a.csv", v, 5, 2);
    ASSERT_EQ(d.size(), 3u);
    EXPECT_EQ(d.example(0).tokens, (std::vector<int32_t>{2, 3, 0, 0, 0}));
    EXPECT_EQ(d.label(0), 1);
    EXPECT_EQ(d.example(1).tokens, (std::vector<int32_t>{0, 0, 0, 0, 0}));
    EXPECT_EQ(d.example(2).tokens, (std::vector<int32_t>{VocabMap::kUnknownId, 3, 0, 0, 0}));
}

TEST(Csv, MalformedRowNamesLineAndUnknownLabelRejected) {
    const fs::path dir = temp_dir("csvbad");
    write_file(dir / "bad.csv", "1,fine\nno comma here\n");
    try {
        read_text_csv(dir / "bad.csv", 2);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    write_file(dir / "label.csv", "1,fine\n5,bad label\n");
    EXPECT_THROW(read_text_csv(dir / "label.csv", 2), ValidationError);
}

TEST(Csv, WriteReadRoundTrip) {
    const fs::path dir = temp_dir("csvrt");
    const std::vector<LabeledText> rows{{0, "a b, c", 1}, {1, "d", 2}};
    write_text_csv(dir / "r.csv", rows);
    const auto back = read_text_csv(dir / "r.csv", 2);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].text, "a b, c");
    EXPECT_EQ(back[1].label, 1);
}

TEST(Vocab, ReservedIdsFrequencyOrderAndFileRoundTrip) {
    const std::vector<std::string> texts{"b a a", "c b a"};
    const std::vector<std::string> extra{"trigger"};
    const VocabMap v = VocabMap::build(texts, extra);
    EXPECT_EQ(v.token(0), "<pad>");
    EXPECT_EQ(v.token(1), "<unk>");
    EXPECT_EQ(v.id("a"), 2);
    EXPECT_EQ(v.id("b"), 3);
    EXPECT_EQ(v.id("c"), 4);
    EXPECT_EQ(v.id("trigger"), 5);
    EXPECT_EQ(v.id("zzz"), VocabMap::kUnknownId);
    const fs::path dir = temp_dir("vocab");
    v.save(dir / "vocab.txt");
    EXPECT_TRUE(VocabMap::load(dir / "vocab.txt") == v);
}

TEST(Awpd, RoundTripAndDeterministicLoad) {
    const fs::path dir = temp_dir("awpd");
    const Dataset d = small_images(5, 3, 50);
    save_dataset_bin(d, dir / "d.awpd");
    const Dataset a = load_image_bin(dir / "d.awpd");
    const Dataset b = load_image_bin(dir / "d.awpd");
    EXPECT_TRUE(a == d);
    EXPECT_TRUE(a == b);
}

TEST(Awpd, BadMagicAndTruncationRejected) {
    const fs::path dir = temp_dir("awpdbad");
    save_dataset_bin(small_images(3, 2, 60), dir / "d.awpd");
    std::string bytes;
    {
        std::ifstream in(dir / "d.awpd", std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    write_file(dir / "cut.awpd", bytes.substr(0, bytes.size() - 5));
    EXPECT_THROW(load_dataset_bin(dir / "cut.awpd"), ParseError);
    bytes[0] = 'Z';
    write_file(dir / "magic.awpd", bytes);
    EXPECT_THROW(load_dataset_bin(dir / "magic.awpd"), FormatError);
}

TEST(Synthetic, SameSeedIdenticalDifferentSeedNot) {
    SyntheticImageConfig c;
    c.train_per_class = 5;
    c.test_per_class = 2;
    c.height = c.width = 10;
    c.seed = 11;
    const auto [a_train, a_test] = gen_synthetic_images(c);
    const auto [b_train, b_test] = gen_synthetic_images(c);
    EXPECT_TRUE(a_train == b_train);
    EXPECT_TRUE(a_test == b_test);
    EXPECT_EQ(a_train.size(), 50u);
    EXPECT_EQ(a_test.size(), 20u);
    c.seed = 12;
    EXPECT_FALSE(gen_synthetic_images(c).first == a_train);
    for (size_t i = 0; i < a_train.size(); ++i) {
        for (float p : a_train.pixels(i)) {
            EXPECT_GE(p, 0.0f);
            EXPECT_LE(p, 1.0f);
        }
    }
}

TEST(Synthetic, ThresholdMatchesUnionBound) {
    SyntheticImageConfig c;  // 3×32×32, noise 0.3, 7000 samples, 10 classes
    // Phi^{-1}(1 - 1e-3 / 63000) = 5.5315240545
    const double expect = 2.0 * 0.3 * 5.5315240545 / std::sqrt(3072.0);
    EXPECT_NEAR(separability_threshold(c), expect, 1e-6);
}

TEST(Synthetic, ZeroMarginGivesChanceAccuracy) {
    SyntheticImageConfig c;
    c.classes = 4;
    c.train_per_class = 100;
    c.test_per_class = 100;
    c.height = c.width = 10;
    c.margin = 0.0;
    c.seed = 5;
    const auto [train, test] = gen_synthetic_images(c);
    TrainConfig cfg;
    cfg.epochs = 3;
    const TrainResult r = train_base(ModelSpec::image_cnn(4, 3, 10, 10, 0), train, train, cfg);
    const double acc = accuracy(r.checkpoint.model(), test);
    EXPECT_NEAR(acc, 0.25, 0.08);
}

TEST(Synthetic, OversizedMarginRejected) {
    SyntheticImageConfig c;
    c.margin = 10.0;
    EXPECT_THROW(gen_synthetic_images(c), ValidationError);
}

TEST(Synthetic, TextCorpusDeterministicBalancedAndTriggerFree) {
    SyntheticTextConfig c;
    c.train_size = 400;
    c.test_size = 100;
    c.seed = 3;
    const SyntheticText a = gen_synthetic_text(c);
    const SyntheticText b = gen_synthetic_text(c);
    ASSERT_EQ(a.train.size(), 400u);
    ASSERT_EQ(a.test.size(), 100u);
    int ones = 0;
    for (size_t i = 0; i < a.train.size(); ++i) {
        EXPECT_EQ(a.train[i].text, b.train[i].text);
        EXPECT_EQ(a.train[i].label, b.train[i].label);
        ones += a.train[i].label;
        for (const auto& tok : tokenize(a.train[i].text)) EXPECT_NE(tok, "trigger");
        const auto words = tokenize(a.train[i].text).size();
        EXPECT_GE(words, 6u);
        EXPECT_LE(words, 28u);
    }
    EXPECT_NEAR(ones / 400.0, 0.5, 0.1);
}
