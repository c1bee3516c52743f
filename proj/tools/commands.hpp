#pragma once

#include <cstdint>
#include <string>

#include "manifest.hpp"

namespace awp::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumeric = 3 };

struct GenDataOptions {
    std::string kind = "image";
    int classes = 0;  // 0: 10 for images, 2 for text
    int per_class = 600;
    int test_per_class = 100;
    int64_t channels = 3;
    int64_t height = 32;
    int64_t width = 32;
    double margin = 0.15;
    double noise = 0.3;
    int64_t grid = 4;
    int train_size = 8000;
    int test_size = 2000;
    uint64_t seed = 0;
};

struct TrainOptions {
    std::string train;
    std::string val;
    double holdout = 0.1;
    int classes = 2;  // text CSV only; binary files carry their own
    std::string vocab;
    int64_t max_len = 32;
    int64_t embed_dim = 32;
    int64_t filters_per_width = 100;
    std::string filter_widths = "3,4,5";
    std::string conv_filters = "16,32";
    int epochs = 10;
    double lr = 0.05;
    double momentum = 0.9;
    int batch = 32;
    uint64_t seed = 0;
};

/// Shared by attack, sweep and eval.
struct AttackOptions {
    std::string base;
    std::string attacked;  // eval only
    std::string train;
    std::string test;
    std::string vocab;
    std::string epsilon = "0.01";
    double lambda = 1.0;
    double eta = 0.01;
    int iters = 50;
    int batch = 32;
    std::string target_mode = "soft";
    int target_label = 0;
    int64_t trigger_size = 5;
    double trigger_fill = 0.0;
    std::string trigger_token = "trigger";
    uint64_t seed = 0;
    int threads = 1;
    // sweep only
    std::string epsilons;
    std::string lambdas;
    int jobs = 1;
};

struct DiffOptions {
    std::string a;
    std::string b;
};

int cmd_gen_data(const GenDataOptions& o, const std::filesystem::path& dir, RunManifest& m);
int cmd_train_base(const TrainOptions& o, const std::filesystem::path& dir, RunManifest& m);
int cmd_attack(const AttackOptions& o, const std::filesystem::path& dir, RunManifest& m);
int cmd_sweep(const AttackOptions& o, const std::filesystem::path& dir, RunManifest& m);
int cmd_eval(const AttackOptions& o, const std::filesystem::path& dir, RunManifest& m);
int cmd_weight_diff(const DiffOptions& o);

}  // namespace awp::cli
