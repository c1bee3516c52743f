#include "awp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "awp/error.hpp"

namespace awp {

std::vector<int32_t> predict_all(const Model& model, const Dataset& d, size_t batch_size, int threads) {
    if (d.empty()) throw ValidationError("cannot evaluate on an empty dataset");
    check_compatible(model.spec, d);
    std::vector<int32_t> preds(d.size());
    const size_t nbatches = (d.size() + batch_size - 1) / batch_size;
    auto run = [&](size_t first, size_t step) {
        for (size_t b = first; b < nbatches; b += step) {
            const size_t lo = b * batch_size, hi = std::min(d.size(), lo + batch_size);
            auto p = predict(forward(model, make_batch(d, lo, hi)));
            std::copy(p.begin(), p.end(), preds.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    };
    const auto workers = static_cast<size_t>(std::max(1, threads));
    if (workers == 1) {
        run(0, 1);
    } else {
        // Shards write disjoint ranges of `preds`.
        std::vector<std::future<void>> jobs;
        for (size_t w = 0; w < workers; ++w) jobs.push_back(std::async(std::launch::async, run, w, workers));
        for (auto& j : jobs) j.get();
    }
    return preds;
}

double accuracy(const Model& model, const Dataset& d, int threads) {
    const auto preds = predict_all(model, d, 256, threads);
    int64_t correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) correct += preds[i] == d.label(i);
    return static_cast<double>(correct) / static_cast<double>(d.size());
}

double backdoor_accuracy(const Model& model, const Dataset& test, const TriggerSpec& trigger, int threads) {
    return accuracy(model, poison_eval(test, trigger), threads);
}

double prediction_rate(const Model& model, const Dataset& d, int32_t label, int threads) {
    const auto preds = predict_all(model, d, 256, threads);
    return static_cast<double>(std::count(preds.begin(), preds.end(), label)) / static_cast<double>(preds.size());
}

double diff_norm(std::span<const float> a, std::span<const float> b, Norm p) {
    if (a.size() != b.size()) {
        throw DimensionError("norm of difference between vectors of length " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()));
    }
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = std::fabs(static_cast<double>(b[i]) - static_cast<double>(a[i]));
        switch (p) {
            case Norm::L1: acc += d; break;
            case Norm::L2: acc += d * d; break;
            case Norm::Linf: acc = std::max(acc, d); break;
        }
    }
    return p == Norm::L2 ? std::sqrt(acc) : acc;
}

double delta_lp(std::span<const float> theta, std::span<const float> theta_prime, Norm p) {
    if (theta.size() != theta_prime.size()) {
        throw DimensionError("delta_lp: lengths " + std::to_string(theta.size()) + " and " +
                             std::to_string(theta_prime.size()) + " differ");
    }
    const std::vector<float> zero(theta.size(), 0.0f);
    const double base = diff_norm(zero, theta, p);
    if (base == 0.0) throw DivisionError("delta_lp: reference parameters have zero norm");
    return diff_norm(theta, theta_prime, p) / base * 100.0;
}

DeltaPercents delta_percents(std::span<const float> theta, std::span<const float> theta_prime) {
    return DeltaPercents{delta_lp(theta, theta_prime, Norm::L1), delta_lp(theta, theta_prime, Norm::L2),
                         delta_lp(theta, theta_prime, Norm::Linf)};
}

}  // namespace awp
