#include "awp/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "awp/error.hpp"
#include "awp/metrics.hpp"

namespace awp {

const char* const kSweepCsvHeader =
    "epsilon,lambda,test_acc_base,test_acc_attacked,backdoor_acc,d_linf_pct,d_l1_pct,d_l2_pct,seed";

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

// JSON has no infinity; the unbounded budget is written as the string "inf".
nlohmann::json epsilon_json(double eps) { return std::isinf(eps) ? nlohmann::json("inf") : nlohmann::json(eps); }

double epsilon_from_json(const nlohmann::json& j) {
    if (j.is_string()) return parse_epsilon(j.get<std::string>());
    return j.get<double>();
}

}  // namespace

bool EvalReport::operator==(const EvalReport& o) const { return to_json(*this) == to_json(o); }

std::string format_epsilon(double eps) { return std::isinf(eps) ? "inf" : shortest(eps); }

double parse_epsilon(const std::string& s) {
    if (s == "inf" || s == "Inf" || s == "INF" || s == "infinity") return AttackConfig::kUnbounded;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || std::isnan(v) || v < 0.0) {
        throw ValidationError("epsilon must be a non-negative number or 'inf', got '" + s + "'");
    }
    return v;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

EvalReport build_report(const Checkpoint& base, const Checkpoint& attacked, const Dataset& test,
                        const TriggerSpec& trigger, const AttackConfig& cfg, int threads) {
    if (!(base.spec == attacked.spec)) throw ValidationError("base and attacked checkpoints have different model specs");
    EvalReport r;
    r.started_at = utc_timestamp();
    const Model m = base.model();
    const Model mp = attacked.model();
    r.test_accuracy_base = accuracy(m, test, threads);
    r.test_accuracy_attacked = accuracy(mp, test, threads);
    const Dataset triggered = poison_eval(test, trigger);
    r.backdoor_accuracy = accuracy(mp, triggered, threads);
    r.backdoor_accuracy_base = accuracy(m, triggered, threads);
    const Tensor theta = flatten_params(base.params);
    const Tensor theta_p = flatten_params(attacked.params);
    const DeltaPercents d = delta_percents(theta.data(), theta_p.data());
    r.delta_l1_pct = d.l1;
    r.delta_l2_pct = d.l2;
    r.delta_linf_pct = d.linf;
    r.max_abs_delta = diff_norm(theta.data(), theta_p.data(), Norm::Linf);
    r.config = cfg;
    r.target_label = trigger.target_label;
    r.test_dataset = test.id;
    r.finished_at = utc_timestamp();
    return r;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json cfg = {
        {"epsilon", epsilon_json(r.config.epsilon)},
        {"lambda", r.config.lambda},
        {"eta", r.config.eta},
        {"iterations", r.config.iterations},
        {"batch_size", r.config.batch_size},
        {"target_mode", std::string(target_mode_name(r.config.target_mode))},
        {"seed", r.config.seed},
    };
    return nlohmann::json{
        {"test_accuracy_base", r.test_accuracy_base},
        {"test_accuracy_attacked", r.test_accuracy_attacked},
        {"backdoor_accuracy", r.backdoor_accuracy},
        {"backdoor_accuracy_base", r.backdoor_accuracy_base},
        {"delta_l1_pct", r.delta_l1_pct},
        {"delta_l2_pct", r.delta_l2_pct},
        {"delta_linf_pct", r.delta_linf_pct},
        {"max_abs_delta", r.max_abs_delta},
        {"config", cfg},
        {"target_label", r.target_label},
        {"train_dataset", r.train_dataset},
        {"test_dataset", r.test_dataset},
        {"started_at", r.started_at},
        {"finished_at", r.finished_at},
    };
}

EvalReport report_from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.test_accuracy_base = j.at("test_accuracy_base").get<double>();
        r.test_accuracy_attacked = j.at("test_accuracy_attacked").get<double>();
        r.backdoor_accuracy = j.at("backdoor_accuracy").get<double>();
        r.backdoor_accuracy_base = j.value("backdoor_accuracy_base", 0.0);
        r.delta_l1_pct = j.at("delta_l1_pct").get<double>();
        r.delta_l2_pct = j.at("delta_l2_pct").get<double>();
        r.delta_linf_pct = j.at("delta_linf_pct").get<double>();
        r.max_abs_delta = j.value("max_abs_delta", 0.0);
        const auto& c = j.at("config");
        r.config.epsilon = epsilon_from_json(c.at("epsilon"));
        r.config.lambda = c.at("lambda").get<double>();
        r.config.eta = c.at("eta").get<double>();
        r.config.iterations = c.at("iterations").get<int>();
        r.config.batch_size = c.at("batch_size").get<int>();
        r.config.target_mode = parse_target_mode(c.at("target_mode").get<std::string>());
        r.config.seed = c.at("seed").get<uint64_t>();
        r.target_label = j.at("target_label").get<int32_t>();
        r.train_dataset = j.value("train_dataset", "");
        r.test_dataset = j.value("test_dataset", "");
        r.started_at = j.value("started_at", "");
        r.finished_at = j.value("finished_at", "");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report JSON: ") + e.what());
    }
}

void write_report_json(const EvalReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json(r).dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

EvalReport read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

void append_sweep_csv(const EvalReport& r, const std::filesystem::path& path) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open " + path.string() + " for appending");
    if (fresh) out << kSweepCsvHeader << '\n';
    out << format_epsilon(r.config.epsilon) << ',' << shortest(r.config.lambda) << ',' << shortest(r.test_accuracy_base)
        << ',' << shortest(r.test_accuracy_attacked) << ',' << shortest(r.backdoor_accuracy) << ','
        << shortest(r.delta_linf_pct) << ',' << shortest(r.delta_l1_pct) << ',' << shortest(r.delta_l2_pct) << ','
        << r.config.seed << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::string format_report_table(const std::vector<EvalReport>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "epsilon" << std::setw(10) << "lambda" << std::right << std::setw(10)
       << "acc(M)" << std::setw(10) << "acc(M')" << std::setw(10) << "backdoor" << std::setw(10) << "%dLinf"
       << std::setw(10) << "%dL1" << std::setw(10) << "%dL2" << '\n';
    os << std::fixed;
    for (const auto& r : rows) {
        os << std::left << std::setw(10) << format_epsilon(r.config.epsilon) << std::setw(10)
           << shortest(r.config.lambda) << std::right << std::setprecision(2) << std::setw(10)
           << 100.0 * r.test_accuracy_base << std::setw(10) << 100.0 * r.test_accuracy_attacked << std::setw(10)
           << 100.0 * r.backdoor_accuracy << std::setprecision(3) << std::setw(10) << r.delta_linf_pct
           << std::setw(10) << r.delta_l1_pct << std::setw(10) << r.delta_l2_pct << '\n';
    }
    return os.str();
}

}  // namespace awp
