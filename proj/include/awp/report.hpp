#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "awp/attack.hpp"
#include "awp/checkpoint.hpp"
#include "awp/dataset.hpp"

namespace awp {

/// One row of the attack results table. Accuracies are fractions in [0,1];
/// deltas are percentages.
struct EvalReport {
    double test_accuracy_base = 0.0;
    double test_accuracy_attacked = 0.0;
    double backdoor_accuracy = 0.0;
    /// Rate at which the base model already predicts y_T on triggered inputs.
    double backdoor_accuracy_base = 0.0;
    double delta_l1_pct = 0.0;
    double delta_l2_pct = 0.0;
    double delta_linf_pct = 0.0;
    /// Raw max |theta' - theta|.
    double max_abs_delta = 0.0;

    AttackConfig config;
    int32_t target_label = 0;
    std::string train_dataset;
    std::string test_dataset;
    std::string started_at;
    std::string finished_at;

    bool operator==(const EvalReport& other) const;
};

EvalReport build_report(const Checkpoint& base, const Checkpoint& attacked, const Dataset& test,
                        const TriggerSpec& trigger, const AttackConfig& cfg, int threads = 1);

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

void write_report_json(const EvalReport& r, const std::filesystem::path& path);
EvalReport read_report_json(const std::filesystem::path& path);

/// Header of the sweep table.
extern const char* const kSweepCsvHeader;

/// Appends one row, writing the header first when the file is new or empty.
void append_sweep_csv(const EvalReport& r, const std::filesystem::path& path);

/// Aligned columns, percentages, for terminals.
std::string format_report_table(const std::vector<EvalReport>& rows);

std::string format_epsilon(double eps);
double parse_epsilon(const std::string& s);

/// UTC ISO-8601 timestamp with seconds.
std::string utc_timestamp();

}  // namespace awp
