#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carrysim/experiment.hpp"
#include "carrysim/network.hpp"
#include "carrysim/stats.hpp"
#include "carrysim/training.hpp"

namespace carrysim {

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

nlohmann::json trial_to_json(const TrialRecord& trial);
TrialRecord trial_from_json(const nlohmann::json& j);

// Weights as row-major arrays with explicit shapes, plus the model config.
nlohmann::json params_to_json(const NetworkParams& params, const ModelConfig& config);
std::pair<ModelConfig, NetworkParams> params_from_json(const nlohmann::json& j);

nlohmann::json plan_to_json(const ExperimentPlan& plan);
ExperimentPlan plan_from_json(const nlohmann::json& j);

nlohmann::json anova_to_json(const AnovaResult& r);
nlohmann::json posthoc_to_json(const PosthocResult& r);
nlohmann::json rt_analysis_to_json(const HumanRtAnalysis& analysis);

// Two-space indented dump with a trailing newline; keys are emitted sorted,
// so equal values always serialize to equal bytes.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

// Dataset rows: a_bits,b_bits,op,z_bits,carries with MSB-first bit strings.
void write_dataset_csv(const std::vector<Operation>& operations, std::ostream& out);
void write_dataset_csv(const std::vector<Operation>& operations,
                       const std::filesystem::path& path);

// Response-time rows: participant_id,operator,carries,rt_seconds,correct.
std::vector<RtRecord> read_rt_csv(std::istream& in);
std::vector<RtRecord> read_rt_csv(const std::filesystem::path& path);

// Per-group summary rows: label,n,mean,sd.
std::vector<GroupSummary> read_summary_csv(std::istream& in);
std::vector<GroupSummary> read_summary_csv(const std::filesystem::path& path);

// Long-format observations: one value column keyed by one group column.
// Groups are returned sorted, numerically when every label parses as a
// number and lexicographically otherwise.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_grouped_values_csv(
    std::istream& in, const std::string& group_col, const std::string& value_col);
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_grouped_values_csv(
    const std::filesystem::path& path, const std::string& group_col,
    const std::string& value_col);

}  // namespace carrysim
