#include "carrysim/io.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace carrysim {

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw std::invalid_argument("matrix payload does not match its shape");
    }
    Eigen::MatrixXd m(rows, cols);
    Eigen::Index idx = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = data.at(static_cast<std::size_t>(idx++)).get<double>();
        }
    }
    return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json data = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json data = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v(i));
    return data;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
    }
    return v;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

// Header lookup: every wanted column must exist exactly once.
std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                const std::vector<std::string>& wanted) {
    std::map<std::string, std::size_t> index;
    for (const std::string& name : wanted) {
        std::size_t found = header.size();
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                if (found != header.size()) {
                    throw std::invalid_argument("duplicate CSV column: " + name);
                }
                found = i;
            }
        }
        if (found == header.size()) {
            throw std::invalid_argument("missing CSV column: " + name);
        }
        index[name] = found;
    }
    return index;
}

double parse_double(const std::string& s, std::size_t line_no) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": not a number: " + s);
    }
    if (used != s.size()) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": not a number: " + s);
    }
    return value;
}

long parse_long(const std::string& s, std::size_t line_no) {
    std::size_t used = 0;
    long value = 0;
    try {
        value = std::stol(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": not an integer: " + s);
    }
    if (used != s.size()) {
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": not an integer: " + s);
    }
    return value;
}

bool parse_bool(const std::string& s, std::size_t line_no) {
    if (s == "1" || s == "true" || s == "TRUE" || s == "True") return true;
    if (s == "0" || s == "false" || s == "FALSE" || s == "False") return false;
    throw std::invalid_argument("line " + std::to_string(line_no) + ": not a boolean: " + s);
}

bool is_numeric(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& config) {
    return {{"op", to_string(config.op)},
            {"hidden_dim", config.hidden_dim},
            {"confidence_threshold", config.confidence_threshold},
            {"max_steps", config.max_steps},
            {"width", config.width}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig config;
    config.op = operator_from_string(j.at("op").get<std::string>());
    config.hidden_dim = j.at("hidden_dim").get<int>();
    config.confidence_threshold = j.at("confidence_threshold").get<double>();
    if (j.contains("max_steps")) config.max_steps = j.at("max_steps").get<int>();
    if (j.contains("width")) config.width = j.at("width").get<int>();
    config.validate();
    return config;
}

nlohmann::json trial_to_json(const TrialRecord& trial) {
    nlohmann::json steps = nlohmann::json::object();
    for (const auto& [carries, values] : trial.answer_steps) {
        steps[std::to_string(carries)] = values;
    }
    nlohmann::json means = nlohmann::json::object();
    for (const auto& [carries, mean] : trial.mean_answer_step) {
        means[std::to_string(carries)] = mean;
    }
    nlohmann::json j = {{"config", config_to_json(trial.config)},
                        {"seed", trial.seed},
                        {"final_accuracy", trial.final_accuracy},
                        {"answer_steps", std::move(steps)},
                        {"mean_answer_step", std::move(means)},
                        {"overall_mean_answer_step", trial.overall_mean_answer_step}};
    if (trial.epochs_to_converge.has_value()) {
        j["epochs_to_converge"] = *trial.epochs_to_converge;
    } else {
        j["epochs_to_converge"] = nullptr;
    }
    return j;
}

TrialRecord trial_from_json(const nlohmann::json& j) {
    TrialRecord trial;
    trial.config = config_from_json(j.at("config"));
    trial.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("epochs_to_converge").is_null()) {
        trial.epochs_to_converge = j.at("epochs_to_converge").get<long>();
    }
    trial.final_accuracy = j.at("final_accuracy").get<double>();
    for (const auto& [key, values] : j.at("answer_steps").items()) {
        trial.answer_steps[std::stoi(key)] = values.get<std::vector<int>>();
    }
    for (const auto& [key, mean] : j.at("mean_answer_step").items()) {
        trial.mean_answer_step[std::stoi(key)] = mean.get<double>();
    }
    trial.overall_mean_answer_step = j.at("overall_mean_answer_step").get<double>();
    return trial;
}

nlohmann::json params_to_json(const NetworkParams& params, const ModelConfig& config) {
    return {{"config", config_to_json(config)},
            {"w1", matrix_to_json(params.w1)},
            {"b1", vector_to_json(params.b1)},
            {"w2", matrix_to_json(params.w2)},
            {"b2", vector_to_json(params.b2)}};
}

std::pair<ModelConfig, NetworkParams> params_from_json(const nlohmann::json& j) {
    const ModelConfig config = config_from_json(j.at("config"));
    NetworkParams params = NetworkParams::zeros(config);
    const Eigen::MatrixXd w1 = matrix_from_json(j.at("w1"));
    const Eigen::MatrixXd w2 = matrix_from_json(j.at("w2"));
    const Eigen::VectorXd b1 = vector_from_json(j.at("b1"));
    const Eigen::VectorXd b2 = vector_from_json(j.at("b2"));
    if (w1.rows() != params.w1.rows() || w1.cols() != params.w1.cols() ||
        w2.rows() != params.w2.rows() || w2.cols() != params.w2.cols() ||
        b1.size() != params.b1.size() || b2.size() != params.b2.size()) {
        throw std::invalid_argument("weight shapes do not match the model config");
    }
    params.w1 = w1;
    params.b1 = b1;
    params.w2 = w2;
    params.b2 = b2;
    return {config, std::move(params)};
}

nlohmann::json plan_to_json(const ExperimentPlan& plan) {
    nlohmann::json ops = nlohmann::json::array();
    for (Operator op : plan.operators) ops.push_back(to_string(op));
    return {{"operators", std::move(ops)},
            {"thresholds", plan.thresholds},
            {"hidden_dims", plan.hidden_dims},
            {"trials_per_config", plan.trials_per_config},
            {"master_seed", plan.master_seed},
            {"max_epochs", plan.max_epochs},
            {"output_dir", plan.output_dir}};
}

ExperimentPlan plan_from_json(const nlohmann::json& j) {
    ExperimentPlan plan;
    if (j.contains("operators")) {
        plan.operators.clear();
        for (const auto& op : j.at("operators")) {
            plan.operators.push_back(operator_from_string(op.get<std::string>()));
        }
    }
    if (j.contains("thresholds")) plan.thresholds = j.at("thresholds").get<std::vector<double>>();
    if (j.contains("hidden_dims")) plan.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    if (j.contains("trials_per_config")) {
        plan.trials_per_config = j.at("trials_per_config").get<int>();
    }
    if (j.contains("master_seed")) plan.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("max_epochs")) plan.max_epochs = j.at("max_epochs").get<long>();
    if (j.contains("output_dir")) plan.output_dir = j.at("output_dir").get<std::string>();
    plan.validate();
    return plan;
}

nlohmann::json anova_to_json(const AnovaResult& r) {
    return {{"f", r.f},
            {"df_between", r.df_between},
            {"df_within", r.df_within},
            {"p_value", r.p_value},
            {"eta_squared", r.eta_squared}};
}

nlohmann::json posthoc_to_json(const PosthocResult& r) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const PairwiseComparison& pc : r.pairs) {
        pairs.push_back({{"group_i", pc.group_i},
                         {"group_j", pc.group_j},
                         {"mean_diff", pc.mean_diff},
                         {"q_statistic", pc.q_statistic},
                         {"welch_df", pc.welch_df},
                         {"p_value", pc.p_value}});
    }
    nlohmann::json groups = nlohmann::json::array();
    for (const GroupSummary& g : r.groups) {
        groups.push_back({{"label", g.label}, {"n", g.n}, {"mean", g.mean}, {"sd", g.sd}});
    }
    return {{"chain", r.annotated_chain()}, {"pairs", std::move(pairs)},
            {"groups", std::move(groups)}};
}

nlohmann::json rt_analysis_to_json(const HumanRtAnalysis& analysis) {
    nlohmann::json classes = nlohmann::json::array();
    for (const GroupSummary& g : analysis.per_class) {
        classes.push_back({{"label", g.label}, {"n", g.n}, {"mean", g.mean}, {"sd", g.sd}});
    }
    return {{"per_class", std::move(classes)},
            {"anova", anova_to_json(analysis.anova)},
            {"posthoc", posthoc_to_json(analysis.posthoc)},
            {"warnings", analysis.warnings}};
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void write_dataset_csv(const std::vector<Operation>& operations, std::ostream& out) {
    out << "a_bits,b_bits,op,z_bits,carries\n";
    for (const Operation& op : operations) {
        out << bits_to_string(op.a.bits) << ',' << bits_to_string(op.b.bits) << ','
            << to_string(op.op) << ',' << bits_to_string(op.target_bits) << ','
            << op.carry_count << '\n';
    }
}

void write_dataset_csv(const std::vector<Operation>& operations,
                       const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_dataset_csv(operations, out);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<RtRecord> read_rt_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty response-time CSV");
    const auto columns = header_index(
        split_csv_line(line), {"participant_id", "operator", "carries", "rt_seconds", "correct"});

    std::vector<RtRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 5) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 5 fields");
        }
        RtRecord r;
        r.participant_id = fields[columns.at("participant_id")];
        r.op = operator_from_string(fields[columns.at("operator")]);
        r.carry_class = static_cast<int>(parse_long(fields[columns.at("carries")], line_no));
        r.rt_seconds = parse_double(fields[columns.at("rt_seconds")], line_no);
        r.correct = parse_bool(fields[columns.at("correct")], line_no);
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<RtRecord> read_rt_csv(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    return read_rt_csv(in);
}

std::vector<GroupSummary> read_summary_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty summary CSV");
    const auto columns = header_index(split_csv_line(line), {"label", "n", "mean", "sd"});

    std::vector<GroupSummary> groups;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 4) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 4 fields");
        }
        GroupSummary g;
        g.label = fields[columns.at("label")];
        g.n = parse_long(fields[columns.at("n")], line_no);
        g.mean = parse_double(fields[columns.at("mean")], line_no);
        g.sd = parse_double(fields[columns.at("sd")], line_no);
        groups.push_back(std::move(g));
    }
    return groups;
}

std::vector<GroupSummary> read_summary_csv(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    return read_summary_csv(in);
}

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_grouped_values_csv(
    std::istream& in, const std::string& group_col, const std::string& value_col) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty observations CSV");
    const auto columns = header_index(split_csv_line(line), {group_col, value_col});

    std::vector<std::string> labels;
    std::vector<std::vector<double>> groups;
    std::map<std::string, std::size_t> index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() <= std::max(columns.at(group_col), columns.at(value_col))) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": too few fields");
        }
        const std::string& label = fields[columns.at(group_col)];
        const double value = parse_double(fields[columns.at(value_col)], line_no);
        const auto [it, inserted] = index.try_emplace(label, labels.size());
        if (inserted) {
            labels.push_back(label);
            groups.emplace_back();
        }
        groups[it->second].push_back(value);
    }

    // Sort groups numerically when every label is a number.
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const bool numeric =
        std::all_of(labels.begin(), labels.end(), [](const std::string& s) { return is_numeric(s); });
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (numeric) return std::stod(labels[a]) < std::stod(labels[b]);
        return labels[a] < labels[b];
    });
    std::vector<std::string> sorted_labels;
    std::vector<std::vector<double>> sorted_groups;
    for (std::size_t i : order) {
        sorted_labels.push_back(labels[i]);
        sorted_groups.push_back(std::move(groups[i]));
    }
    return {std::move(sorted_labels), std::move(sorted_groups)};
}

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_grouped_values_csv(
    const std::filesystem::path& path, const std::string& group_col,
    const std::string& value_col) {
    std::ifstream in = open_input(path);
    return read_grouped_values_csv(in, group_col, value_col);
}

}  // namespace carrysim
