#include "carrysim/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "carrysim/io.hpp"

namespace carrysim {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct Task {
    ModelConfig config;
    std::uint64_t seed = 0;
    int trial_index = 0;
    const std::vector<Operation>* dataset = nullptr;
};

double mean_of(const std::vector<double>& values) {
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

double sd_of(const std::vector<double>& values) {
    if (values.size() < 2) return kNan;
    const double mean = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<const TrialRecord*> converged_only(const std::vector<TrialRecord>& trials) {
    std::vector<const TrialRecord*> kept;
    for (const TrialRecord& t : trials) {
        if (t.converged()) kept.push_back(&t);
    }
    return kept;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.10g", v);
    return buffer;
}

nlohmann::json factor_to_json(const FactorAnalysis& fa) {
    nlohmann::json j = {{"factor", fa.factor},
                        {"operator", to_string(fa.op)},
                        {"anova", anova_to_json(fa.result.anova)},
                        {"posthoc", posthoc_to_json(fa.result.posthoc)}};
    if (fa.theta.has_value()) j["theta"] = *fa.theta;
    if (fa.hidden_dim.has_value()) j["hidden_dim"] = *fa.hidden_dim;
    return j;
}

void require_same(bool condition, const char* what) {
    if (!condition) throw std::invalid_argument(std::string("analysis input mixes ") + what);
}

}  // namespace

void ExperimentPlan::validate() const {
    if (operators.empty()) throw std::invalid_argument("plan needs at least one operator");
    if (thresholds.empty()) throw std::invalid_argument("plan needs at least one threshold");
    if (hidden_dims.empty()) throw std::invalid_argument("plan needs at least one hidden_dim");
    if (trials_per_config < 1) throw std::invalid_argument("trials_per_config must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be nonnegative");
    if (output_dir.empty()) throw std::invalid_argument("output_dir must not be empty");
    for (double theta : thresholds) {
        if (!(theta > 0.5 && theta < 1.0)) {
            throw std::invalid_argument("thresholds must lie in (0.5, 1)");
        }
    }
    for (int dh : hidden_dims) {
        if (dh < 1) throw std::invalid_argument("hidden_dims must be positive");
    }
}

std::uint64_t child_seed(std::uint64_t master_seed, Operator op, double theta, int hidden_dim,
                         int trial_index) {
    std::uint64_t seed = master_seed;
    seed = hash_combine(seed, op == Operator::Add ? 0u : 1u);
    seed = hash_combine(seed, static_cast<std::uint64_t>(std::llround(theta * 100.0)));
    seed = hash_combine(seed, static_cast<std::uint64_t>(hidden_dim));
    seed = hash_combine(seed, static_cast<std::uint64_t>(trial_index));
    return seed;
}

std::string format_theta(double theta) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%g", theta);
    return buffer;
}

std::string cell_name(Operator op, double theta, int hidden_dim) {
    return to_string(op) + "_" + format_theta(theta) + "_" + std::to_string(hidden_dim);
}

std::string trial_filename(Operator op, double theta, int hidden_dim, int trial_index) {
    char index[16];
    std::snprintf(index, sizeof index, "%03d", trial_index);
    return cell_name(op, theta, hidden_dim) + "_" + index + ".json";
}

ExperimentResult run_experiment(const ExperimentPlan& plan, int workers) {
    plan.validate();

    const std::vector<Operation> add_ops = enumerate_dataset(Operator::Add);
    const std::vector<Operation> sub_ops = enumerate_dataset(Operator::Sub);

    std::vector<Task> tasks;
    for (Operator op : plan.operators) {
        for (double theta : plan.thresholds) {
            for (int dh : plan.hidden_dims) {
                for (int trial = 0; trial < plan.trials_per_config; ++trial) {
                    Task task;
                    task.config.op = op;
                    task.config.hidden_dim = dh;
                    task.config.confidence_threshold = theta;
                    task.seed = child_seed(plan.master_seed, op, theta, dh, trial);
                    task.trial_index = trial;
                    task.dataset = op == Operator::Add ? &add_ops : &sub_ops;
                    tasks.push_back(task);
                }
            }
        }
    }

    // Each worker claims task indices from a shared counter and writes into
    // its own result slot, so the outcome is independent of scheduling.
    std::vector<TrialRecord> results(tasks.size());
    const auto work = [&](std::size_t index) {
        const Task& task = tasks[index];
        auto [params, record] =
            train_network(task.config, AdamConfig{}, *task.dataset, task.seed, plan.max_epochs);
        results[index] = std::move(record);
    };

    const int thread_count = std::max(1, workers);
    if (thread_count == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(thread_count));
        for (int t = 0; t < thread_count; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
                    work(i);
                }
            });
        }
        for (std::thread& worker : pool) worker.join();
    }

    const std::filesystem::path trial_dir =
        std::filesystem::path(plan.output_dir) / "trials";
    std::filesystem::create_directories(trial_dir);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Task& task = tasks[i];
        write_json_file(trial_to_json(results[i]),
                        trial_dir / trial_filename(task.config.op,
                                                   task.config.confidence_threshold,
                                                   task.config.hidden_dim, task.trial_index));
    }

    ExperimentResult result;
    result.table = aggregate_trials(plan, results);
    result.trials = std::move(results);
    return result;
}

AggregateTable aggregate_trials(const ExperimentPlan& plan,
                                const std::vector<TrialRecord>& trials) {
    AggregateTable table;
    for (Operator op : plan.operators) {
        for (double theta : plan.thresholds) {
            for (int dh : plan.hidden_dims) {
                CellStats cell;
                cell.op = op;
                cell.theta = theta;
                cell.hidden_dim = dh;

                std::vector<double> overall;
                std::vector<double> epochs;
                std::map<int, std::vector<double>> class_values;
                for (const TrialRecord& trial : trials) {
                    if (trial.config.op != op || trial.config.hidden_dim != dh ||
                        trial.config.confidence_threshold != theta) {
                        continue;
                    }
                    ++cell.trials;
                    if (!trial.converged()) continue;
                    ++cell.converged;
                    overall.push_back(trial.overall_mean_answer_step);
                    epochs.push_back(static_cast<double>(*trial.epochs_to_converge));
                    for (const auto& [carries, mean] : trial.mean_answer_step) {
                        class_values[carries].push_back(mean);
                    }
                }

                cell.mean_epochs = epochs.empty() ? kNan : mean_of(epochs);
                cell.overall_mean = overall.empty() ? kNan : mean_of(overall);
                cell.overall_sd = sd_of(overall);
                for (const auto& [carries, values] : class_values) {
                    cell.class_mean[carries] = mean_of(values);
                    cell.class_sd[carries] = sd_of(values);
                }
                table.cells.push_back(std::move(cell));
            }
        }
    }
    return table;
}

GroupedAnalysis analysis_one(const std::vector<TrialRecord>& cell_trials) {
    const auto converged = converged_only(cell_trials);
    if (converged.size() < 2) {
        throw std::invalid_argument("carry analysis needs at least two converged trials");
    }
    for (const TrialRecord* t : converged) {
        require_same(t->config.op == converged.front()->config.op, "operators");
        require_same(t->config.confidence_threshold ==
                         converged.front()->config.confidence_threshold,
                     "thresholds");
        require_same(t->config.hidden_dim == converged.front()->config.hidden_dim,
                     "hidden dims");
    }

    std::map<int, std::vector<double>> by_class;
    for (const TrialRecord* t : converged) {
        for (const auto& [carries, mean] : t->mean_answer_step) {
            by_class[carries].push_back(mean);
        }
    }
    std::vector<std::vector<double>> groups;
    std::vector<std::string> labels;
    for (const auto& [carries, values] : by_class) {
        if (values.size() != converged.size()) {
            throw std::invalid_argument("trial is missing a carry class");
        }
        groups.push_back(values);
        labels.push_back(std::to_string(carries));
    }

    GroupedAnalysis analysis;
    analysis.anova = anova_oneway(groups);
    analysis.posthoc = games_howell(groups, labels);
    return analysis;
}

namespace {

template <typename Key, typename Project>
GroupedAnalysis grouped_overall_analysis(const std::vector<TrialRecord>& trials,
                                         Project project, const char* description) {
    const auto converged = converged_only(trials);
    std::map<Key, std::vector<double>> by_level;
    for (const TrialRecord* t : converged) {
        by_level[project(*t)].push_back(t->overall_mean_answer_step);
    }
    if (by_level.size() < 2) {
        throw std::invalid_argument(std::string(description) + " needs at least two levels");
    }

    std::vector<std::vector<double>> groups;
    std::vector<std::string> labels;
    for (const auto& [level, values] : by_level) {
        if (values.size() < 2) {
            throw std::invalid_argument(std::string(description) +
                                        " needs two converged trials per level");
        }
        groups.push_back(values);
        if constexpr (std::is_same_v<Key, double>) {
            labels.push_back(format_theta(level));
        } else {
            labels.push_back(std::to_string(level));
        }
    }

    GroupedAnalysis analysis;
    analysis.anova = anova_oneway(groups);
    analysis.posthoc = games_howell(groups, labels);
    return analysis;
}

}  // namespace

GroupedAnalysis analysis_two_threshold(const std::vector<TrialRecord>& trials) {
    for (const TrialRecord& t : trials) {
        require_same(t.config.op == trials.front().config.op, "operators");
        require_same(t.config.hidden_dim == trials.front().config.hidden_dim, "hidden dims");
    }
    return grouped_overall_analysis<double>(
        trials, [](const TrialRecord& t) { return t.config.confidence_threshold; },
        "threshold analysis");
}

GroupedAnalysis analysis_two_hidden(const std::vector<TrialRecord>& trials) {
    for (const TrialRecord& t : trials) {
        require_same(t.config.op == trials.front().config.op, "operators");
        require_same(t.config.confidence_threshold ==
                         trials.front().config.confidence_threshold,
                     "thresholds");
    }
    return grouped_overall_analysis<int>(
        trials, [](const TrialRecord& t) { return t.config.hidden_dim; },
        "hidden-dimension analysis");
}

std::vector<FactorAnalysis> run_analyses(const ExperimentPlan& plan,
                                         const std::vector<TrialRecord>& trials) {
    const auto cell_trials = [&](Operator op, double theta, int dh) {
        std::vector<TrialRecord> cell;
        for (const TrialRecord& t : trials) {
            if (t.config.op == op && t.config.confidence_threshold == theta &&
                t.config.hidden_dim == dh) {
                cell.push_back(t);
            }
        }
        return cell;
    };
    const auto converged_count = [](const std::vector<TrialRecord>& cell) {
        return converged_only(cell).size();
    };

    std::vector<FactorAnalysis> analyses;
    // Carry-class effect, one analysis per grid cell.
    for (Operator op : plan.operators) {
        for (double theta : plan.thresholds) {
            for (int dh : plan.hidden_dims) {
                const auto cell = cell_trials(op, theta, dh);
                if (converged_count(cell) < 2) continue;
                FactorAnalysis fa;
                fa.factor = "carries";
                fa.op = op;
                fa.theta = theta;
                fa.hidden_dim = dh;
                fa.result = analysis_one(cell);
                analyses.push_back(std::move(fa));
            }
        }
    }
    // Threshold effect, one analysis per (operator, hidden_dim).
    if (plan.thresholds.size() >= 2) {
        for (Operator op : plan.operators) {
            for (int dh : plan.hidden_dims) {
                std::vector<TrialRecord> pooled;
                bool complete = true;
                for (double theta : plan.thresholds) {
                    const auto cell = cell_trials(op, theta, dh);
                    if (converged_count(cell) < 2) complete = false;
                    pooled.insert(pooled.end(), cell.begin(), cell.end());
                }
                if (!complete) continue;
                FactorAnalysis fa;
                fa.factor = "confidence_threshold";
                fa.op = op;
                fa.hidden_dim = dh;
                fa.result = analysis_two_threshold(pooled);
                analyses.push_back(std::move(fa));
            }
        }
    }
    // Hidden-dimension effect, one analysis per (operator, threshold).
    if (plan.hidden_dims.size() >= 2) {
        for (Operator op : plan.operators) {
            for (double theta : plan.thresholds) {
                std::vector<TrialRecord> pooled;
                bool complete = true;
                for (int dh : plan.hidden_dims) {
                    const auto cell = cell_trials(op, theta, dh);
                    if (converged_count(cell) < 2) complete = false;
                    pooled.insert(pooled.end(), cell.begin(), cell.end());
                }
                if (!complete) continue;
                FactorAnalysis fa;
                fa.factor = "hidden_dim";
                fa.op = op;
                fa.theta = theta;
                fa.result = analysis_two_hidden(pooled);
                analyses.push_back(std::move(fa));
            }
        }
    }
    return analyses;
}

void report(const AggregateTable& table, const std::vector<FactorAnalysis>& analyses,
            const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path fig_dir = out_dir / "fig_data";
    std::filesystem::create_directories(fig_dir);

    int max_class = 4;
    for (const CellStats& cell : table.cells) {
        if (!cell.class_mean.empty()) max_class = std::max(max_class, cell.class_mean.rbegin()->first);
    }

    const auto open_out = [](const std::filesystem::path& path) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        return out;
    };

    {
        std::ofstream out = open_out(out_dir / "aggregate.csv");
        out << "operator,theta,hidden_dim,trials,converged,mean_epochs,overall_mean,overall_sd";
        for (int c = 0; c <= max_class; ++c) {
            out << ",class" << c << "_mean,class" << c << "_sd";
        }
        out << '\n';
        for (const CellStats& cell : table.cells) {
            out << to_string(cell.op) << ',' << format_theta(cell.theta) << ','
                << cell.hidden_dim << ',' << cell.trials << ',' << cell.converged << ','
                << format_number(cell.mean_epochs) << ',' << format_number(cell.overall_mean)
                << ',' << format_number(cell.overall_sd);
            for (int c = 0; c <= max_class; ++c) {
                const auto mean = cell.class_mean.find(c);
                const auto sd = cell.class_sd.find(c);
                out << ',' << (mean == cell.class_mean.end() ? "" : format_number(mean->second))
                    << ',' << (sd == cell.class_sd.end() ? "" : format_number(sd->second));
            }
            out << '\n';
        }
        if (!out) throw std::runtime_error("write failed: aggregate.csv");
    }

    {
        nlohmann::json carry = nlohmann::json::array();
        nlohmann::json threshold = nlohmann::json::array();
        nlohmann::json hidden = nlohmann::json::array();
        for (const FactorAnalysis& fa : analyses) {
            if (fa.factor == "carries") {
                carry.push_back(factor_to_json(fa));
            } else if (fa.factor == "confidence_threshold") {
                threshold.push_back(factor_to_json(fa));
            } else {
                hidden.push_back(factor_to_json(fa));
            }
        }
        write_json_file({{"carry_effect", std::move(carry)},
                         {"threshold_effect", std::move(threshold)},
                         {"hidden_dim_effect", std::move(hidden)}},
                        out_dir / "analyses.json");
    }

    std::vector<Operator> ops;
    for (const CellStats& cell : table.cells) {
        if (std::find(ops.begin(), ops.end(), cell.op) == ops.end()) ops.push_back(cell.op);
    }
    for (Operator op : ops) {
        {
            std::ofstream out = open_out(fig_dir / ("answer_steps_by_class_" + to_string(op) +
                                                    ".csv"));
            out << "theta,hidden_dim,carries,mean,sd\n";
            for (const CellStats& cell : table.cells) {
                if (cell.op != op) continue;
                for (const auto& [carries, mean] : cell.class_mean) {
                    out << format_theta(cell.theta) << ',' << cell.hidden_dim << ',' << carries
                        << ',' << format_number(mean) << ','
                        << format_number(cell.class_sd.at(carries)) << '\n';
                }
            }
        }
        {
            std::ofstream out = open_out(fig_dir / ("answer_steps_by_threshold_" +
                                                    to_string(op) + ".csv"));
            out << "hidden_dim,theta,mean,sd\n";
            for (const CellStats& cell : table.cells) {
                if (cell.op != op) continue;
                out << cell.hidden_dim << ',' << format_theta(cell.theta) << ','
                    << format_number(cell.overall_mean) << ','
                    << format_number(cell.overall_sd) << '\n';
            }
        }
        {
            std::ofstream out = open_out(fig_dir / ("answer_steps_by_hidden_dim_" +
                                                    to_string(op) + ".csv"));
            out << "theta,hidden_dim,mean,sd\n";
            for (const CellStats& cell : table.cells) {
                if (cell.op != op) continue;
                out << format_theta(cell.theta) << ',' << cell.hidden_dim << ','
                    << format_number(cell.overall_mean) << ','
                    << format_number(cell.overall_sd) << '\n';
            }
        }
    }
}

}  // namespace carrysim
