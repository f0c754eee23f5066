#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carrysim/stats.hpp"
#include "carrysim/training.hpp"

namespace carrysim {

// Grid of configurations; each cell trains trials_per_config independent
// networks.
struct ExperimentPlan {
    std::vector<Operator> operators{Operator::Add, Operator::Sub};
    std::vector<double> thresholds{0.7, 0.8, 0.9};
    std::vector<int> hidden_dims{24, 48, 72};
    int trials_per_config = 30;
    std::uint64_t master_seed = 1;
    long max_epochs = 20000;
    std::string output_dir = "results";

    void validate() const;
};

// Cross-trial statistics for one (operator, threshold, hidden_dim) cell.
// Everything except the failure count is computed over converged trials.
struct CellStats {
    Operator op = Operator::Add;
    double theta = 0.9;
    int hidden_dim = 48;
    int trials = 0;
    int converged = 0;
    double mean_epochs = 0.0;
    double overall_mean = 0.0;  // of per-trial overall mean answer steps
    double overall_sd = 0.0;
    std::map<int, double> class_mean;
    std::map<int, double> class_sd;
};

struct AggregateTable {
    std::vector<CellStats> cells;  // plan grid order
};

struct GroupedAnalysis {
    AnovaResult anova;
    PosthocResult posthoc;
};

// One ANOVA + post hoc with the grid coordinates it was computed at. The
// factor names the grouping variable; the optional fields pin the levels
// that were held fixed.
struct FactorAnalysis {
    std::string factor;  // "carries", "confidence_threshold" or "hidden_dim"
    Operator op = Operator::Add;
    std::optional<double> theta;
    std::optional<int> hidden_dim;
    GroupedAnalysis result;
};

struct ExperimentResult {
    AggregateTable table;
    std::vector<TrialRecord> trials;  // cell order, then trial index
};

// Stable per-trial seed so any execution order (or worker count) trains
// identical networks.
std::uint64_t child_seed(std::uint64_t master_seed, Operator op, double theta, int hidden_dim,
                         int trial_index);

// Shortest decimal rendering of a threshold, e.g. 0.7, 0.85.
std::string format_theta(double theta);
std::string cell_name(Operator op, double theta, int hidden_dim);
std::string trial_filename(Operator op, double theta, int hidden_dim, int trial_index);

// Trains every cell of the plan, persists one JSON file per trial under
// <output_dir>/trials/, and aggregates the outcomes. Non-convergence is a
// recorded outcome; the aggregate flags cells with no converged trials.
ExperimentResult run_experiment(const ExperimentPlan& plan, int workers = 1);

// Cross-trial aggregation alone, for results already in memory.
AggregateTable aggregate_trials(const ExperimentPlan& plan,
                                const std::vector<TrialRecord>& trials);

// Carry-class effect within one cell: each converged trial contributes its
// per-class mean answer step as one observation per class.
GroupedAnalysis analysis_one(const std::vector<TrialRecord>& cell_trials);

// Threshold effect at fixed operator and hidden_dim: groups are the
// per-trial overall mean answer steps, one group per threshold.
GroupedAnalysis analysis_two_threshold(const std::vector<TrialRecord>& trials);

// Hidden-dimension effect at fixed operator and threshold.
GroupedAnalysis analysis_two_hidden(const std::vector<TrialRecord>& trials);

// Every computable factor analysis for the plan; factors whose groups are
// too small (fewer than two converged trials in any level) are skipped.
std::vector<FactorAnalysis> run_analyses(const ExperimentPlan& plan,
                                         const std::vector<TrialRecord>& trials);

// Writes aggregate.csv, analyses.json and fig_data/*.csv under out_dir.
void report(const AggregateTable& table, const std::vector<FactorAnalysis>& analyses,
            const std::filesystem::path& out_dir);

}  // namespace carrysim
