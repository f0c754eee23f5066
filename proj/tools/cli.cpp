#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "carrysim/experiment.hpp"
#include "carrysim/io.hpp"

namespace carrysim::cli {

namespace {

Operator parse_operator(const std::string& name) { return operator_from_string(name); }

std::pair<int, int> parse_operand_pair(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) {
        throw std::invalid_argument("expected --op <a>,<b>, got: " + text);
    }
    std::size_t used = 0;
    const int a = std::stoi(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("bad operand: " + text.substr(0, comma));
    const std::string rest = text.substr(comma + 1);
    const int b = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("bad operand: " + rest);
    return {a, b};
}

int default_workers() {
    if (const char* env = std::getenv("CARRYSIM_WORKERS")) {
        try {
            const int workers = std::stoi(env);
            if (workers >= 1) return workers;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid CARRYSIM_WORKERS=" << env << '\n';
    }
    return 1;
}

void emit_json(const nlohmann::json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json_file(j, out_path);
    }
}

struct GenDataArgs {
    std::string op;
    int width = 4;
    std::string out;
};

void run_gen_data(const GenDataArgs& args) {
    const auto operations = enumerate_dataset(parse_operator(args.op), args.width);
    if (args.out.empty()) {
        write_dataset_csv(operations, std::cout);
    } else {
        write_dataset_csv(operations, std::filesystem::path(args.out));
        std::cerr << "wrote " << operations.size() << " operations to " << args.out << '\n';
    }
}

struct TrainArgs {
    std::string op;
    double theta = 0.9;
    int hidden = 48;
    int width = 4;
    std::uint64_t seed = 0;
    long max_epochs = 50000;
    int batch_size = 32;
    std::string out;
    std::string params_out;
    bool verbose = false;
};

void run_train(const TrainArgs& args) {
    ModelConfig config;
    config.op = parse_operator(args.op);
    config.hidden_dim = args.hidden;
    config.confidence_threshold = args.theta;
    config.width = args.width;
    AdamConfig adam;
    adam.batch_size = args.batch_size;

    const auto dataset = enumerate_dataset(config.op, config.width);
    const auto [params, record] =
        train_network(config, adam, dataset, args.seed, args.max_epochs);

    if (args.verbose) {
        if (record.converged()) {
            std::cerr << "converged after " << *record.epochs_to_converge << " epochs, mean answer step "
                      << record.overall_mean_answer_step << '\n';
        } else {
            std::cerr << "did not converge within " << args.max_epochs
                      << " epochs (accuracy " << record.final_accuracy << ")\n";
        }
    }
    emit_json(trial_to_json(record), args.out);
    if (!args.params_out.empty()) {
        write_json_file(params_to_json(params, config), args.params_out);
    }
}

struct TraceArgs {
    std::string params_path;
    std::string operands;
    double theta = -1.0;  // negative = keep the stored threshold
};

void run_trace(const TraceArgs& args) {
    auto [config, params] = params_from_json(read_json_file(args.params_path));
    if (args.theta > 0.0) config.confidence_threshold = args.theta;
    config.validate();

    const auto [a, b] = parse_operand_pair(args.operands);
    const Operation op =
        make_operation(config.op, Operand(a, config.width), Operand(b, config.width));

    std::cout << a << (config.op == Operator::Add ? " + " : " - ") << b << " = "
              << bits_to_string(op.target_bits) << " (" << op.carry_count
              << (config.op == Operator::Add ? " carries" : " borrows") << ")\n";
    std::cout << "confidence threshold " << config.confidence_threshold << '\n';

    const ForwardTrace trace = run_to_answer(params, config, op);
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        std::cout << "step " << t << ": p =";
        for (Eigen::Index i = 0; i < trace.steps[t].probs.size(); ++i) {
            char buffer[16];
            std::snprintf(buffer, sizeof buffer, " %.4f", trace.steps[t].probs(i));
            std::cout << buffer;
        }
        std::cout << "  digits = ";
        for (Digit d : trace.steps[t].decisions) {
            std::cout << (d == Digit::One ? '1' : d == Digit::Zero ? '0' : '?');
        }
        std::cout << '\n';
    }
    if (trace.answer_step.has_value()) {
        std::cout << "answer step: " << *trace.answer_step << '\n';
        std::cout << "predicted: " << bits_to_string(*trace.predicted_answer)
                  << (*trace.predicted_answer == op.target_bits ? " (correct)" : " (wrong)")
                  << '\n';
    } else {
        std::cout << "no answer within " << config.max_steps << " steps\n";
    }
}

struct RunArgs {
    std::string plan_path;
    std::string out;
    int workers = 1;
    bool verbose = false;
};

void run_run(const RunArgs& args) {
    ExperimentPlan plan = plan_from_json(read_json_file(args.plan_path));
    if (!args.out.empty()) plan.output_dir = args.out;
    if (args.verbose) {
        std::cerr << "grid: " << plan.operators.size() << " operator(s) x "
                  << plan.thresholds.size() << " threshold(s) x " << plan.hidden_dims.size()
                  << " hidden dim(s), " << plan.trials_per_config << " trial(s) per cell, "
                  << args.workers << " worker(s)\n";
    }

    const ExperimentResult result = run_experiment(plan, args.workers);
    const auto analyses = run_analyses(plan, result.trials);
    report(result.table, analyses, plan.output_dir);

    int converged = 0;
    for (const TrialRecord& t : result.trials) converged += t.converged() ? 1 : 0;
    std::cerr << "trained " << result.trials.size() << " network(s), " << converged
              << " converged; results in " << plan.output_dir << '\n';
}

struct AnalyzeArgs {
    std::string summary_path;
    std::string rt_path;
    std::string in_path;
    std::string group_col;
    std::string value_col;
    std::string out;
};

void run_analyze(const AnalyzeArgs& args) {
    nlohmann::json output;
    std::vector<std::string> chains;

    if (!args.summary_path.empty()) {
        const auto groups = read_summary_csv(std::filesystem::path(args.summary_path));
        const AnovaResult anova = anova_from_summary(groups);
        const PosthocResult posthoc = games_howell_from_summary(groups);
        output = {{"anova", anova_to_json(anova)}, {"posthoc", posthoc_to_json(posthoc)}};
        chains.push_back(posthoc.annotated_chain());
    } else if (!args.in_path.empty()) {
        const auto [labels, groups] = read_grouped_values_csv(
            std::filesystem::path(args.in_path), args.group_col, args.value_col);
        const AnovaResult anova = anova_oneway(groups);
        const PosthocResult posthoc = games_howell(groups, labels);
        output = {{"anova", anova_to_json(anova)}, {"posthoc", posthoc_to_json(posthoc)}};
        chains.push_back(posthoc.annotated_chain());
    } else {
        const auto records = read_rt_csv(std::filesystem::path(args.rt_path));
        for (Operator op : {Operator::Add, Operator::Sub}) {
            std::vector<RtRecord> subset;
            for (const RtRecord& r : records) {
                if (r.op == op) subset.push_back(r);
            }
            if (subset.empty()) continue;
            const HumanRtAnalysis analysis = human_rt_pipeline(subset);
            output[to_string(op)] = rt_analysis_to_json(analysis);
            chains.push_back(to_string(op) + ": " + analysis.posthoc.annotated_chain());
            for (const std::string& warning : analysis.warnings) {
                std::cerr << "warning: " << warning << '\n';
            }
        }
        if (output.empty()) throw std::runtime_error("no response-time records found");
    }

    emit_json(output, args.out);
    for (const std::string& chain : chains) std::cout << chain << '\n';
}

struct ReportArgs {
    std::string trials_dir;
    std::string out = ".";
};

void run_report(const ReportArgs& args) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(args.trials_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        throw std::runtime_error("no trial files in " + args.trials_dir);
    }
    std::sort(files.begin(), files.end());

    std::vector<TrialRecord> trials;
    trials.reserve(files.size());
    for (const auto& path : files) trials.push_back(trial_from_json(read_json_file(path)));

    // Rebuild the grid from the trials themselves. Counts per cell may be
    // ragged if the directory mixes runs; aggregation handles that.
    ExperimentPlan plan;
    plan.operators.clear();
    plan.thresholds.clear();
    plan.hidden_dims.clear();
    int max_cell = 0;
    std::map<std::string, int> cell_counts;
    for (const TrialRecord& t : trials) {
        const ModelConfig& c = t.config;
        if (std::find(plan.operators.begin(), plan.operators.end(), c.op) ==
            plan.operators.end()) {
            plan.operators.push_back(c.op);
        }
        if (std::find(plan.thresholds.begin(), plan.thresholds.end(),
                      c.confidence_threshold) == plan.thresholds.end()) {
            plan.thresholds.push_back(c.confidence_threshold);
        }
        if (std::find(plan.hidden_dims.begin(), plan.hidden_dims.end(), c.hidden_dim) ==
            plan.hidden_dims.end()) {
            plan.hidden_dims.push_back(c.hidden_dim);
        }
        max_cell = std::max(
            max_cell, ++cell_counts[cell_name(c.op, c.confidence_threshold, c.hidden_dim)]);
    }
    std::sort(plan.operators.begin(), plan.operators.end());
    std::sort(plan.thresholds.begin(), plan.thresholds.end());
    std::sort(plan.hidden_dims.begin(), plan.hidden_dims.end());
    plan.trials_per_config = std::max(1, max_cell);
    plan.output_dir = args.out;
    plan.validate();

    const AggregateTable table = aggregate_trials(plan, trials);
    const auto analyses = run_analyses(plan, trials);
    report(table, analyses, args.out);
    std::cerr << "aggregated " << trials.size() << " trial(s) into " << args.out << '\n';
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"4-bit binary addition/subtraction learning simulator and analysis tools"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    CLI::App* gen = app.add_subcommand(
        "gen-data", "Enumerate a full operation set and write it as CSV");
    gen->add_option("--op", gen_args.op, "Operator: add or sub")
        ->required()
        ->check(CLI::IsMember({"add", "sub"}));
    gen->add_option("--width", gen_args.width, "Operand width in bits")
        ->default_val(4)
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_args.out, "Output CSV path (stdout when omitted)");
    gen->callback([&] { run_gen_data(gen_args); });

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand(
        "train", "Train one network on the full operation set");
    train->add_option("--op", train_args.op, "Operator: add or sub")
        ->required()
        ->check(CLI::IsMember({"add", "sub"}));
    train->add_option("--theta", train_args.theta, "Confidence threshold")
        ->default_val(0.9)
        ->check(CLI::Range(0.5, 1.0));
    train->add_option("--hidden", train_args.hidden, "Hidden layer width")
        ->default_val(48)
        ->check(CLI::PositiveNumber);
    train->add_option("--width", train_args.width, "Operand width in bits")
        ->default_val(4)
        ->check(CLI::PositiveNumber);
    train->add_option("--seed", train_args.seed, "Random seed")->default_val(0);
    train->add_option("--max-epochs", train_args.max_epochs, "Epoch budget")
        ->default_val(50000)
        ->check(CLI::NonNegativeNumber);
    train->add_option("--batch-size", train_args.batch_size, "Mini-batch size")
        ->default_val(32)
        ->check(CLI::PositiveNumber);
    train->add_option("--out", train_args.out, "Trial JSON path (stdout when omitted)");
    train->add_option("--params-out", train_args.params_out, "Also dump final weights here");
    train->add_flag("--verbose", train_args.verbose, "Progress on stderr");
    train->callback([&] { run_train(train_args); });

    TraceArgs trace_args;
    CLI::App* trace = app.add_subcommand(
        "trace", "Replay one operation through saved weights, step by step");
    trace->add_option("--params", trace_args.params_path, "Weights JSON from train --params-out")
        ->required();
    trace->add_option("--op", trace_args.operands, "Operands as <a>,<b>")->required();
    trace->add_option("--theta", trace_args.theta,
                      "Override the stored confidence threshold")
        ->check(CLI::Range(0.5, 1.0));
    trace->callback([&] { run_trace(trace_args); });

    RunArgs run_args;
    CLI::App* run = app.add_subcommand(
        "run", "Train a full configuration grid and write trials, aggregate and analyses");
    run->add_option("--plan", run_args.plan_path, "Plan JSON path")->required();
    run->add_option("--out", run_args.out, "Override the plan's output directory");
    run->add_option("--workers", run_args.workers, "Worker thread count")
        ->default_val(default_workers())
        ->check(CLI::PositiveNumber);
    run->add_flag("--verbose", run_args.verbose, "Progress on stderr");
    run->callback([&] { run_run(run_args); });

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand(
        "analyze", "One-way ANOVA with Games-Howell comparisons on CSV input");
    auto* opt_summary = analyze->add_option(
        "--summary", analyze_args.summary_path, "Group summary CSV: label,n,mean,sd");
    auto* opt_rt = analyze->add_option(
        "--rt", analyze_args.rt_path,
        "Response-time CSV: participant_id,operator,carries,rt_seconds,correct");
    auto* opt_in = analyze->add_option("--in", analyze_args.in_path,
                                       "Long-format observations CSV");
    analyze->add_option("--group-col", analyze_args.group_col, "Group column for --in");
    analyze->add_option("--value-col", analyze_args.value_col, "Value column for --in");
    analyze->add_option("--out", analyze_args.out, "Result JSON path (stdout when omitted)");
    opt_summary->excludes(opt_rt)->excludes(opt_in);
    opt_rt->excludes(opt_in);
    analyze->callback([&] {
        const int modes = (analyze_args.summary_path.empty() ? 0 : 1) +
                          (analyze_args.rt_path.empty() ? 0 : 1) +
                          (analyze_args.in_path.empty() ? 0 : 1);
        if (modes != 1) {
            throw CLI::ValidationError("analyze",
                                       "pass exactly one of --summary, --rt or --in");
        }
        if (!analyze_args.in_path.empty() &&
            (analyze_args.group_col.empty() || analyze_args.value_col.empty())) {
            throw CLI::ValidationError("analyze",
                                       "--in requires --group-col and --value-col");
        }
        run_analyze(analyze_args);
    });

    ReportArgs report_args;
    CLI::App* rep = app.add_subcommand(
        "report", "Re-aggregate persisted trial files and rewrite the report files");
    rep->add_option("--trials", report_args.trials_dir, "Directory of trial JSON files")
        ->required();
    rep->add_option("--out", report_args.out, "Report output directory")->default_val(".");
    rep->callback([&] { run_report(report_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace carrysim::cli
