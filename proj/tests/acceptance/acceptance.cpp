// Acceptance checks, one per command-line criterion name (A1..A8). Each
// prints a single PASS/FAIL line with the measured quantities and exits
// nonzero on failure. A5 trains a pool of networks and can persist them via
// --cache so A6 can re-evaluate the same networks at other thresholds.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "carrysim/experiment.hpp"
#include "carrysim/io.hpp"
#include "cli.hpp"

using namespace carrysim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, const char* spec = "%.4g") {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, spec, v);
    return buffer;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& tag) {
    const fs::path dir =
        fs::temp_directory_path() / ("carrysim_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "carrysim");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    return cli::dispatch(static_cast<int>(argv.size()), argv.data());
}

// --- A1: dataset exactness --------------------------------------------------

// Carry/borrow counts recomputed from machine arithmetic, independently of
// the library's column-wise simulation.
int bitwise_carries(int a, int b) { return __builtin_popcount((a + b) ^ a ^ b); }
int bitwise_borrows(int a, int b) { return __builtin_popcount((a - b) ^ a ^ b); }

int bits_to_int(const std::string& bits) {
    int value = 0;
    for (char c : bits) value = value * 2 + (c - '0');
    return value;
}

Outcome check_a1() {
    const fs::path dir = scratch_dir("a1");
    std::map<std::string, std::map<int, int>> class_sizes;
    std::map<std::string, int> row_counts;

    for (const std::string op : {"add", "sub"}) {
        const fs::path csv = dir / (op + ".csv");
        if (run_cli({"gen-data", "--op", op, "--out", csv.string()}) != 0) {
            return {false, "gen-data --op " + op + " failed"};
        }
        std::istringstream in(slurp(csv));
        std::string line;
        std::getline(in, line);
        if (line != "a_bits,b_bits,op,z_bits,carries") {
            return {false, op + ": unexpected header " + line};
        }
        while (std::getline(in, line)) {
            std::istringstream fields(line);
            std::string a_bits, b_bits, op_name, z_bits, carries;
            std::getline(fields, a_bits, ',');
            std::getline(fields, b_bits, ',');
            std::getline(fields, op_name, ',');
            std::getline(fields, z_bits, ',');
            std::getline(fields, carries, ',');
            const int a = bits_to_int(a_bits);
            const int b = bits_to_int(b_bits);
            const int z = bits_to_int(z_bits);
            const int expected_z = op == "add" ? a + b : a - b;
            const int expected_carries =
                op == "add" ? bitwise_carries(a, b) : bitwise_borrows(a, b);
            if (z != expected_z) {
                return {false, line + ": result is " + std::to_string(z) + ", expected " +
                                   std::to_string(expected_z)};
            }
            if (std::stoi(carries) != expected_carries) {
                return {false, line + ": carry count should be " +
                                   std::to_string(expected_carries)};
            }
            ++row_counts[op];
            ++class_sizes[op][expected_carries];
        }
    }

    if (row_counts["add"] != 256) {
        return {false, "addition rows: " + std::to_string(row_counts["add"]) + " != 256"};
    }
    if (row_counts["sub"] != 136) {
        return {false, "subtraction rows: " + std::to_string(row_counts["sub"]) + " != 136"};
    }
    if (class_sizes["sub"][3] != 9) {
        return {false,
                "3-borrow class: " + std::to_string(class_sizes["sub"][3]) + " != 9"};
    }

    // The library's partition must agree with the CSV histogram exactly.
    for (Operator op : {Operator::Add, Operator::Sub}) {
        const auto classes = partition_by_carries(enumerate_dataset(op));
        const auto& expected = class_sizes[to_string(op)];
        if (classes.size() != expected.size()) {
            return {false, to_string(op) + ": class count mismatch"};
        }
        std::size_t total = 0;
        for (const CarryDataset& cls : classes) {
            if (static_cast<int>(cls.operations.size()) != expected.at(cls.carries)) {
                return {false, to_string(op) + " class " + std::to_string(cls.carries) +
                                   " size mismatch"};
            }
            total += cls.operations.size();
        }
        if (total != (op == Operator::Add ? 256u : 136u)) {
            return {false, to_string(op) + ": partition does not cover the dataset"};
        }
    }
    fs::remove_all(dir);
    return {true, "256 add + 136 sub rows, exact partitions, 3-borrow class of 9"};
}

// --- A2: reference statistics recovery ---------------------------------------

Outcome check_a2() {
    const std::vector<GroupSummary> addition = {
        {"0", 90, 3.81, 0.69}, {"1", 90, 4.29, 0.88}, {"2", 90, 4.75, 0.94},
        {"3", 90, 5.43, 1.25}, {"4", 90, 6.11, 1.86},
    };
    const std::vector<GroupSummary> subtraction = {
        {"0", 90, 3.46, 0.68}, {"1", 90, 5.04, 1.45},
        {"2", 90, 6.85, 2.05}, {"3", 90, 8.46, 2.78},
    };
    const AnovaResult add = anova_from_summary(addition);
    const AnovaResult sub = anova_from_summary(subtraction);

    const std::string detail = "add F=" + fmt(add.f) + " eta2=" + fmt(add.eta_squared) +
                               ", sub F=" + fmt(sub.f) + " eta2=" + fmt(sub.eta_squared);
    if (std::fabs(add.f - 51.84) > 1.0) return {false, detail + " (add F off)"};
    if (std::fabs(add.eta_squared - 0.32) > 0.01) return {false, detail + " (add eta2 off)"};
    if (std::fabs(sub.f - 117.41) > 2.5) return {false, detail + " (sub F off)"};
    if (std::fabs(sub.eta_squared - 0.50) > 0.01) return {false, detail + " (sub eta2 off)"};
    if (add.df_between != 4 || add.df_within != 445) return {false, detail + " (add df off)"};
    if (sub.df_between != 3 || sub.df_within != 356) return {false, detail + " (sub df off)"};
    return {true, detail};
}

// --- A3: gradient fidelity ----------------------------------------------------

Outcome check_a3() {
    Rng rng(20240817);
    const auto add_ops = enumerate_dataset(Operator::Add);
    const auto sub_ops = enumerate_dataset(Operator::Sub);
    const int unrolls[3] = {1, 2, 5};

    double worst = 0.0;
    for (int instance = 0; instance < 100; ++instance) {
        ModelConfig config;
        config.op = rng.uniform_int(2) == 0 ? Operator::Add : Operator::Sub;
        config.hidden_dim = 2 + static_cast<int>(rng.uniform_int(2));
        config.max_steps = unrolls[rng.uniform_int(3)];
        config.confidence_threshold = 0.9;

        NetworkParams params = NetworkParams::zeros(config);
        const auto randomize = [&](Eigen::Ref<Eigen::MatrixXd> m) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                for (Eigen::Index r = 0; r < m.rows(); ++r) {
                    m(r, c) = 2.0 * rng.uniform() - 1.0;
                }
            }
        };
        randomize(params.w1);
        randomize(params.b1);
        randomize(params.w2);
        randomize(params.b2);

        const auto& pool = config.op == Operator::Add ? add_ops : sub_ops;
        std::vector<Operation> batch;
        const std::size_t batch_size = 1 + rng.uniform_int(3);
        for (std::size_t i = 0; i < batch_size; ++i) {
            batch.push_back(pool[rng.uniform_int(pool.size())]);
        }

        const ParamTensors grads = bptt_gradients(params, config, batch);
        const auto batch_loss = [&] {
            double loss = 0.0;
            for (const Operation& op : batch) loss += total_loss(params, config, op);
            return loss;
        };
        const double h = 1e-5;
        const auto check_tensor = [&](Eigen::Ref<Eigen::MatrixXd> tensor,
                                      const Eigen::MatrixXd& analytic) {
            for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
                for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
                    const double saved = tensor(r, c);
                    tensor(r, c) = saved + h;
                    const double plus = batch_loss();
                    tensor(r, c) = saved - h;
                    const double minus = batch_loss();
                    tensor(r, c) = saved;
                    const double numeric = (plus - minus) / (2.0 * h);
                    const double scale =
                        std::max({1.0, std::fabs(numeric), std::fabs(analytic(r, c))});
                    worst = std::max(worst, std::fabs(numeric - analytic(r, c)) / scale);
                }
            }
        };
        check_tensor(params.w1, grads.w1);
        check_tensor(params.b1, grads.b1);
        check_tensor(params.w2, grads.w2);
        check_tensor(params.b2, grads.b2);
    }

    const std::string detail = "100 instances, worst relative error " + fmt(worst, "%.3g");
    return {worst < 1e-5, detail};
}

// --- A4: convergence ----------------------------------------------------------

Outcome check_a4() {
    ModelConfig config;
    config.op = Operator::Sub;
    config.confidence_threshold = 0.9;
    config.hidden_dim = 48;
    const auto sub_ops = enumerate_dataset(Operator::Sub);

    int converged = 0;
    double epoch_total = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::uint64_t seed = child_seed(1, Operator::Sub, 0.9, 48, trial);
        const auto [params, record] =
            train_network(config, AdamConfig{}, sub_ops, seed, 20000);
        if (record.converged()) {
            ++converged;
            epoch_total += static_cast<double>(*record.epochs_to_converge);
        }
    }
    const double mean_epochs = converged > 0 ? epoch_total / converged : 0.0;

    std::string detail = "sub: " + std::to_string(converged) + "/10 converged, mean epochs " +
                         fmt(mean_epochs, "%.1f");
    if (converged < 9) return {false, detail};
    if (mean_epochs < 200.0 || mean_epochs > 5000.0) return {false, detail + " (outside [200, 5000])"};

    config.op = Operator::Add;
    const auto add_ops = enumerate_dataset(Operator::Add);
    for (int trial = 0; trial < 3; ++trial) {
        const std::uint64_t seed = child_seed(1, Operator::Add, 0.9, 48, trial);
        const auto [params, record] =
            train_network(config, AdamConfig{}, add_ops, seed, 50000);
        if (!record.converged()) {
            return {false, detail + "; add trial " + std::to_string(trial) + " did not converge"};
        }
        detail += trial == 0 ? "; add epochs " : " ";
        detail += std::to_string(*record.epochs_to_converge);
    }
    return {true, detail};
}

// --- A5/A6: carry difficulty and threshold effects -----------------------------

// Trains subtraction networks (theta .9, d_h 48) until `wanted` of them
// converge, optionally persisting the weights for later re-evaluation.
struct TrainedPool {
    std::vector<NetworkParams> params;
    std::vector<TrialRecord> records;
};

TrainedPool trained_pool(int wanted, const fs::path& cache) {
    ModelConfig config;
    config.op = Operator::Sub;
    config.confidence_threshold = 0.9;
    config.hidden_dim = 48;
    const auto sub_ops = enumerate_dataset(Operator::Sub);

    TrainedPool pool;
    const int max_attempts = wanted + 10;
    for (int trial = 0; trial < max_attempts && static_cast<int>(pool.records.size()) < wanted;
         ++trial) {
        const std::uint64_t seed = child_seed(2, Operator::Sub, 0.9, 48, trial);
        auto [params, record] = train_network(config, AdamConfig{}, sub_ops, seed, 20000);
        if (!record.converged()) continue;
        pool.params.push_back(std::move(params));
        pool.records.push_back(std::move(record));
    }
    if (static_cast<int>(pool.records.size()) < wanted) {
        throw std::runtime_error("only " + std::to_string(pool.records.size()) + " of " +
                                 std::to_string(wanted) + " trials converged");
    }

    if (!cache.empty()) {
        fs::create_directories(cache);
        for (std::size_t i = 0; i < pool.records.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "net_%03zu.json", i);
            write_json_file(params_to_json(pool.params[i], config), cache / name);
        }
    }
    return pool;
}

Outcome check_a5(const fs::path& cache) {
    const TrainedPool pool = trained_pool(30, cache);

    const GroupedAnalysis analysis = analysis_one(pool.records);
    const double targets[4] = {1.42, 2.34, 3.59, 4.51};
    std::string means_text;
    std::string band_text;
    bool increasing = true;
    bool within_band = true;
    for (std::size_t i = 0; i < analysis.posthoc.groups.size(); ++i) {
        const double mean = analysis.posthoc.groups[i].mean;
        means_text += (i ? " " : "") + fmt(mean, "%.2f");
        if (i > 0 && mean <= analysis.posthoc.groups[i - 1].mean) increasing = false;
        if (i < 4 && std::fabs(mean - targets[i]) > 0.6) {
            within_band = false;
            band_text += " class " + std::to_string(i) + " is " + fmt(mean, "%.2f") +
                         " vs reference " + fmt(targets[i], "%.2f") + "+-0.6;";
        }
    }

    bool consecutive_significant = analysis.posthoc.chain == "0 < 1 < 2 < 3";
    std::string detail = "30 converged trials, class means (" + means_text + "), anova p=" +
                         fmt(analysis.anova.p_value, "%.2e") + ", chain \"" +
                         analysis.posthoc.chain + "\"";
    if (analysis.posthoc.groups.size() != 4) return {false, detail + " (class count)"};
    if (!increasing) return {false, detail + " (means not strictly increasing)"};
    if (!(analysis.anova.p_value < 0.001)) return {false, detail + " (anova p)"};
    if (!consecutive_significant) return {false, detail + " (ordering chain)"};
    if (!within_band) return {false, detail + " (out of band:" + band_text + ")"};
    return {true, detail};
}

Outcome check_a6(const fs::path& cache) {
    if (cache.empty() || !fs::exists(cache)) {
        return {false, "no cached networks; run the A5 check with --cache first"};
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cache)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.size() < 30) {
        return {false, "expected 30 cached networks, found " + std::to_string(files.size())};
    }

    const auto sub_ops = enumerate_dataset(Operator::Sub);
    int monotone = 0;
    for (const fs::path& file : files) {
        auto [config, params] = params_from_json(read_json_file(file));
        double previous = -1.0;
        bool strictly_increasing = true;
        for (double theta : {0.7, 0.8, 0.9}) {
            config.confidence_threshold = theta;
            const BatchEvaluation eval = evaluate_batch(params, config, sub_ops);
            double total = 0.0;
            for (const auto& step : eval.answer_steps) {
                if (!step.has_value()) {
                    return {false, file.filename().string() + ": unanswered problem at theta " +
                                       fmt(theta, "%.1f")};
                }
                total += *step;
            }
            const double mean = total / static_cast<double>(sub_ops.size());
            if (mean <= previous) strictly_increasing = false;
            previous = mean;
        }
        if (strictly_increasing) ++monotone;
    }

    const double fraction = static_cast<double>(monotone) / static_cast<double>(files.size());
    const std::string detail = std::to_string(monotone) + "/" + std::to_string(files.size()) +
                               " networks strictly increasing in theta";
    return {fraction >= 0.95, detail};
}

// --- A7: statistics validation -------------------------------------------------

// Marsaglia-Tsang sampler, alpha >= 1.
double gamma_draw(Rng& rng, double alpha) {
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

Outcome check_a7() {
    const double xs[3] = {2.5, 3.5, 4.5};
    const int ks[3] = {2, 3, 5};
    const double nus[3] = {5.0, 10.0, 30.0};
    const long samples = 10'000'000;

    double worst = 0.0;
    Rng rng(7);
    for (int k : ks) {
        for (double nu : nus) {
            long counts[3] = {0, 0, 0};
            for (long s = 0; s < samples; ++s) {
                double lo = rng.normal();
                double hi = lo;
                for (int i = 1; i < k; ++i) {
                    const double z = rng.normal();
                    lo = std::min(lo, z);
                    hi = std::max(hi, z);
                }
                const double range = hi - lo;
                const double scale = std::sqrt(2.0 * gamma_draw(rng, nu / 2.0) / nu);
                const double q = range / scale;
                for (int xi = 0; xi < 3; ++xi) {
                    if (q <= xs[xi]) ++counts[xi];
                }
            }
            for (int xi = 0; xi < 3; ++xi) {
                const double mc = static_cast<double>(counts[xi]) / samples;
                const double analytic = studentized_range_cdf(xs[xi], k, nu);
                worst = std::max(worst, std::fabs(mc - analytic));
            }
        }
    }
    std::string detail = "quadrature vs 1e7-sample MC, worst |diff| " + fmt(worst, "%.2e");
    if (worst >= 0.005) return {false, detail};

    const PosthocResult identical = games_howell({{1, 2, 3}, {1, 2, 3}});
    if (identical.pairs[0].p_value != 1.0) {
        return {false, detail + "; identical groups p=" + fmt(identical.pairs[0].p_value)};
    }

    const AnovaResult anova = anova_oneway({{1, 2, 3}, {4, 5, 6}});
    if (std::fabs(anova.f - 13.5) > 1e-9) {
        return {false, detail + "; two-group F=" + fmt(anova.f, "%.12g")};
    }
    return {true, detail + "; identical-group p=1; two-group F=13.5"};
}

// --- A8: determinism across worker counts --------------------------------------

Outcome check_a8() {
    const fs::path dir = scratch_dir("a8");
    ExperimentPlan plan;
    plan.operators = {Operator::Sub};
    plan.thresholds = {0.8, 0.9};
    plan.hidden_dims = {16, 24};
    plan.trials_per_config = 2;
    plan.master_seed = 4;
    plan.max_epochs = 6000;

    std::vector<std::string> names;
    for (double theta : plan.thresholds) {
        for (int dh : plan.hidden_dims) {
            for (int trial = 0; trial < plan.trials_per_config; ++trial) {
                names.push_back(trial_filename(Operator::Sub, theta, dh, trial));
            }
        }
    }

    plan.output_dir = (dir / "w1").string();
    const ExperimentResult serial = run_experiment(plan, 1);
    report(serial.table, run_analyses(plan, serial.trials), plan.output_dir);
    plan.output_dir = (dir / "w3").string();
    const ExperimentResult parallel = run_experiment(plan, 3);
    report(parallel.table, run_analyses(plan, parallel.trials), plan.output_dir);

    for (const std::string& name : names) {
        const std::string a = slurp(dir / "w1" / "trials" / name);
        const std::string b = slurp(dir / "w3" / "trials" / name);
        if (a != b) return {false, "trial file differs across worker counts: " + name};
    }
    if (slurp(dir / "w1" / "aggregate.csv") != slurp(dir / "w3" / "aggregate.csv")) {
        return {false, "aggregate.csv differs across worker counts"};
    }
    fs::remove_all(dir);
    return {true, std::to_string(names.size()) + " trial files and aggregate.csv byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
    std::string criterion;
    fs::path cache;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cache" && i + 1 < argc) {
            cache = argv[++i];
        } else if (criterion.empty()) {
            criterion = arg;
        } else {
            std::cerr << "usage: acceptance <A1..A8> [--cache dir]\n";
            return 2;
        }
    }
    if (criterion.empty()) {
        std::cerr << "usage: acceptance <A1..A8> [--cache dir]\n";
        return 2;
    }

    Outcome outcome;
    try {
        if (criterion == "A1") {
            outcome = check_a1();
        } else if (criterion == "A2") {
            outcome = check_a2();
        } else if (criterion == "A3") {
            outcome = check_a3();
        } else if (criterion == "A4") {
            outcome = check_a4();
        } else if (criterion == "A5") {
            outcome = check_a5(cache);
        } else if (criterion == "A6") {
            outcome = check_a6(cache);
        } else if (criterion == "A7") {
            outcome = check_a7();
        } else if (criterion == "A8") {
            outcome = check_a8();
        } else {
            std::cerr << "unknown criterion: " << criterion << '\n';
            return 2;
        }
    } catch (const std::exception& e) {
        outcome = {false, e.what()};
    }

    std::cout << criterion << (outcome.pass ? " PASS" : " FAIL")
              << (outcome.detail.empty() ? "" : ": " + outcome.detail) << std::endl;
    return outcome.pass ? 0 : 1;
}
