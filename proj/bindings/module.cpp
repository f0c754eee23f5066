// Python bindings for the simulator core. Operators are passed as the
// strings "add" / "sub"; digit decisions come back as "0", "1" and "?".

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "carrysim/experiment.hpp"
#include "carrysim/io.hpp"
#include "carrysim/stats.hpp"
#include "carrysim/training.hpp"

namespace py = pybind11;
using namespace carrysim;

namespace {

std::string digit_symbol(Digit d) {
    switch (d) {
        case Digit::Zero: return "0";
        case Digit::One: return "1";
        default: return "?";
    }
}

std::map<int, int> class_sizes(const std::string& op, int width) {
    std::map<int, int> sizes;
    for (const CarryDataset& cls :
         partition_by_carries(enumerate_dataset(operator_from_string(op), width))) {
        sizes[cls.carries] = static_cast<int>(cls.n());
    }
    return sizes;
}

Operation lookup_operation(const ModelConfig& config, int a, int b) {
    return make_operation(config.op, Operand(a, config.width), Operand(b, config.width));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Recurrent-network simulator of binary column arithmetic with "
              "confidence-based halting, plus the statistics used to analyze it";

    py::class_<Operation>(m, "Operation")
        .def_property_readonly("op", [](const Operation& o) { return to_string(o.op); })
        .def_property_readonly("a", [](const Operation& o) { return o.a.value; })
        .def_property_readonly("b", [](const Operation& o) { return o.b.value; })
        .def_readonly("carries", &Operation::carry_count)
        .def_property_readonly("target",
                               [](const Operation& o) { return bits_to_string(o.target_bits); })
        .def("__repr__", [](const Operation& o) {
            return std::to_string(o.a.value) + (o.op == Operator::Add ? " + " : " - ") +
                   std::to_string(o.b.value);
        });

    m.def(
        "enumerate_dataset",
        [](const std::string& op, int width) {
            return enumerate_dataset(operator_from_string(op), width);
        },
        py::arg("op"), py::arg("width") = 4,
        "All exhaustive problems of one operator (non-negative results only "
        "for subtraction)");
    m.def("class_sizes", &class_sizes, py::arg("op"), py::arg("width") = 4,
          "Problem count per carry (or borrow) class");

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init([](const std::string& op, int hidden_dim, double confidence_threshold,
                         int max_steps, int width) {
                 ModelConfig config;
                 config.op = operator_from_string(op);
                 config.hidden_dim = hidden_dim;
                 config.confidence_threshold = confidence_threshold;
                 config.max_steps = max_steps;
                 config.width = width;
                 config.validate();
                 return config;
             }),
             py::arg("op"), py::arg("hidden_dim") = 48, py::arg("confidence_threshold") = 0.9,
             py::arg("max_steps") = 30, py::arg("width") = 4)
        .def_property_readonly("op", [](const ModelConfig& c) { return to_string(c.op); })
        .def_readonly("hidden_dim", &ModelConfig::hidden_dim)
        .def_readwrite("confidence_threshold", &ModelConfig::confidence_threshold)
        .def_readonly("max_steps", &ModelConfig::max_steps)
        .def_readonly("width", &ModelConfig::width);

    py::class_<NetworkParams>(m, "NetworkParams")
        .def_static("zeros", &NetworkParams::zeros, py::arg("config"))
        .def_readwrite("w1", &NetworkParams::w1)
        .def_readwrite("b1", &NetworkParams::b1)
        .def_readwrite("w2", &NetworkParams::w2)
        .def_readwrite("b2", &NetworkParams::b2);

    py::class_<TrialRecord>(m, "TrialRecord")
        .def_readonly("seed", &TrialRecord::seed)
        .def_property_readonly("epochs_to_converge",
                               [](const TrialRecord& t) { return t.epochs_to_converge; })
        .def_readonly("final_accuracy", &TrialRecord::final_accuracy)
        .def_readonly("answer_steps", &TrialRecord::answer_steps)
        .def_readonly("mean_answer_step", &TrialRecord::mean_answer_step)
        .def_readonly("overall_mean_answer_step", &TrialRecord::overall_mean_answer_step)
        .def("converged", &TrialRecord::converged);

    m.def(
        "train",
        [](const ModelConfig& config, std::uint64_t seed, long max_epochs, int batch_size) {
            AdamConfig adam;
            adam.batch_size = batch_size;
            return train_network(config, adam, enumerate_dataset(config.op, config.width), seed,
                                 max_epochs);
        },
        py::arg("config"), py::arg("seed"), py::arg("max_epochs") = 20000,
        py::arg("batch_size") = 32,
        "Adam-trains one network on the exhaustive dataset; returns "
        "(params, record)");

    m.def(
        "decide_digits",
        [](const Eigen::VectorXd& probs, double threshold) {
            std::vector<std::string> symbols;
            for (Digit d : decide_digits(probs, threshold)) symbols.push_back(digit_symbol(d));
            return symbols;
        },
        py::arg("probs"), py::arg("threshold"));

    m.def(
        "trace",
        [](const NetworkParams& params, const ModelConfig& config, int a, int b) {
            const ForwardTrace trace =
                run_to_answer(params, config, lookup_operation(config, a, b));
            py::dict out;
            py::list probs;
            for (const StepRecord& step : trace.steps) probs.append(step.probs);
            out["probs"] = probs;
            out["answer_step"] = trace.answer_step ? py::cast(*trace.answer_step) : py::none();
            out["predicted"] = trace.predicted_answer
                                   ? py::cast(bits_to_string(*trace.predicted_answer))
                                   : py::none();
            return out;
        },
        py::arg("params"), py::arg("config"), py::arg("a"), py::arg("b"),
        "Steps one problem to its answer; returns per-step probabilities, "
        "the answer step and the thresholded digits");

    m.def(
        "evaluate_accuracy",
        [](const NetworkParams& params, const ModelConfig& config) {
            return evaluate_accuracy(params, config, enumerate_dataset(config.op, config.width));
        },
        py::arg("params"), py::arg("config"));

    m.def(
        "answer_steps_by_class",
        [](const NetworkParams& params, const ModelConfig& config) {
            return measure_answer_steps(
                params, config,
                partition_by_carries(enumerate_dataset(config.op, config.width)));
        },
        py::arg("params"), py::arg("config"),
        "Answer step of every problem, grouped by carry class; throws if any "
        "problem goes unanswered");

    m.def(
        "save_params",
        [](const NetworkParams& params, const ModelConfig& config, const std::string& path) {
            write_json_file(params_to_json(params, config), path);
        },
        py::arg("params"), py::arg("config"), py::arg("path"));
    m.def(
        "load_params",
        [](const std::string& path) { return params_from_json(read_json_file(path)); },
        py::arg("path"), "Returns (config, params)");

    m.def("child_seed",
          [](std::uint64_t master_seed, const std::string& op, double theta, int hidden_dim,
             int trial_index) {
              return child_seed(master_seed, operator_from_string(op), theta, hidden_dim,
                                trial_index);
          },
          py::arg("master_seed"), py::arg("op"), py::arg("theta"), py::arg("hidden_dim"),
          py::arg("trial_index"));

    py::class_<GroupSummary>(m, "GroupSummary")
        .def(py::init([](const std::string& label, long n, double mean, double sd) {
                 return GroupSummary{label, n, mean, sd};
             }),
             py::arg("label"), py::arg("n"), py::arg("mean"), py::arg("sd"))
        .def_readonly("label", &GroupSummary::label)
        .def_readonly("n", &GroupSummary::n)
        .def_readonly("mean", &GroupSummary::mean)
        .def_readonly("sd", &GroupSummary::sd);

    py::class_<AnovaResult>(m, "AnovaResult")
        .def_readonly("f", &AnovaResult::f)
        .def_readonly("df_between", &AnovaResult::df_between)
        .def_readonly("df_within", &AnovaResult::df_within)
        .def_readonly("p_value", &AnovaResult::p_value)
        .def_readonly("eta_squared", &AnovaResult::eta_squared);

    py::class_<PairwiseComparison>(m, "PairwiseComparison")
        .def_readonly("group_i", &PairwiseComparison::group_i)
        .def_readonly("group_j", &PairwiseComparison::group_j)
        .def_readonly("mean_diff", &PairwiseComparison::mean_diff)
        .def_readonly("q_statistic", &PairwiseComparison::q_statistic)
        .def_readonly("welch_df", &PairwiseComparison::welch_df)
        .def_readonly("p_value", &PairwiseComparison::p_value);

    py::class_<PosthocResult>(m, "PosthocResult")
        .def_readonly("pairs", &PosthocResult::pairs)
        .def_readonly("groups", &PosthocResult::groups)
        .def_readonly("chain", &PosthocResult::chain)
        .def("annotated_chain", &PosthocResult::annotated_chain);

    m.def("iqr_filter", &iqr_filter, py::arg("values"),
          "Drops values outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR]");
    m.def("anova_oneway", &anova_oneway, py::arg("groups"));
    m.def("anova_from_summary", &anova_from_summary, py::arg("groups"));
    m.def("games_howell", &games_howell, py::arg("groups"),
          py::arg("labels") = std::vector<std::string>{});
    m.def("games_howell_from_summary", &games_howell_from_summary, py::arg("groups"));
    m.def("studentized_range_cdf", &studentized_range_cdf, py::arg("x"), py::arg("k"),
          py::arg("nu"));
    m.def("normal_range_cdf", &normal_range_cdf, py::arg("r"), py::arg("k"));
    m.def("f_upper_tail", &f_upper_tail, py::arg("f"), py::arg("df1"), py::arg("df2"));

    m.def(
        "read_summary_csv",
        [](const std::string& path) { return read_summary_csv(std::filesystem::path(path)); },
        py::arg("path"), "Loads label,n,mean,sd rows");
}
