#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "carrysim/dataset.hpp"

namespace carrysim {

struct ModelConfig {
    Operator op = Operator::Sub;
    int hidden_dim = 48;
    double confidence_threshold = 0.9;
    int max_steps = 30;
    int width = 4;

    int input_dim() const { return 2 * width; }
    int output_dim() const { return op == Operator::Add ? width + 1 : width; }

    // Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

// Two-layer Jordan network: hidden layer reads the current input
// concatenated with the previous step's output probabilities.
struct NetworkParams {
    Eigen::MatrixXd w1;  // hidden_dim x (input_dim + output_dim)
    Eigen::VectorXd b1;  // hidden_dim
    Eigen::MatrixXd w2;  // output_dim x hidden_dim
    Eigen::VectorXd b2;  // output_dim

    static NetworkParams zeros(const ModelConfig& config);
};

// Parameter-shaped tensor bundle; used for gradients and Adam moments.
struct ParamTensors {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    static ParamTensors zeros_like(const NetworkParams& params);
};

enum class Digit { Zero, One, Uncertain };

struct StepRecord {
    Eigen::VectorXd pre_hidden;      // W1 [x; p_prev] + b1
    Eigen::VectorXd hidden;          // ReLU(pre_hidden)
    Eigen::VectorXd probs;           // sigmoid(W2 hidden + b2)
    std::vector<Digit> decisions;
};

struct ForwardTrace {
    std::vector<StepRecord> steps;
    std::optional<int> answer_step;
    std::optional<std::vector<std::uint8_t>> predicted_answer;
};

Eigen::VectorXd input_vector(const Operation& op);
Eigen::VectorXd target_vector(const Operation& op);

// One recurrent step: h = ReLU(W1 [x; p_prev] + b1), p = sigmoid(W2 h + b2).
StepRecord forward_step(const NetworkParams& params, const ModelConfig& config,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& p_prev);

// Per-digit decision: One above the confidence threshold, Zero below its
// mirror, Uncertain inside the closed band [1 - theta, theta].
std::vector<Digit> decide_digits(const Eigen::VectorXd& probs, double threshold);

// Unrolls the network on one problem, halting at the first step where every
// digit is confident. The initial feedback vector is all 0.5.
ForwardTrace run_to_answer(const NetworkParams& params, const ModelConfig& config,
                           const Operation& op);

// Binary cross-entropy of one step; probabilities are clamped to
// [eps, 1 - eps] before the logs.
double step_loss(const Eigen::VectorXd& target, const Eigen::VectorXd& probs);

// Training loss of one problem: the full max_steps unroll (no halting) with
// step losses summed over every step.
double total_loss(const NetworkParams& params, const ModelConfig& config, const Operation& op);

// Exact gradient of the summed total_loss over a batch, backpropagated
// through the output-feedback recurrence.
ParamTensors bptt_gradients(const NetworkParams& params, const ModelConfig& config,
                            std::span<const Operation> batch);

// Evaluation over many problems at once: answer step (or nullopt) and
// whether the thresholded answer equals the target. Semantics match
// run_to_answer problem by problem.
struct BatchEvaluation {
    std::vector<std::optional<int>> answer_steps;
    std::vector<bool> correct;
};

BatchEvaluation evaluate_batch(const NetworkParams& params, const ModelConfig& config,
                               std::span<const Operation> ops);

constexpr double kProbEpsilon = 1e-12;

}  // namespace carrysim
