#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "carrysim/network.hpp"
#include "carrysim/rng.hpp"

namespace carrysim {

struct AdamConfig {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
};

struct AdamState {
    ParamTensors first_moment;
    ParamTensors second_moment;
    long step_count = 0;

    static AdamState zeros_like(const NetworkParams& params);
};

// Outcome of one trained network: convergence bookkeeping plus answer steps
// for every problem, grouped by carry class.
struct TrialRecord {
    ModelConfig config;
    std::uint64_t seed = 0;
    std::optional<long> epochs_to_converge;  // nullopt when training hit max_epochs
    double final_accuracy = 0.0;
    std::map<int, std::vector<int>> answer_steps;
    std::map<int, double> mean_answer_step;
    double overall_mean_answer_step = 0.0;

    bool converged() const { return epochs_to_converge.has_value(); }
};

// Weights drawn from a normal with sigma = bound/2, resampled until inside
// [-bound, bound] where bound = 1/sqrt(fan_in); biases start at zero.
NetworkParams init_params(const ModelConfig& config, Rng& rng);

// One bias-corrected Adam update over all parameter tensors.
std::pair<NetworkParams, AdamState> adam_step(const NetworkParams& params,
                                              const ParamTensors& grads, AdamState state,
                                              const AdamConfig& config);

// Shuffled without-replacement batch split; the final short batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng& rng);

// Fraction of problems answered correctly at a defined answer step.
double evaluate_accuracy(const NetworkParams& params, const ModelConfig& config,
                         std::span<const Operation> dataset);

// Answer step of every operation, grouped by carry class. Throws if any
// operation goes unanswered.
std::map<int, std::vector<int>> measure_answer_steps(const NetworkParams& params,
                                                     const ModelConfig& config,
                                                     const std::vector<CarryDataset>& datasets);

// Trains until the full dataset is answered with accuracy 1.0 or max_epochs
// is reached; a non-converged run is a recorded outcome, not an error.
std::pair<NetworkParams, TrialRecord> train_network(const ModelConfig& config,
                                                    const AdamConfig& adam,
                                                    const std::vector<Operation>& dataset,
                                                    std::uint64_t seed, long max_epochs);

}  // namespace carrysim
