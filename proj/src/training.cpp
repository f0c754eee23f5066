#include "carrysim/training.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace carrysim {

namespace {

void adam_update_tensor(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                        Eigen::Ref<Eigen::MatrixXd> m, Eigen::Ref<Eigen::MatrixXd> v,
                        const AdamConfig& cfg, double bias1, double bias2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * grad.array().square().matrix();
    param.array() -=
        cfg.alpha * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.epsilon);
}

}  // namespace

AdamState AdamState::zeros_like(const NetworkParams& params) {
    AdamState state;
    state.first_moment = ParamTensors::zeros_like(params);
    state.second_moment = ParamTensors::zeros_like(params);
    return state;
}

NetworkParams init_params(const ModelConfig& config, Rng& rng) {
    config.validate();
    NetworkParams params = NetworkParams::zeros(config);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(config.input_dim() + config.output_dim()));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
    for (Eigen::Index c = 0; c < params.w1.cols(); ++c) {
        for (Eigen::Index r = 0; r < params.w1.rows(); ++r) {
            params.w1(r, c) = rng.truncated_normal(bound1 / 2.0, bound1);
        }
    }
    for (Eigen::Index c = 0; c < params.w2.cols(); ++c) {
        for (Eigen::Index r = 0; r < params.w2.rows(); ++r) {
            params.w2(r, c) = rng.truncated_normal(bound2 / 2.0, bound2);
        }
    }
    return params;
}

std::pair<NetworkParams, AdamState> adam_step(const NetworkParams& params,
                                              const ParamTensors& grads, AdamState state,
                                              const AdamConfig& cfg) {
    NetworkParams next = params;
    state.step_count += 1;
    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));

    adam_update_tensor(next.w1, grads.w1, state.first_moment.w1, state.second_moment.w1, cfg,
                       bias1, bias2);
    adam_update_tensor(next.b1, grads.b1, state.first_moment.b1, state.second_moment.b1, cfg,
                       bias1, bias2);
    adam_update_tensor(next.w2, grads.w2, state.first_moment.w2, state.second_moment.w2, cfg,
                       bias1, bias2);
    adam_update_tensor(next.b2, grads.b2, state.first_moment.b2, state.second_moment.b2, cfg,
                       bias1, bias2);
    return {std::move(next), std::move(state)};
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng& rng) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

double evaluate_accuracy(const NetworkParams& params, const ModelConfig& config,
                         std::span<const Operation> dataset) {
    if (dataset.empty()) throw std::invalid_argument("evaluate_accuracy: empty dataset");
    const BatchEvaluation eval = evaluate_batch(params, config, dataset);
    long correct = 0;
    for (bool ok : eval.correct) correct += ok ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

std::map<int, std::vector<int>> measure_answer_steps(const NetworkParams& params,
                                                     const ModelConfig& config,
                                                     const std::vector<CarryDataset>& datasets) {
    std::map<int, std::vector<int>> steps;
    for (const CarryDataset& cls : datasets) {
        const BatchEvaluation eval = evaluate_batch(params, config, cls.operations);
        std::vector<int>& column = steps[cls.carries];
        column.reserve(eval.answer_steps.size());
        for (const auto& step : eval.answer_steps) {
            if (!step.has_value()) {
                throw std::runtime_error("measure_answer_steps: unanswered operation in class " +
                                         std::to_string(cls.carries));
            }
            column.push_back(*step);
        }
    }
    return steps;
}

std::pair<NetworkParams, TrialRecord> train_network(const ModelConfig& config,
                                                    const AdamConfig& adam,
                                                    const std::vector<Operation>& dataset,
                                                    std::uint64_t seed, long max_epochs) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train_network: empty dataset");
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be nonnegative");

    Rng rng(seed);
    NetworkParams params = init_params(config, rng);
    AdamState state = AdamState::zeros_like(params);

    TrialRecord record;
    record.config = config;
    record.seed = seed;

    std::vector<Operation> scratch;
    scratch.reserve(static_cast<std::size_t>(adam.batch_size));
    for (long epoch = 0; epoch < max_epochs; ++epoch) {
        for (const std::vector<std::size_t>& batch : make_batches(dataset.size(), adam.batch_size, rng)) {
            scratch.clear();
            for (std::size_t idx : batch) scratch.push_back(dataset[idx]);
            const ParamTensors grads = bptt_gradients(params, config, scratch);
            std::tie(params, state) = adam_step(params, grads, std::move(state), adam);
        }
        const double accuracy = evaluate_accuracy(params, config, dataset);
        if (accuracy == 1.0) {
            record.epochs_to_converge = epoch + 1;
            record.final_accuracy = accuracy;
            break;
        }
    }

    if (!record.converged()) {
        record.final_accuracy = evaluate_accuracy(params, config, dataset);
        return {std::move(params), std::move(record)};
    }

    record.answer_steps = measure_answer_steps(params, config, partition_by_carries(dataset));
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [carries, steps] : record.answer_steps) {
        double class_total = 0.0;
        for (int s : steps) class_total += s;
        record.mean_answer_step[carries] = class_total / static_cast<double>(steps.size());
        total += class_total;
        count += steps.size();
    }
    record.overall_mean_answer_step = total / static_cast<double>(count);
    return {std::move(params), std::move(record)};
}

}  // namespace carrysim
