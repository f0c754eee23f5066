#include "carrysim/network.hpp"

#include <cmath>
#include <stdexcept>

namespace carrysim {

namespace {

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& u) {
    return u.unaryExpr([](double v) { return sigmoid(v); });
}

void check_shapes(const NetworkParams& params, const ModelConfig& config) {
    const int in = config.input_dim();
    const int out = config.output_dim();
    const int hidden = config.hidden_dim;
    if (params.w1.rows() != hidden || params.w1.cols() != in + out ||
        params.b1.size() != hidden || params.w2.rows() != out ||
        params.w2.cols() != hidden || params.b2.size() != out) {
        throw std::invalid_argument("network parameter shapes do not match the config");
    }
}

// Unrolled forward pass over a batch of problems (one column each), keeping
// everything the backward pass needs.
struct UnrollCache {
    Eigen::MatrixXd inputs;              // (in + out) x batch, top block constant
    std::vector<Eigen::MatrixXd> pre_hidden;
    std::vector<Eigen::MatrixXd> hidden;
    std::vector<Eigen::MatrixXd> probs;
    std::vector<Eigen::MatrixXd> feedback;  // p fed into each step
};

UnrollCache unroll(const NetworkParams& params, const ModelConfig& config,
                   std::span<const Operation> batch) {
    const int in = config.input_dim();
    const int out = config.output_dim();
    const auto n = static_cast<Eigen::Index>(batch.size());

    UnrollCache cache;
    cache.inputs.resize(in + out, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const Operation& op = batch[static_cast<std::size_t>(c)];
        if (op.op != config.op || static_cast<int>(op.input_bits.size()) != in) {
            throw std::invalid_argument("operation does not match the model config");
        }
        for (int i = 0; i < in; ++i) {
            cache.inputs(i, c) = static_cast<double>(op.input_bits[static_cast<std::size_t>(i)]);
        }
    }
    cache.inputs.bottomRows(out).setConstant(0.5);

    cache.pre_hidden.reserve(static_cast<std::size_t>(config.max_steps));
    cache.hidden.reserve(static_cast<std::size_t>(config.max_steps));
    cache.probs.reserve(static_cast<std::size_t>(config.max_steps));
    cache.feedback.reserve(static_cast<std::size_t>(config.max_steps));

    for (int t = 0; t < config.max_steps; ++t) {
        cache.feedback.push_back(cache.inputs.bottomRows(out));
        Eigen::MatrixXd pre = (params.w1 * cache.inputs).colwise() + params.b1;
        Eigen::MatrixXd h = pre.cwiseMax(0.0);
        Eigen::MatrixXd p = sigmoid((params.w2 * h).colwise() + params.b2);
        cache.inputs.bottomRows(out) = p;
        cache.pre_hidden.push_back(std::move(pre));
        cache.hidden.push_back(std::move(h));
        cache.probs.push_back(std::move(p));
    }
    return cache;
}

Eigen::MatrixXd target_matrix(const ModelConfig& config, std::span<const Operation> batch) {
    const int out = config.output_dim();
    Eigen::MatrixXd z(out, static_cast<Eigen::Index>(batch.size()));
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const Operation& op = batch[static_cast<std::size_t>(c)];
        for (int i = 0; i < out; ++i) {
            z(i, c) = static_cast<double>(op.target_bits[static_cast<std::size_t>(i)]);
        }
    }
    return z;
}

double clamped_cross_entropy(const Eigen::MatrixXd& z, const Eigen::MatrixXd& p) {
    double loss = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double pc = std::min(std::max(p(i, c), kProbEpsilon), 1.0 - kProbEpsilon);
            loss -= z(i, c) * std::log(pc) + (1.0 - z(i, c)) * std::log(1.0 - pc);
        }
    }
    return loss;
}

}  // namespace

void ModelConfig::validate() const {
    if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be positive");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
    if (width < 1) throw std::invalid_argument("width must be positive");
    if (!(confidence_threshold > 0.5 && confidence_threshold < 1.0)) {
        throw std::invalid_argument("confidence threshold must lie in (0.5, 1)");
    }
}

NetworkParams NetworkParams::zeros(const ModelConfig& config) {
    NetworkParams params;
    params.w1 = Eigen::MatrixXd::Zero(config.hidden_dim, config.input_dim() + config.output_dim());
    params.b1 = Eigen::VectorXd::Zero(config.hidden_dim);
    params.w2 = Eigen::MatrixXd::Zero(config.output_dim(), config.hidden_dim);
    params.b2 = Eigen::VectorXd::Zero(config.output_dim());
    return params;
}

ParamTensors ParamTensors::zeros_like(const NetworkParams& params) {
    ParamTensors t;
    t.w1 = Eigen::MatrixXd::Zero(params.w1.rows(), params.w1.cols());
    t.b1 = Eigen::VectorXd::Zero(params.b1.size());
    t.w2 = Eigen::MatrixXd::Zero(params.w2.rows(), params.w2.cols());
    t.b2 = Eigen::VectorXd::Zero(params.b2.size());
    return t;
}

Eigen::VectorXd input_vector(const Operation& op) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(op.input_bits.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x(i) = static_cast<double>(op.input_bits[static_cast<std::size_t>(i)]);
    }
    return x;
}

Eigen::VectorXd target_vector(const Operation& op) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(op.target_bits.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z(i) = static_cast<double>(op.target_bits[static_cast<std::size_t>(i)]);
    }
    return z;
}

StepRecord forward_step(const NetworkParams& params, const ModelConfig& config,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& p_prev) {
    check_shapes(params, config);
    if (x.size() != config.input_dim() || p_prev.size() != config.output_dim()) {
        throw std::invalid_argument("input vector shapes do not match the config");
    }
    StepRecord record;
    Eigen::VectorXd joined(x.size() + p_prev.size());
    joined << x, p_prev;
    record.pre_hidden = params.w1 * joined + params.b1;
    record.hidden = record.pre_hidden.cwiseMax(0.0);
    record.probs = (params.w2 * record.hidden + params.b2)
                       .unaryExpr([](double u) { return sigmoid(u); });
    record.decisions = decide_digits(record.probs, config.confidence_threshold);
    return record;
}

std::vector<Digit> decide_digits(const Eigen::VectorXd& probs, double threshold) {
    std::vector<Digit> decisions(static_cast<std::size_t>(probs.size()));
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const double p = probs(i);
        if (p > threshold) {
            decisions[static_cast<std::size_t>(i)] = Digit::One;
        } else if (p < 1.0 - threshold) {
            decisions[static_cast<std::size_t>(i)] = Digit::Zero;
        } else {
            decisions[static_cast<std::size_t>(i)] = Digit::Uncertain;
        }
    }
    return decisions;
}

ForwardTrace run_to_answer(const NetworkParams& params, const ModelConfig& config,
                           const Operation& op) {
    config.validate();
    check_shapes(params, config);
    const Eigen::VectorXd x = input_vector(op);
    Eigen::VectorXd p_prev = Eigen::VectorXd::Constant(config.output_dim(), 0.5);

    ForwardTrace trace;
    for (int t = 0; t < config.max_steps; ++t) {
        StepRecord record = forward_step(params, config, x, p_prev);
        p_prev = record.probs;
        const bool confident =
            std::none_of(record.decisions.begin(), record.decisions.end(),
                         [](Digit d) { return d == Digit::Uncertain; });
        trace.steps.push_back(std::move(record));
        if (confident) {
            trace.answer_step = t;
            const auto& decisions = trace.steps.back().decisions;
            std::vector<std::uint8_t> answer(decisions.size());
            for (std::size_t i = 0; i < decisions.size(); ++i) {
                answer[i] = decisions[i] == Digit::One ? 1 : 0;
            }
            trace.predicted_answer = std::move(answer);
            break;
        }
    }
    return trace;
}

double step_loss(const Eigen::VectorXd& target, const Eigen::VectorXd& probs) {
    if (target.size() != probs.size()) throw std::invalid_argument("target/probs size mismatch");
    return clamped_cross_entropy(target, probs);
}

double total_loss(const NetworkParams& params, const ModelConfig& config, const Operation& op) {
    config.validate();
    check_shapes(params, config);
    const Operation* single = &op;
    UnrollCache cache = unroll(params, config, std::span<const Operation>(single, 1));
    const Eigen::MatrixXd z = target_matrix(config, std::span<const Operation>(single, 1));
    double loss = 0.0;
    for (const Eigen::MatrixXd& p : cache.probs) loss += clamped_cross_entropy(z, p);
    return loss;
}

ParamTensors bptt_gradients(const NetworkParams& params, const ModelConfig& config,
                            std::span<const Operation> batch) {
    config.validate();
    check_shapes(params, config);
    if (batch.empty()) throw std::invalid_argument("bptt_gradients: empty batch");

    const int out = config.output_dim();
    UnrollCache cache = unroll(params, config, batch);
    const Eigen::MatrixXd z = target_matrix(config, batch);

    ParamTensors grads = ParamTensors::zeros_like(params);
    // dL/dp from later steps, flowing backwards through the feedback path.
    Eigen::MatrixXd grad_feedback =
        Eigen::MatrixXd::Zero(out, static_cast<Eigen::Index>(batch.size()));

    for (int t = config.max_steps - 1; t >= 0; --t) {
        const auto ut = static_cast<std::size_t>(t);
        const Eigen::MatrixXd& p = cache.probs[ut];
        // Direct cross-entropy term: dH/du = p - z, flat where the loss clamp
        // is active.
        Eigen::MatrixXd grad_logits = p - z;
        for (Eigen::Index c = 0; c < grad_logits.cols(); ++c) {
            for (Eigen::Index i = 0; i < grad_logits.rows(); ++i) {
                if (p(i, c) <= kProbEpsilon || p(i, c) >= 1.0 - kProbEpsilon) {
                    grad_logits(i, c) = 0.0;
                }
            }
        }
        grad_logits.array() += grad_feedback.array() * p.array() * (1.0 - p.array());

        grads.w2.noalias() += grad_logits * cache.hidden[ut].transpose();
        grads.b2 += grad_logits.rowwise().sum();

        Eigen::MatrixXd grad_act = params.w2.transpose() * grad_logits;
        grad_act.array() *= (cache.pre_hidden[ut].array() > 0.0).cast<double>();

        Eigen::MatrixXd joined(cache.inputs.rows(), grad_act.cols());
        joined.topRows(config.input_dim()) = cache.inputs.topRows(config.input_dim());
        joined.bottomRows(out) = cache.feedback[ut];
        grads.w1.noalias() += grad_act * joined.transpose();
        grads.b1 += grad_act.rowwise().sum();

        grad_feedback.noalias() = (params.w1.transpose() * grad_act).bottomRows(out);
    }
    return grads;
}

BatchEvaluation evaluate_batch(const NetworkParams& params, const ModelConfig& config,
                               std::span<const Operation> ops) {
    config.validate();
    check_shapes(params, config);
    const int in = config.input_dim();
    const int out = config.output_dim();
    const auto n = static_cast<Eigen::Index>(ops.size());

    BatchEvaluation eval;
    eval.answer_steps.assign(ops.size(), std::nullopt);
    eval.correct.assign(ops.size(), false);
    if (n == 0) return eval;

    Eigen::MatrixXd inputs(in + out, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const Operation& op = ops[static_cast<std::size_t>(c)];
        if (op.op != config.op || static_cast<int>(op.input_bits.size()) != in) {
            throw std::invalid_argument("operation does not match the model config");
        }
        for (int i = 0; i < in; ++i) {
            inputs(i, c) = static_cast<double>(op.input_bits[static_cast<std::size_t>(i)]);
        }
    }
    inputs.bottomRows(out).setConstant(0.5);

    const double theta = config.confidence_threshold;
    Eigen::Index unanswered = n;
    for (int t = 0; t < config.max_steps && unanswered > 0; ++t) {
        const Eigen::MatrixXd h = ((params.w1 * inputs).colwise() + params.b1).cwiseMax(0.0);
        const Eigen::MatrixXd p = sigmoid((params.w2 * h).colwise() + params.b2);
        inputs.bottomRows(out) = p;

        for (Eigen::Index c = 0; c < n; ++c) {
            const auto idx = static_cast<std::size_t>(c);
            if (eval.answer_steps[idx].has_value()) continue;
            bool confident = true;
            for (int i = 0; i < out && confident; ++i) {
                const double pi = p(i, c);
                confident = pi > theta || pi < 1.0 - theta;
            }
            if (!confident) continue;
            eval.answer_steps[idx] = t;
            --unanswered;
            bool correct = true;
            const Operation& op = ops[idx];
            for (int i = 0; i < out; ++i) {
                const std::uint8_t digit = p(i, c) > theta ? 1 : 0;
                if (digit != op.target_bits[static_cast<std::size_t>(i)]) {
                    correct = false;
                    break;
                }
            }
            eval.correct[idx] = correct;
        }
    }
    return eval;
}

}  // namespace carrysim
