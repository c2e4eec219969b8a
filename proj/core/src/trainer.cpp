// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/trainer.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "medrg/errors.hpp"

namespace medrg {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || warmup_steps < 0 || total_steps < 0 || grad_accumulation <= 0 ||
        micro_batch <= 0 || eval_every <= 0 || max_new_tokens < 0 || threads <= 0) {
        throw InvalidArgument("TrainConfig: rates and counts must be positive");
    }
    if (warmup_steps > total_steps) {
        throw InvalidArgument("TrainConfig: warmup_steps must not exceed total_steps");
    }
    if (loss_weights.phrase < 0.0 || loss_weights.l1 < 0.0 || loss_weights.giou < 0.0) {
        throw InvalidArgument("TrainConfig: loss weights must be non-negative");
    }
}

double lr_at(int step, const TrainConfig &config) {
    if (step < 0 || step > config.total_steps) {
        throw InvalidArgument("lr_at: step " + std::to_string(step) + " outside [0, " +
                              std::to_string(config.total_steps) + "]");
    }
    const double peak = config.learning_rate;
    if (step < config.warmup_steps) {
        return peak * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
    }
    const int decay_span = config.total_steps - config.warmup_steps;
    if (decay_span == 0) {
        return peak;
    }
    return peak * static_cast<double>(config.total_steps - step) / static_cast<double>(decay_span);
}

void AdamW::step(const ParameterList &params, const Gradients &grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<float>(beta1_);
    const auto b2 = static_cast<float>(beta2_);
    const auto step_size = static_cast<float>(lr / bc1);
    const auto inv_bc2_sqrt = static_cast<float>(1.0 / std::sqrt(bc2));
    const auto eps = static_cast<float>(epsilon_);
    const auto decay = static_cast<float>(1.0 - lr * weight_decay_);

    for (Parameter *p : params) {
        const Matrix *g = grads.find(*p);
        auto it = state_.find(p);
        if (it == state_.end()) {
            it = state_.emplace(p, Moments{Matrix::Zero(p->value.rows(), p->value.cols()),
                                           Matrix::Zero(p->value.rows(), p->value.cols())}).first;
        }
        Moments &s = it->second;
        if (s.m.rows() != p->value.rows() || s.m.cols() != p->value.cols()) {
            throw InvalidArgument("AdamW: parameter '" + p->name + "' changed shape");
        }
        if (g) {
            s.m = b1 * s.m + (1.0f - b1) * *g;
            s.v = b2 * s.v + (1.0f - b2) * g->cwiseProduct(*g);
        } else {
            s.m *= b1;
            s.v *= b2;
        }
        if (p->decay) {
            p->value *= decay;
        }
        p->value.array() -= step_size * s.m.array() / (s.v.array().sqrt() * inv_bc2_sqrt + eps);
    }
}

Trainer::Trainer(MedRGModel &model, TrainConfig config)
    : model_(model), config_(std::move(config)),
      optimizer_(config_.beta1, config_.beta2, config_.adam_epsilon, config_.weight_decay) {
    config_.validate();
}

namespace {

struct SampleResult {
    Gradients grads;
    double phrase = 0.0;
    double l1 = 0.0;
    double giou = 0.0;
};

void run_sample(const MedRGModel &model, const PreparedSample &s, const LossWeights &w, SampleResult &out) {
    Graph g;
    const SampleLoss loss = model.training_loss(g, s, w);
    out.phrase = loss.phrase;
    out.l1 = loss.l1;
    out.giou = loss.giou;
    g.backward(loss.total);
    out.grads.clear();
    g.flush_parameter_grads(out.grads);
}

} // namespace

StepLosses Trainer::accumulate_gradients(std::span<const PreparedSample *const> batch, Gradients &out) {
    if (batch.empty()) {
        throw InvalidArgument("train_step: empty batch");
    }
    const std::size_t n = batch.size();
    const auto micro = static_cast<std::size_t>(config_.micro_batch);
    const std::size_t n_micro = (n + micro - 1) / micro;

    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t first = (i / micro) * micro;
        const std::size_t size = std::min(micro, n - first);
        weight[i] = 1.0 / static_cast<double>(n_micro * size);
    }

    const ParameterList params = model_.parameters();
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(config_.threads), n);
    std::vector<SampleResult> results(threads);
    StepLosses losses;
    losses.step = step_ + 1;

    for (std::size_t start = 0; start < n; start += threads) {
        const std::size_t count = std::min(threads, n - start);
        if (count == 1) {
            run_sample(model_, *batch[start], config_.loss_weights, results[0]);
        } else {
            std::vector<std::jthread> workers;
            for (std::size_t k = 0; k < count; ++k) {
                workers.emplace_back([&, k] {
                    run_sample(model_, *batch[start + k], config_.loss_weights, results[k]);
                });
            }
        }
        // Fixed summation order keeps results independent of the thread count.
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t i = start + k;
            const SampleResult &r = results[k];
            for (const auto &[term, value] : {std::pair{"L_p", r.phrase}, std::pair{"L_l1", r.l1},
                                              std::pair{"L_giou", r.giou}}) {
                if (!std::isfinite(value)) {
                    throw NonFiniteLoss(term, losses.step);
                }
            }
            out.accumulate(r.grads, params, static_cast<float>(weight[i]));
            losses.phrase += weight[i] * r.phrase;
            losses.l1 += weight[i] * r.l1;
            losses.giou += weight[i] * r.giou;
        }
    }
    const LossWeights &w = config_.loss_weights;
    losses.total = w.phrase * losses.phrase + w.l1 * losses.l1 + w.giou * losses.giou;
    return losses;
}

StepLosses Trainer::train_step(std::span<const PreparedSample *const> batch) {
    Gradients grads;
    StepLosses losses = accumulate_gradients(batch, grads);
    losses.lr = lr_at(static_cast<int>(step_ + 1), config_);
    optimizer_.step(model_.parameters(), grads, losses.lr);
    ++step_;
    return losses;
}

void append_log(const std::filesystem::path &path, const StepLosses &l) {
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw IoError(path.string(), "cannot open training log");
    }
    const nlohmann::json j{{"step", l.step}, {"L_p", l.phrase}, {"L_l1", l.l1},
                           {"L_giou", l.giou}, {"L_all", l.total}, {"lr", l.lr}};
    out << j.dump() << '\n';
    if (!out) {
        throw IoError(path.string(), "training log write failure");
    }
}

FitResult fit(MedRGModel &model, std::span<const PreparedSample> train,
              std::span<const PreparedSample> validation, const TrainConfig &config,
              const FitOptions &options) {
    config.validate();
    if (train.empty()) {
        throw InvalidArgument("fit: empty training set");
    }
    if (options.log_path) {
        std::ofstream truncate(*options.log_path, std::ios::trunc);
        if (!truncate) {
            throw IoError(options.log_path->string(), "cannot create training log");
        }
    }

    FitResult result;
    TrainState &state = result.state;
    if (options.best_checkpoint) {
        state.best_checkpoint_path = options.best_checkpoint->string();
    }

    auto evaluate = [&](long step) {
        double miou = 0.0;
        if (!validation.empty()) {
            const std::vector<Prediction> preds = predict(model, validation, config.max_new_tokens);
            std::vector<BoxPair> pairs;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                pairs.push_back({preds[i].box, validation[i].target});
            }
            miou = mean_iou(pairs);
        }
        state.validations.emplace_back(step, miou);
        if (miou > state.best_val_miou) {
            state.best_val_miou = miou;
            state.best_step = step;
            result.best_parameters = model.snapshot();
            if (options.best_checkpoint) {
                save_checkpoint(model, *options.best_checkpoint);
            }
        }
    };

    evaluate(0);

    Trainer trainer(model, config);
    Rng order_rng(mix_seed(config.seed, 7));
    std::vector<std::size_t> order(train.size());
    std::size_t cursor = order.size();
    std::vector<const PreparedSample *> batch;

    for (int step = 1; step <= config.total_steps; ++step) {
        batch.clear();
        while (batch.size() < static_cast<std::size_t>(config.samples_per_step())) {
            if (cursor == order.size()) {
                for (std::size_t i = 0; i < order.size(); ++i) {
                    order[i] = i;
                }
                order_rng.shuffle(order.begin(), order.end());
                cursor = 0;
            }
            batch.push_back(&train[order[cursor++]]);
        }
        const StepLosses losses = trainer.train_step(batch);
        state.history.push_back(losses);
        state.step = step;
        if (options.log_path) {
            append_log(*options.log_path, losses);
        }
        if (options.on_step) {
            options.on_step(losses);
        }
        if (step % config.eval_every == 0 || step == config.total_steps) {
            evaluate(step);
        }
    }
    return result;
}

} // namespace medrg
