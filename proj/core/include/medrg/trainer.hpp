// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "medrg/model.hpp"

namespace medrg {

struct TrainConfig {
    double learning_rate = 5e-5;   // peak
    int warmup_steps = 100;
    int total_steps = 500;         // optimizer updates
    int grad_accumulation = 10;
    int micro_batch = 2;
    std::uint64_t seed = 0;
    LossWeights loss_weights;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int eval_every = 50;
    int max_new_tokens = 24;
    int threads = 1;               // per-sample parallelism inside a step

    void validate() const;
    int samples_per_step() const { return grad_accumulation * micro_batch; }
};

/// Linear warmup from 0 to the peak over warmup_steps, then linear decay to 0
/// at total_steps. Throws InvalidArgument outside [0, total_steps].
double lr_at(int step, const TrainConfig &config);

/// Decoupled weight decay Adam.
class AdamW {
  public:
    AdamW(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8, double weight_decay = 0.01)
        : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {}

    void step(const ParameterList &params, const Gradients &grads, double lr);
    long steps_taken() const { return t_; }

  private:
    struct Moments {
        Matrix m;
        Matrix v;
    };
    double beta1_, beta2_, epsilon_, weight_decay_;
    long t_ = 0;
    std::unordered_map<const Parameter *, Moments> state_;
};

/// Losses of one optimizer step, batch means.
struct StepLosses {
    long step = 0;       // 1-based update index
    double phrase = 0.0; // L_p
    double l1 = 0.0;     // L_l1
    double giou = 0.0;   // L_giou
    double total = 0.0;  // weighted sum of the three terms
    double lr = 0.0;

    double box() const { return l1 + giou; }
};

struct TrainState {
    long step = 0;
    double best_val_miou = -1.0;
    long best_step = 0;
    std::string best_checkpoint_path;
    std::vector<StepLosses> history;
    std::vector<std::pair<long, double>> validations; // (step, mIoU)
};

/// Joint optimisation of L_all = l_p L_p + l_l1 L_l1 + l_giou L_giou.
class Trainer {
  public:
    Trainer(MedRGModel &model, TrainConfig config);

    const TrainConfig &config() const { return config_; }

    /// One optimizer update over `batch`, split into micro-batches of
    /// config.micro_batch. Every sample contributes gradient weight
    /// 1 / (n_micro * micro_size), so the update matches a single pass over
    /// the concatenated batch. Throws NonFiniteLoss naming the offending term.
    StepLosses train_step(std::span<const PreparedSample *const> batch);

    /// Forward/backward only: the weighted per-sample gradients summed in sample
    /// order, plus the batch-mean losses. No parameter update.
    StepLosses accumulate_gradients(std::span<const PreparedSample *const> batch, Gradients &out);

    long step() const { return step_; }

  private:
    MedRGModel &model_;
    TrainConfig config_;
    AdamW optimizer_;
    long step_ = 0;
};

struct FitOptions {
    std::optional<std::filesystem::path> best_checkpoint; // written whenever validation improves
    std::optional<std::filesystem::path> log_path;        // JSON-lines, one record per step
    std::function<void(const StepLosses &)> on_step;
};

struct FitResult {
    TrainState state;
    std::vector<Matrix> best_parameters; // snapshot at the best validation step
};

/// Draws config.samples_per_step() samples per step from seed-shuffled epochs
/// over `train`, evaluates validation mIoU at step 0, every eval_every steps and
/// at the end, and keeps the parameters with the highest mIoU (earliest on ties).
/// `model` is left at the final parameters.
FitResult fit(MedRGModel &model, std::span<const PreparedSample> train,
              std::span<const PreparedSample> validation, const TrainConfig &config,
              const FitOptions &options = {});

/// Appends one JSON line per step: step, L_p, L_l1, L_giou, L_all, lr.
void append_log(const std::filesystem::path &path, const StepLosses &losses);

} // namespace medrg
