#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scanpath/adam.hpp"
#include "scanpath/data_io.hpp"
#include "scanpath/loss.hpp"
#include "scanpath/model.hpp"

namespace scanpath::train {

struct TrainConfig {
    double lr = 1e-4;
    std::uint64_t max_steps = 1000;
    std::uint64_t checkpoint_every = 0;  // 0: final checkpoint only
    std::uint64_t seed = 0;
    bool teacher_forcing = true;  // false: feed back sampled fixations
    loss::LossConfig loss;
    model::ModelConfig model;

    void validate() const;
};

struct TrainerState {
    ad::AdamState adam;
    std::uint64_t step = 0;  // completed optimizer steps
};

/// Fresh optimizer state for model.
TrainerState initial_state(const model::ScanpathModel& model);

/// Loss of one training rollout without updating anything. The rollout is
/// seeded by (cfg.seed, step_index): anchor scanpath and Bayesian weights.
ad::Tensor rollout_loss(const model::ScanpathModel& model, const model::FeatureStack& feat,
                        const data::PreparedExample& example, const TrainConfig& cfg, std::uint64_t step_index);

/// One optimizer step on one image with its ground-truth set; returns the loss.
double train_step(model::ScanpathModel& model, const data::PreparedExample& example,
                  const model::FeatureProvider& provider, TrainerState& state, const TrainConfig& cfg);

/// Example index visited at a given step: seeded shuffle per epoch.
std::size_t example_for_step(std::uint64_t seed, std::uint64_t step, std::size_t n_examples);

using CheckpointSink = std::function<void(const data::Checkpoint&, std::uint64_t step)>;

struct TrainResult {
    std::vector<std::pair<std::uint64_t, double>> losses;  // (step, loss)
    data::Checkpoint final_checkpoint;
};

/// Runs from state.step up to cfg.max_steps. Non-finite losses throw NumericalError.
TrainResult train(model::ScanpathModel& model, const std::vector<data::PreparedExample>& examples,
                  const model::FeatureProvider& provider, TrainerState& state, const TrainConfig& cfg,
                  const CheckpointSink& sink = {});

/// Writes the step,loss log.
std::string format_loss_log(const std::vector<std::pair<std::uint64_t, double>>& losses);

// --- checkpoints ---

data::Checkpoint make_checkpoint(const model::ScanpathModel& model, const TrainerState& state,
                                 const TrainConfig& cfg);

/// Rebuilds model and optimizer state. With expected set, a differing model
/// configuration raises ConfigMismatch.
std::pair<model::ScanpathModel, TrainerState> restore_checkpoint(const data::Checkpoint& c,
                                                                  const model::ModelConfig* expected = nullptr);

}  // namespace scanpath::train
