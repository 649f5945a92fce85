#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cola/data.hpp"
#include "cola/model.hpp"

namespace cola {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    int stage = 1;
    int epochs = 100;
    int batch_size = 8;
    double lr = 1e-4;
    int lr_decay_every = 45;
    double lr_decay_factor = 10.0;
    std::uint64_t seed = 7;
    ConditionDistribution conditions;
    AdamConfig adam;
    // Stage-II toggles; the full scheme has all four set.
    bool copy = true;
    bool zero_conv = true;
    bool freeze = true;
    bool modality_dropout = true;

    static TrainConfig paper_stage1();
    static TrainConfig paper_stage2();
    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

/// lr0 * factor^-floor(epoch / decay_every), epochs counted from 0.
double learning_rate(const TrainConfig& cfg, int epoch);

class Adam {
public:
    Adam(std::vector<Param*> params, const AdamConfig& cfg);
    void step(double lr);
    long steps() const { return t_; }

private:
    std::vector<Param*> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig cfg_;
    long t_ = 0;
};

struct StepRecord {
    int epoch = 0;
    long step = 0;
    int condition_counts[3] = {0, 0, 0};
    double bce = 0.0;
    double iou = 0.0;
    double total = 0.0;
    double lr = 0.0;
};

struct EpochSummary {
    int epoch = 0;
    double bce = 0.0;
    double iou = 0.0;
    double total = 0.0;
    double lr = 0.0;
};

struct TrainHooks {
    /// Receives one line per optimizer step.
    std::ostream* log = nullptr;
    std::vector<EpochSummary>* epochs = nullptr;
};

void write_step_record(std::ostream& os, const StepRecord& r);

/// Runs `cfg.epochs` epochs over every trainable group of `state`. Conditions are
/// sampled per sample when `sample_conditions`, otherwise inputs stay complete.
/// Frozen groups are digest-checked at every epoch boundary.
void run_training(ModelState& state, const Dataset& data, const TrainConfig& cfg, bool sample_conditions,
                  const TrainHooks& hooks = {});

ModelState train_stage1(const Dataset& data, const TrainConfig& cfg, const ModelConfig& model_cfg,
                        const TrainHooks& hooks = {});

/// Prepares the stage-II state from a stage-I state according to the toggles
/// (copy, zero_conv, freeze) without training it.
ModelState prepare_stage2(const ModelState& stage1, const TrainConfig& cfg);

ModelState train_stage2(const ModelState& stage1, const Dataset& data, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});

}  // namespace cola
