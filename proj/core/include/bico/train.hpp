#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bico/model.hpp"

namespace bico {

enum class OptimizerKind { sgd, adamw };
enum class LrSchedule { constant, cosine };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double learning_rate = 1e-2;
    std::size_t steps = 0;
    std::size_t batch_size = 32;
    double weight_decay = 0.0;
    std::size_t warmup_steps = 0;
    LrSchedule schedule = LrSchedule::constant;
    std::uint64_t seed = 0;
    // AdamW moments; fixed defaults, the schedule above still applies.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

/// Effective learning rate at step t (0-based) under warmup + schedule.
double effective_lr(const OptimizerConfig& cfg, std::size_t t);

/// One logged optimization step: the flattened (G_t, X_t) factor pair per
/// layer, from which the step's weight update is -eta * G^T X under SGD.
struct TrajectoryStep {
    std::size_t step = 0;
    double eta = 0.0;
    std::vector<DenseMatrix> output_grads;  // G_t^(l)
    std::vector<DenseMatrix> inputs;        // X_t^(l)
};

/// Per-layer activation snapshot on a fixed probe batch at a logged step.
struct ActivationSnapshot {
    std::size_t step = 0;
    std::vector<DenseMatrix> layer_inputs;
};

struct TrajectoryLog {
    OptimizerKind optimizer = OptimizerKind::sgd;
    double weight_decay = 0.0;
    std::size_t stride = 1;
    std::vector<TrajectoryStep> steps;
    std::vector<ActivationSnapshot> snapshots;
};

struct TrainLogging {
    bool log_trajectory = false;
    std::size_t snapshot_stride = 0;     // 0 disables snapshots
    const Batch* snapshot_probe = nullptr;
};

struct TrainResult {
    Model model;
    std::optional<TrajectoryLog> log;
};

/// Fine-tune a copy of the model; the input model is untouched.
/// Deterministic given (model, dataset, config).
TrainResult train(const Model& model, const Batch& dataset, const OptimizerConfig& config,
                  const TrainLogging& logging = {});

}  // namespace bico
