#pragma once

#include <filesystem>
#include <vector>

#include "bico/model.hpp"
#include "bico/train.hpp"

namespace bico {

/// Per-layer fine-tuning update: delta weights and biases plus the spec the
/// deltas were extracted against.
struct TaskVector {
    ModelSpec source_spec;
    std::vector<DenseMatrix> delta_w;
    std::vector<std::vector<double>> delta_b;  // empty per layer when no bias
};

/// tau = theta_ft - theta_pre, per layer.
TaskVector extract(const Model& pre, const Model& ft);

/// Rebuild the task vector from a complete plain-SGD trajectory:
/// per layer -sum_t eta_t G_t^T X_t, bias -sum_t eta_t colsum(G_t).
TaskVector reconstruct_from_trajectory(const TrajectoryLog& log, const ModelSpec& spec);

enum class NaiveMode { pad, crop };

/// Shape-matching baselines: zero-fill (pad) or top-left submatrix (crop),
/// both anchored at (0,0). Layer counts must already agree.
TaskVector naive_transfer(const TaskVector& tau, const ModelSpec& target_spec, NaiveMode mode);

/// theta_B,pre + tau_hat, no scaling factor.
Model apply(const Model& target_pre, const TaskVector& tau_hat);

void save_task_vector(const TaskVector& tau, const std::filesystem::path& path);
TaskVector load_task_vector(const std::filesystem::path& path);

}  // namespace bico
