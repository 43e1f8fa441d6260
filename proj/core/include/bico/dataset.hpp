#pragma once

#include <cstdint>

#include "bico/model.hpp"

namespace bico {

/// Synthetic task family. Vector tasks draw class-conditional Gaussian
/// mixtures; image tasks draw class-dependent oriented frequency patterns
/// plus noise, sized for patchification.
struct TaskSuiteConfig {
    enum class Kind { vector, image };
    Kind kind = Kind::vector;
    std::size_t num_classes = 4;
    std::size_t feature_dim = 16;   // vector tasks
    std::size_t image_size = 16;    // image tasks (square)
    std::size_t pretrain_size = 2048;
    std::size_t downstream_train_size = 1024;
    std::size_t downstream_test_size = 1024;
    double noise = 0.35;
    double mean_scale = 1.0;
    double pretrain_shift = 0.25;    // corpus A vs corpus B perturbation
    double downstream_shift = 0.9;   // downstream task perturbation

    void validate() const;
};

/// Four splits with a shared label space: two pretraining corpora drawn from
/// shifted distributions plus a downstream train/test pair from a third shift.
struct TaskSuite {
    Batch pretrain_a;
    Batch pretrain_b;
    Batch downstream_train;
    Batch downstream_test;
    std::size_t num_classes = 0;
    std::uint64_t seed = 0;
};

TaskSuite generate_task_suite(const TaskSuiteConfig& config, std::uint64_t seed);

}  // namespace bico
