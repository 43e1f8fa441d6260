#pragma once

#include <vector>

#include "bico/calib.hpp"
#include "bico/model.hpp"
#include "bico/train.hpp"

namespace bico {

/// Linear CKA between two M x d representation matrices (column-centered,
/// Gram-based). Returns 0 if either centered matrix vanishes.
double linear_cka(const DenseMatrix& x, const DenseMatrix& y);

/// Mean over rows of the cosine between matching rows; zero-norm rows
/// contribute 0 and are still counted.
double mean_row_cosine(const DenseMatrix& x, const DenseMatrix& y);

/// Per-layer mean row cosine between the two models' pre-nonlinearity layer
/// outputs y^(l) on the same inputs.
std::vector<double> layer_output_similarity(const Model& candidate, const Model& reference,
                                            const DenseMatrix& inputs);

/// Directional and magnitude drift of per-layer activations along a
/// fine-tuning trajectory relative to the pre-trained capture.
struct ConsistencyProfile {
    struct Entry {
        std::size_t step = 0;
        std::vector<double> delta_direction;  // per layer, in [0, 2]
        std::vector<double> delta_magnitude;  // per layer, >= 0
        std::size_t skipped_zero_norm_rows = 0;
    };
    std::vector<Entry> entries;
};

ConsistencyProfile activation_consistency(const TrajectoryLog& log,
                                          const CalibrationCapture& pre_capture);

/// Closed-form FLOP estimates with unit constants.
struct CostEstimate {
    double calib_flops = 0.0;
    double alignment_flops = 0.0;
    double bico_total = 0.0;
    double finetune_flops = 0.0;
};

CostEstimate estimate_cost(std::size_t p_a, std::size_t p_b, std::size_t num_matrices,
                           std::size_t tokens, std::size_t d_a, std::size_t d_b,
                           std::size_t ft_steps);

}  // namespace bico
