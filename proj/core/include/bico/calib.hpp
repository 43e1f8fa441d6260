#pragma once

#include <cstdint>
#include <vector>

#include "bico/model.hpp"

namespace bico {

enum class CalibStrategy { random, class_balanced, centroid_near, centroid_far,
                           half_class, one_class };

std::string to_string(CalibStrategy s);
CalibStrategy calib_strategy_from_string(const std::string& s);

/// Budget is either a total sample count N or a per-class count K.
struct CalibBudget {
    enum class Kind { total, per_class };
    Kind kind = Kind::total;
    std::size_t value = 0;

    static CalibBudget total(std::size_t n) { return {Kind::total, n}; }
    static CalibBudget per_class(std::size_t k) { return {Kind::per_class, k}; }
};

struct CalibrationSet {
    Batch examples;
    CalibStrategy strategy = CalibStrategy::random;
    CalibBudget budget;
};

/// Select calibration examples from a dataset. Centroid strategies need a
/// feature model (centroids in its last-block input activation space).
CalibrationSet select_calibration(const Batch& dataset, CalibStrategy strategy,
                                  CalibBudget budget, const Model* feature_model,
                                  std::uint64_t seed);

/// One forward-backward pass worth of per-layer flattened activations X and
/// output-side gradients G (optionally input-side gradients Gx), all
/// M x d with M = N * tokens, batch-major then token-major rows.
struct CalibrationCapture {
    std::size_t batch_size = 0;
    std::size_t tokens_per_example = 0;
    std::vector<DenseMatrix> x;   // X^(l),  M x d_in
    std::vector<DenseMatrix> g;   // G^(l),  M x d_out
    std::vector<DenseMatrix> gx;  // dL/dx^(l), M x d_in (when captured)

    std::size_t token_count() const { return batch_size * tokens_per_example; }
};

/// Capture activations and gradients at the model's current (pre-trained)
/// parameters; no parameter update happens.
CalibrationCapture collect(const Model& model, const CalibrationSet& calib,
                           bool capture_input_grads = true);

/// Piecewise-linear resampling along the token axis with endpoint alignment.
/// x is flattened (N*L_src) x d; result is (N*target_len) x d.
DenseMatrix interpolate_sequence(const DenseMatrix& x, std::size_t batch_size,
                                 std::size_t source_len, std::size_t target_len);

/// Resample every matrix in the capture to the target token count.
CalibrationCapture interpolate_capture(const CalibrationCapture& capture,
                                       std::size_t target_len);

}  // namespace bico
