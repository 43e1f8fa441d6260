#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bico/calib.hpp"
#include "bico/svd.hpp"
#include "bico/taskvec.hpp"

namespace bico {

/// Ordered (source block, target block) pairs for j = 0..D_B-1.
struct DepthMatching {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t source_depth = 0;
    std::size_t target_depth = 0;
};

/// i(j) = round(j*(D_A-1)/(D_B-1)), round half up. Endpoints map to
/// endpoints and the matching is nondecreasing.
DepthMatching depth_match(std::size_t d_a, std::size_t d_b);

struct ProcrustesInfo {
    std::size_t rank = 0;
    bool rank_deficient = false;
};

/// Solve argmin ||source R - target||_F under the semi-orthogonality
/// constraint: R = U V^T from the thin SVD of source^T target.
/// No centering, no scaling. Rank deficiency is reported, not fatal.
DenseMatrix procrustes(const DenseMatrix& source, const DenseMatrix& target,
                       ProcrustesInfo* info = nullptr);

enum class TransferVariant { bico, input_only, output_only, gradient_only };

std::string to_string(TransferVariant v);
TransferVariant transfer_variant_from_string(const std::string& s);

struct LayerMap {
    std::size_t source_layer = 0;
    std::size_t target_layer = 0;
    DenseMatrix r_in;   // d_in,A x d_in,B
    DenseMatrix r_out;  // d_out,A x d_out,B
    bool expansion_in = true;   // d_in,A <= d_in,B
    bool expansion_out = true;  // d_out,A <= d_out,B
};

struct AlignmentMaps {
    DepthMatching matching;
    std::vector<LayerMap> maps;  // blocks in matching order, head last
    std::vector<std::string> warnings;  // rank-deficiency notes
};

/// Estimate per-pair Procrustes maps from the two captures. Both captures
/// must share the token count M (interpolate first). The classification
/// head gets R_out = I and an estimated R_in. gradient_only swaps the
/// input-side source matrices from activations to input-side gradients.
AlignmentMaps estimate_maps(const CalibrationCapture& capture_a,
                            const CalibrationCapture& capture_b,
                            const DepthMatching& matching, TransferVariant variant);

/// Map the source task vector into target coordinates per matched pair.
TaskVector transfer(const TaskVector& tau_a, const AlignmentMaps& maps,
                    const ModelSpec& target_spec, TransferVariant variant);

struct PipelineResult {
    Model model;
    AlignmentMaps maps;
    TaskVector tau_hat;
};

/// End to end: extract, capture both models (with sequence interpolation
/// when token counts differ), depth-match, estimate maps, transfer, apply.
PipelineResult bico_pipeline(const Model& source_pre, const Model& source_ft,
                             const Model& target_pre, const CalibrationSet& calib,
                             TransferVariant variant);

void save_alignment_maps(const AlignmentMaps& maps, const std::filesystem::path& path);
AlignmentMaps load_alignment_maps(const std::filesystem::path& path);

}  // namespace bico
