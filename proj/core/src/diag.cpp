#include "bico/diag.hpp"

#include <cmath>

namespace bico {

namespace {

DenseMatrix column_centered(const DenseMatrix& m) {
    DenseMatrix c = m;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
        mean /= static_cast<double>(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) c(i, j) -= mean;
    }
    return c;
}

}  // namespace

double linear_cka(const DenseMatrix& x, const DenseMatrix& y) {
    if (x.rows() != y.rows())
        throw shape_error("linear_cka: " + shape_string(x) + " vs " + shape_string(y));
    if (x.rows() < 2) throw argument_error("linear_cka: need at least 2 rows");

    const DenseMatrix xc = column_centered(x);
    const DenseMatrix yc = column_centered(y);
    const double cross = matmul_at_b(yc, xc).frobenius_norm();
    const double xx = matmul_at_b(xc, xc).frobenius_norm();
    const double yy = matmul_at_b(yc, yc).frobenius_norm();
    if (xx == 0.0 || yy == 0.0) return 0.0;
    return cross * cross / (xx * yy);
}

double mean_row_cosine(const DenseMatrix& x, const DenseMatrix& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw shape_error("mean_row_cosine: " + shape_string(x) + " vs " + shape_string(y));
    if (x.rows() == 0) throw argument_error("mean_row_cosine: empty input");

    double acc = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double dot = 0.0, nx = 0.0, ny = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            dot += x(i, j) * y(i, j);
            nx += x(i, j) * x(i, j);
            ny += y(i, j) * y(i, j);
        }
        if (nx > 0.0 && ny > 0.0) acc += dot / std::sqrt(nx * ny);
        // zero-norm rows contribute 0 but still count
    }
    return acc / static_cast<double>(x.rows());
}

std::vector<double> layer_output_similarity(const Model& candidate, const Model& reference,
                                            const DenseMatrix& inputs) {
    if (candidate.num_layers() != reference.num_layers())
        throw shape_error("layer_output_similarity: layer counts differ");
    const ForwardTrace tc = forward(candidate, inputs);
    const ForwardTrace tr = forward(reference, inputs);
    std::vector<double> out;
    for (std::size_t l = 0; l < tc.layer_outputs.size(); ++l) {
        if (tc.layer_outputs[l].cols() != tr.layer_outputs[l].cols())
            throw shape_error("layer_output_similarity: width mismatch at layer " +
                              std::to_string(l));
        out.push_back(mean_row_cosine(tc.layer_outputs[l], tr.layer_outputs[l]));
    }
    return out;
}

ConsistencyProfile activation_consistency(const TrajectoryLog& log,
                                          const CalibrationCapture& pre_capture) {
    if (log.snapshots.empty())
        throw precondition_error("activation_consistency: log carries no snapshots");

    ConsistencyProfile profile;
    for (const auto& snap : log.snapshots) {
        if (snap.layer_inputs.size() != pre_capture.x.size())
            throw precondition_error("activation_consistency: layer count mismatch");
        ConsistencyProfile::Entry entry;
        entry.step = snap.step;
        for (std::size_t l = 0; l < snap.layer_inputs.size(); ++l) {
            const DenseMatrix& xt = snap.layer_inputs[l];
            const DenseMatrix& xp = pre_capture.x[l];
            if (xt.rows() != xp.rows() || xt.cols() != xp.cols())
                throw precondition_error("activation_consistency: snapshot shape mismatch");

            entry.delta_direction.push_back(1.0 - mean_row_cosine(xt, xp));

            double mag = 0.0;
            std::size_t counted = 0;
            for (std::size_t i = 0; i < xt.rows(); ++i) {
                double nt = 0.0, np = 0.0;
                for (std::size_t j = 0; j < xt.cols(); ++j) {
                    nt += xt(i, j) * xt(i, j);
                    np += xp(i, j) * xp(i, j);
                }
                if (np == 0.0) {
                    ++entry.skipped_zero_norm_rows;
                    continue;
                }
                mag += std::fabs(std::sqrt(nt) - std::sqrt(np)) / std::sqrt(np);
                ++counted;
            }
            entry.delta_magnitude.push_back(counted ? mag / double(counted) : 0.0);
        }
        profile.entries.push_back(std::move(entry));
    }
    return profile;
}

CostEstimate estimate_cost(std::size_t p_a, std::size_t p_b, std::size_t num_matrices,
                           std::size_t tokens, std::size_t d_a, std::size_t d_b,
                           std::size_t ft_steps) {
    const double pa = double(p_a), pb = double(p_b), l = double(num_matrices);
    const double m = double(tokens), da = double(d_a), db = double(d_b);

    CostEstimate est;
    est.calib_flops = 6.0 * pa + 6.0 * pb;
    est.alignment_flops = 2.0 * l * (m * da * db + da * da * db) +
                          l * (da * da * db + da * db * db);
    est.bico_total = est.calib_flops + est.alignment_flops;
    est.finetune_flops = double(ft_steps) * 16.0 * pb;
    return est;
}

}  // namespace bico
