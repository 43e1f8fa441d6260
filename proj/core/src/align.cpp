#include "bico/align.hpp"

#include <cmath>

#include "bico/checkpoint.hpp"

namespace bico {

DepthMatching depth_match(std::size_t d_a, std::size_t d_b) {
    if (d_a < 1 || d_b < 1) throw argument_error("depth_match: zero depth");
    if (d_b == 1 && d_a != 1)
        throw argument_error("depth_match: single-block target needs a single-block source");
    DepthMatching m;
    m.source_depth = d_a;
    m.target_depth = d_b;
    for (std::size_t j = 0; j < d_b; ++j) {
        std::size_t i = 0;
        if (d_b > 1) {
            const double pos = static_cast<double>(j) * static_cast<double>(d_a - 1) /
                               static_cast<double>(d_b - 1);
            i = static_cast<std::size_t>(std::floor(pos + 0.5));  // round half up
        }
        m.pairs.emplace_back(i, j);
    }
    return m;
}

DenseMatrix procrustes(const DenseMatrix& source, const DenseMatrix& target,
                       ProcrustesInfo* info) {
    if (source.rows() != target.rows())
        throw shape_error("procrustes: row counts differ, " + shape_string(source) +
                          " vs " + shape_string(target));
    if (source.rows() == 0) throw argument_error("procrustes: empty input");

    const DenseMatrix c = matmul_at_b(source, target);
    const SvdResult dec = svd(c);
    if (info) {
        info->rank = svd_rank(dec);
        info->rank_deficient = info->rank < dec.s.size();
    }
    return matmul_a_bt(dec.u, dec.v);
}

std::string to_string(TransferVariant v) {
    switch (v) {
        case TransferVariant::bico: return "bico";
        case TransferVariant::input_only: return "input_only";
        case TransferVariant::output_only: return "output_only";
        case TransferVariant::gradient_only: return "gradient_only";
    }
    return "bico";
}

TransferVariant transfer_variant_from_string(const std::string& s) {
    if (s == "bico") return TransferVariant::bico;
    if (s == "input_only") return TransferVariant::input_only;
    if (s == "output_only") return TransferVariant::output_only;
    if (s == "gradient_only") return TransferVariant::gradient_only;
    throw argument_error("unknown transfer variant: " + s);
}

namespace {

LayerMap make_layer_map(std::size_t src, std::size_t tgt, const DenseMatrix& in_a,
                        const DenseMatrix& in_b, const DenseMatrix* out_a,
                        const DenseMatrix* out_b, std::size_t head_classes,
                        std::vector<std::string>& warnings) {
    LayerMap lm;
    lm.source_layer = src;
    lm.target_layer = tgt;

    ProcrustesInfo info;
    lm.r_in = procrustes(in_a, in_b, &info);
    if (info.rank_deficient)
        warnings.push_back("layer pair (" + std::to_string(src) + "," + std::to_string(tgt) +
                           ") input-side cross-covariance rank " + std::to_string(info.rank));
    lm.expansion_in = in_a.cols() <= in_b.cols();

    if (out_a && out_b) {
        lm.r_out = procrustes(*out_a, *out_b, &info);
        if (info.rank_deficient)
            warnings.push_back("layer pair (" + std::to_string(src) + "," +
                               std::to_string(tgt) + ") output-side cross-covariance rank " +
                               std::to_string(info.rank));
        lm.expansion_out = out_a->cols() <= out_b->cols();
    } else {
        // classification head: output coordinates are the shared label space
        lm.r_out = DenseMatrix::identity(head_classes);
        lm.expansion_out = true;
    }
    return lm;
}

}  // namespace

AlignmentMaps estimate_maps(const CalibrationCapture& capture_a,
                            const CalibrationCapture& capture_b,
                            const DepthMatching& matching, TransferVariant variant) {
    if (capture_a.token_count() != capture_b.token_count())
        throw precondition_error("estimate_maps: token counts differ (" +
                                 std::to_string(capture_a.token_count()) + " vs " +
                                 std::to_string(capture_b.token_count()) +
                                 "); interpolate first");
    if (variant == TransferVariant::gradient_only && capture_a.gx.empty())
        throw precondition_error("estimate_maps: gradient_only needs input-side gradients");
    if (matching.source_depth + 1 != capture_a.x.size() ||
        matching.target_depth + 1 != capture_b.x.size())
        throw precondition_error("estimate_maps: matching does not cover the captures");

    const auto& in_side_a =
        variant == TransferVariant::gradient_only ? capture_a.gx : capture_a.x;
    const auto& in_side_b =
        variant == TransferVariant::gradient_only ? capture_b.gx : capture_b.x;

    AlignmentMaps out;
    out.matching = matching;
    for (const auto& [src, tgt] : matching.pairs)
        out.maps.push_back(make_layer_map(src, tgt, in_side_a[src], in_side_b[tgt],
                                          &capture_a.g[src], &capture_b.g[tgt], 0,
                                          out.warnings));
    // head pair: last layer of each model, R_out forced to identity
    const std::size_t head_a = capture_a.x.size() - 1, head_b = capture_b.x.size() - 1;
    out.maps.push_back(make_layer_map(head_a, head_b, in_side_a[head_a], in_side_b[head_b],
                                      nullptr, nullptr, capture_a.g[head_a].cols(),
                                      out.warnings));
    return out;
}

TaskVector transfer(const TaskVector& tau_a, const AlignmentMaps& maps,
                    const ModelSpec& target_spec, TransferVariant variant) {
    TaskVector out;
    out.source_spec = target_spec;
    out.delta_w.resize(target_spec.layers.size());
    out.delta_b.resize(target_spec.layers.size());

    for (const auto& lm : maps.maps) {
        const DenseMatrix& dw = tau_a.delta_w.at(lm.source_layer);
        const std::vector<double>& db = tau_a.delta_b.at(lm.source_layer);
        const auto& tgt_layer = target_spec.layers.at(lm.target_layer);
        if (dw.cols() != lm.r_in.rows() || dw.rows() != lm.r_out.rows())
            throw shape_error("transfer: tau layer " + std::to_string(lm.source_layer) +
                              " is " + shape_string(dw) + ", maps want " +
                              std::to_string(lm.r_out.rows()) + "x" +
                              std::to_string(lm.r_in.rows()));

        DenseMatrix mapped;
        std::vector<double> mapped_b;
        switch (variant) {
            case TransferVariant::bico:
            case TransferVariant::gradient_only: {
                mapped = matmul_at_b(lm.r_out, matmul(dw, lm.r_in));
                mapped_b.assign(lm.r_out.cols(), 0.0);
                for (std::size_t i = 0; i < db.size(); ++i)
                    for (std::size_t j = 0; j < lm.r_out.cols(); ++j)
                        mapped_b[j] += db[i] * lm.r_out(i, j);
                break;
            }
            case TransferVariant::input_only: {
                if (dw.rows() != tgt_layer.d_out)
                    throw shape_error(
                        "transfer: input_only requires matching output widths at layer " +
                        std::to_string(lm.target_layer) + " (" +
                        std::to_string(dw.rows()) + " vs " +
                        std::to_string(tgt_layer.d_out) + ")");
                mapped = matmul(dw, lm.r_in);
                mapped_b = db;  // output coordinates untouched
                break;
            }
            case TransferVariant::output_only: {
                if (dw.cols() != tgt_layer.d_in)
                    throw shape_error(
                        "transfer: output_only requires matching input widths at layer " +
                        std::to_string(lm.target_layer) + " (" +
                        std::to_string(dw.cols()) + " vs " +
                        std::to_string(tgt_layer.d_in) + ")");
                mapped = matmul_at_b(lm.r_out, dw);
                mapped_b.assign(lm.r_out.cols(), 0.0);
                for (std::size_t i = 0; i < db.size(); ++i)
                    for (std::size_t j = 0; j < lm.r_out.cols(); ++j)
                        mapped_b[j] += db[i] * lm.r_out(i, j);
                break;
            }
        }
        out.delta_w[lm.target_layer] = std::move(mapped);
        out.delta_b[lm.target_layer] =
            tgt_layer.has_bias ? std::move(mapped_b) : std::vector<double>{};
    }

    for (std::size_t l = 0; l < target_spec.layers.size(); ++l)
        if (out.delta_w[l].empty())
            throw precondition_error("transfer: maps do not cover target layer " +
                                     std::to_string(l));
    return out;
}

PipelineResult bico_pipeline(const Model& source_pre, const Model& source_ft,
                             const Model& target_pre, const CalibrationSet& calib,
                             TransferVariant variant) {
    const TaskVector tau = extract(source_pre, source_ft);

    const bool want_gx = variant == TransferVariant::gradient_only;
    CalibrationCapture cap_a = collect(source_pre, calib, want_gx);
    CalibrationCapture cap_b = collect(target_pre, calib, want_gx);
    if (cap_a.tokens_per_example != cap_b.tokens_per_example)
        cap_a = interpolate_capture(cap_a, cap_b.tokens_per_example);

    DepthMatching matching;  // head-only models have no blocks to match
    if (source_pre.spec().depth > 0 || target_pre.spec().depth > 0)
        matching = depth_match(source_pre.spec().depth, target_pre.spec().depth);
    AlignmentMaps maps = estimate_maps(cap_a, cap_b, matching, variant);
    TaskVector tau_hat = transfer(tau, maps, target_pre.spec(), variant);
    Model model = apply(target_pre, tau_hat);
    return PipelineResult{std::move(model), std::move(maps), std::move(tau_hat)};
}

void save_alignment_maps(const AlignmentMaps& maps, const std::filesystem::path& path) {
    Container c;
    c.kind = "maps";
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& lm : maps.maps)
        pairs.push_back({{"source_layer", lm.source_layer},
                         {"target_layer", lm.target_layer},
                         {"expansion_in", lm.expansion_in},
                         {"expansion_out", lm.expansion_out}});
    c.meta["pairs"] = pairs;
    c.meta["source_depth"] = maps.matching.source_depth;
    c.meta["target_depth"] = maps.matching.target_depth;
    c.meta["warnings"] = maps.warnings;
    for (std::size_t i = 0; i < maps.maps.size(); ++i) {
        const auto& lm = maps.maps[i];
        c.tensors.push_back({"r_in" + std::to_string(i), {lm.r_in.rows(), lm.r_in.cols()},
                             "f64", lm.r_in.values(), {}});
        c.tensors.push_back({"r_out" + std::to_string(i),
                             {lm.r_out.rows(), lm.r_out.cols()}, "f64", lm.r_out.values(), {}});
    }
    write_container(path, c);
}

AlignmentMaps load_alignment_maps(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.kind != "maps") throw format_error("expected kind 'maps', got '" + c.kind + "'", 0);
    AlignmentMaps maps;
    maps.matching.source_depth = c.meta.at("source_depth").get<std::size_t>();
    maps.matching.target_depth = c.meta.at("target_depth").get<std::size_t>();
    maps.warnings = c.meta.value("warnings", std::vector<std::string>{});
    const auto& pairs = c.meta.at("pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        LayerMap lm;
        lm.source_layer = pairs[i].at("source_layer").get<std::size_t>();
        lm.target_layer = pairs[i].at("target_layer").get<std::size_t>();
        lm.expansion_in = pairs[i].at("expansion_in").get<bool>();
        lm.expansion_out = pairs[i].at("expansion_out").get<bool>();
        const auto& ri = c.tensor("r_in" + std::to_string(i));
        const auto& ro = c.tensor("r_out" + std::to_string(i));
        lm.r_in = DenseMatrix(ri.shape.at(0), ri.shape.at(1), ri.f64);
        lm.r_out = DenseMatrix(ro.shape.at(0), ro.shape.at(1), ro.f64);
        if (i + 1 < pairs.size())
            maps.matching.pairs.emplace_back(lm.source_layer, lm.target_layer);
        maps.maps.push_back(std::move(lm));
    }
    return maps;
}

}  // namespace bico
