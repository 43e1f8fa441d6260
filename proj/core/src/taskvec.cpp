#include "bico/taskvec.hpp"

#include "bico/checkpoint.hpp"

namespace bico {

TaskVector extract(const Model& pre, const Model& ft) {
    if (!(pre.spec() == ft.spec()))
        throw shape_error("extract: pre and ft specs differ");
    TaskVector tau;
    tau.source_spec = pre.spec();
    for (std::size_t l = 0; l < pre.num_layers(); ++l) {
        tau.delta_w.push_back(ft.weight(l) - pre.weight(l));
        std::vector<double> db(pre.bias(l).size());
        for (std::size_t i = 0; i < db.size(); ++i) db[i] = ft.bias(l)[i] - pre.bias(l)[i];
        tau.delta_b.push_back(std::move(db));
    }
    return tau;
}

TaskVector reconstruct_from_trajectory(const TrajectoryLog& log, const ModelSpec& spec) {
    if (log.optimizer != OptimizerKind::sgd || log.weight_decay != 0.0)
        throw precondition_error(
            "reconstruct_from_trajectory: requires plain SGD with zero weight decay");
    if (log.stride != 1)
        throw precondition_error("reconstruct_from_trajectory: requires stride-1 log");

    TaskVector tau;
    tau.source_spec = spec;
    for (const auto& ls : spec.layers) {
        tau.delta_w.emplace_back(ls.d_out, ls.d_in);
        tau.delta_b.emplace_back(ls.has_bias ? ls.d_out : 0, 0.0);
    }
    for (const auto& step : log.steps) {
        if (step.output_grads.size() != spec.layers.size())
            throw precondition_error("reconstruct_from_trajectory: layer count mismatch");
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            const DenseMatrix upd = matmul_at_b(step.output_grads[l], step.inputs[l]);
            tau.delta_w[l] -= step.eta * upd;
            if (!tau.delta_b[l].empty()) {
                const DenseMatrix& g = step.output_grads[l];
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c)
                        tau.delta_b[l][c] -= step.eta * g(r, c);
            }
        }
    }
    return tau;
}

TaskVector naive_transfer(const TaskVector& tau, const ModelSpec& target_spec, NaiveMode mode) {
    if (tau.delta_w.size() != target_spec.layers.size())
        throw shape_error("naive_transfer: layer counts differ (" +
                          std::to_string(tau.delta_w.size()) + " vs " +
                          std::to_string(target_spec.layers.size()) + ")");
    TaskVector out;
    out.source_spec = target_spec;
    for (std::size_t l = 0; l < tau.delta_w.size(); ++l) {
        const DenseMatrix& src = tau.delta_w[l];
        const auto& ls = target_spec.layers[l];
        if (mode == NaiveMode::pad) {
            if (ls.d_out < src.rows() || ls.d_in < src.cols())
                throw shape_error("naive_transfer(pad): target layer " + std::to_string(l) +
                                  " smaller than source " + shape_string(src));
        } else {
            if (ls.d_out > src.rows() || ls.d_in > src.cols())
                throw shape_error("naive_transfer(crop): target layer " + std::to_string(l) +
                                  " larger than source " + shape_string(src));
        }
        DenseMatrix dst(ls.d_out, ls.d_in);
        const std::size_t r = std::min(dst.rows(), src.rows());
        const std::size_t c = std::min(dst.cols(), src.cols());
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) dst(i, j) = src(i, j);
        out.delta_w.push_back(std::move(dst));

        std::vector<double> db(ls.has_bias ? ls.d_out : 0, 0.0);
        for (std::size_t i = 0; i < std::min(db.size(), tau.delta_b[l].size()); ++i)
            db[i] = tau.delta_b[l][i];
        out.delta_b.push_back(std::move(db));
    }
    return out;
}

Model apply(const Model& target_pre, const TaskVector& tau_hat) {
    Model out = target_pre;
    if (tau_hat.delta_w.size() != out.num_layers())
        throw shape_error("apply: layer count mismatch");
    for (std::size_t l = 0; l < out.num_layers(); ++l) {
        if (tau_hat.delta_w[l].rows() != out.weight(l).rows() ||
            tau_hat.delta_w[l].cols() != out.weight(l).cols())
            throw shape_error("apply: layer " + std::to_string(l) + " delta is " +
                              shape_string(tau_hat.delta_w[l]) + ", model wants " +
                              shape_string(out.weight(l)));
        out.weight(l) += tau_hat.delta_w[l];
        if (!out.bias(l).empty()) {
            if (tau_hat.delta_b[l].size() != out.bias(l).size())
                throw shape_error("apply: layer " + std::to_string(l) + " bias length mismatch");
            for (std::size_t i = 0; i < out.bias(l).size(); ++i)
                out.bias(l)[i] += tau_hat.delta_b[l][i];
        }
    }
    return out;
}

void save_task_vector(const TaskVector& tau, const std::filesystem::path& path) {
    Container c;
    c.kind = "taskvector";
    c.meta["spec"] = spec_to_json(tau.source_spec);
    for (std::size_t l = 0; l < tau.delta_w.size(); ++l) {
        const auto& w = tau.delta_w[l];
        c.tensors.push_back({"dw" + std::to_string(l), {w.rows(), w.cols()}, "f64",
                             w.values(), {}});
        if (!tau.delta_b[l].empty())
            c.tensors.push_back({"db" + std::to_string(l), {tau.delta_b[l].size()}, "f64",
                                 tau.delta_b[l], {}});
    }
    write_container(path, c);
}

TaskVector load_task_vector(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.kind != "taskvector")
        throw format_error("expected kind 'taskvector', got '" + c.kind + "'", 0);
    TaskVector tau;
    tau.source_spec = spec_from_json(c.meta.at("spec"));
    for (std::size_t l = 0; l < tau.source_spec.layers.size(); ++l) {
        const auto& wt = c.tensor("dw" + std::to_string(l));
        tau.delta_w.emplace_back(wt.shape.at(0), wt.shape.at(1), wt.f64);
        tau.delta_w.back().require_finite("load_task_vector");
        if (tau.source_spec.layers[l].has_bias)
            tau.delta_b.push_back(c.tensor("db" + std::to_string(l)).f64);
        else
            tau.delta_b.emplace_back();
    }
    return tau;
}

}  // namespace bico
