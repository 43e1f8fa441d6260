#include "bico/train.hpp"

#include <cmath>
#include <numbers>

#include "bico/rng.hpp"

namespace bico {

void OptimizerConfig::validate() const {
    if (learning_rate <= 0.0) throw argument_error("OptimizerConfig: learning_rate <= 0");
    if (batch_size < 1) throw argument_error("OptimizerConfig: batch_size < 1");
}

double effective_lr(const OptimizerConfig& cfg, std::size_t t) {
    const double base = cfg.learning_rate;
    if (cfg.warmup_steps > 0 && t < cfg.warmup_steps)
        return base * static_cast<double>(t + 1) / static_cast<double>(cfg.warmup_steps);
    if (cfg.schedule == LrSchedule::constant) return base;
    const std::size_t decay_span = cfg.steps > cfg.warmup_steps ? cfg.steps - cfg.warmup_steps : 1;
    const double progress =
        static_cast<double>(t - cfg.warmup_steps) / static_cast<double>(decay_span);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainResult train(const Model& model, const Batch& dataset, const OptimizerConfig& config,
                  const TrainLogging& logging) {
    config.validate();
    if (dataset.size() == 0) throw argument_error("train: empty dataset");

    Model m = model;
    Rng rng(config.seed);

    std::optional<TrajectoryLog> log;
    if (logging.log_trajectory || logging.snapshot_stride > 0) {
        log.emplace();
        log->optimizer = config.kind;
        log->weight_decay = config.weight_decay;
        log->stride = 1;
    }

    const std::size_t num_layers = m.num_layers();
    std::vector<DenseMatrix> mw, vw;
    std::vector<std::vector<double>> mb, vb;
    if (config.kind == OptimizerKind::adamw) {
        for (std::size_t l = 0; l < num_layers; ++l) {
            mw.emplace_back(m.weight(l).rows(), m.weight(l).cols());
            vw.emplace_back(m.weight(l).rows(), m.weight(l).cols());
            mb.emplace_back(m.bias(l).size(), 0.0);
            vb.emplace_back(m.bias(l).size(), 0.0);
        }
    }

    auto snapshot = [&](std::size_t step, bool force = false) {
        if (logging.snapshot_stride == 0 || !logging.snapshot_probe) return;
        if (!force && step % logging.snapshot_stride != 0) return;
        ForwardTrace t = forward(m, logging.snapshot_probe->inputs);
        log->snapshots.push_back({step, std::move(t.layer_inputs)});
    };

    for (std::size_t t = 0; t < config.steps; ++t) {
        snapshot(t);

        std::vector<std::size_t> idx(config.batch_size);
        for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(dataset.size()));
        const Batch batch = dataset.subset(idx);

        const ForwardTrace ft = forward(m, batch.inputs);
        const BackwardTrace bt = backward(m, ft, batch.labels);
        const double eta = effective_lr(config, t);

        if (logging.log_trajectory) {
            TrajectoryStep rec;
            rec.step = t;
            rec.eta = eta;
            rec.output_grads = bt.output_grads;
            rec.inputs = ft.layer_inputs;
            log->steps.push_back(std::move(rec));
        }

        for (std::size_t l = 0; l < num_layers; ++l) {
            DenseMatrix& w = m.weight(l);
            auto& b = m.bias(l);
            if (config.kind == OptimizerKind::sgd) {
                for (std::size_t i = 0; i < w.size(); ++i)
                    w.values()[i] -= eta * (bt.weight_grads[l].values()[i] +
                                            config.weight_decay * w.values()[i]);
                for (std::size_t i = 0; i < b.size(); ++i)
                    b[i] -= eta * bt.bias_grads[l][i];
            } else {
                const double bc1 = 1.0 - std::pow(config.beta1, double(t + 1));
                const double bc2 = 1.0 - std::pow(config.beta2, double(t + 1));
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const double grad = bt.weight_grads[l].values()[i];
                    double& m1 = mw[l].values()[i];
                    double& m2 = vw[l].values()[i];
                    m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad;
                    m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad * grad;
                    w.values()[i] -= eta * ((m1 / bc1) / (std::sqrt(m2 / bc2) + config.eps) +
                                            config.weight_decay * w.values()[i]);
                }
                for (std::size_t i = 0; i < b.size(); ++i) {
                    const double grad = bt.bias_grads[l][i];
                    double& m1 = mb[l][i];
                    double& m2 = vb[l][i];
                    m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad;
                    m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad * grad;
                    b[i] -= eta * (m1 / bc1) / (std::sqrt(m2 / bc2) + config.eps);
                }
            }
        }
    }
    snapshot(config.steps, /*force=*/true);

    TrainResult out{std::move(m), std::move(log)};
    if (!logging.log_trajectory && logging.snapshot_stride == 0) out.log.reset();
    return out;
}

}  // namespace bico
