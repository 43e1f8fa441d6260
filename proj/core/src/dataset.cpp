#include "bico/dataset.hpp"

#include <cmath>
#include <numbers>

#include "bico/rng.hpp"

namespace bico {

void TaskSuiteConfig::validate() const {
    if (num_classes < 2) throw argument_error("TaskSuiteConfig: num_classes < 2");
    if (kind == Kind::vector && feature_dim < 1)
        throw argument_error("TaskSuiteConfig: feature_dim < 1");
    if (kind == Kind::image && image_size < 2)
        throw argument_error("TaskSuiteConfig: image_size < 2");
    if (noise < 0.0) throw argument_error("TaskSuiteConfig: negative noise");
}

namespace {

// Class prototypes for one distribution: per-class mean vectors (vector
// tasks) or (frequency, orientation, phase) triples (image tasks). A split
// shift moves prototypes away from the shared base by `shift`.
struct VectorPrototypes {
    std::vector<std::vector<double>> means;
};

VectorPrototypes make_vector_prototypes(const TaskSuiteConfig& cfg, Rng base,
                                        Rng shift_rng, double shift) {
    VectorPrototypes p;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        std::vector<double> mu(cfg.feature_dim);
        double norm = 0.0;
        for (double& v : mu) {
            v = base.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : mu) v = v / norm * cfg.mean_scale;
        for (double& v : mu) v += shift * shift_rng.normal() / std::sqrt(double(cfg.feature_dim));
        p.means.push_back(std::move(mu));
    }
    return p;
}

Batch sample_vector_split(const TaskSuiteConfig& cfg, const VectorPrototypes& proto,
                          std::size_t n, Rng& rng) {
    Batch b;
    b.inputs = DenseMatrix(n, cfg.feature_dim);
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = static_cast<std::size_t>(rng.uniform_index(cfg.num_classes));
        b.labels[i] = static_cast<std::int64_t>(c);
        for (std::size_t j = 0; j < cfg.feature_dim; ++j)
            b.inputs(i, j) = proto.means[c][j] + cfg.noise * rng.normal();
    }
    return b;
}

struct ImagePrototypes {
    std::vector<double> freq, theta, phase;
};

ImagePrototypes make_image_prototypes(const TaskSuiteConfig& cfg, Rng base,
                                      Rng shift_rng, double shift) {
    ImagePrototypes p;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        // spread orientations/frequencies across classes, then jitter by shift
        const double frac = double(c) / double(cfg.num_classes);
        p.freq.push_back(1.5 + 3.0 * frac + 0.3 * base.normal() + 0.4 * shift * shift_rng.normal());
        p.theta.push_back(std::numbers::pi * frac + 0.1 * base.normal() +
                          0.25 * shift * shift_rng.normal());
        p.phase.push_back(2.0 * std::numbers::pi * base.uniform() +
                          shift * shift_rng.normal());
    }
    return p;
}

Batch sample_image_split(const TaskSuiteConfig& cfg, const ImagePrototypes& proto,
                         std::size_t n, Rng& rng) {
    const std::size_t s = cfg.image_size;
    Batch b;
    b.inputs = DenseMatrix(n, s * s);
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = static_cast<std::size_t>(rng.uniform_index(cfg.num_classes));
        b.labels[i] = static_cast<std::int64_t>(c);
        const double ct = std::cos(proto.theta[c]), st = std::sin(proto.theta[c]);
        for (std::size_t r = 0; r < s; ++r) {
            for (std::size_t q = 0; q < s; ++q) {
                const double u = (double(r) * ct + double(q) * st) / double(s);
                const double v = std::sin(2.0 * std::numbers::pi * proto.freq[c] * u +
                                          proto.phase[c]);
                b.inputs(i, r * s + q) = cfg.mean_scale * v + cfg.noise * rng.normal();
            }
        }
    }
    return b;
}

}  // namespace

TaskSuite generate_task_suite(const TaskSuiteConfig& config, std::uint64_t seed) {
    config.validate();
    Rng master(seed);
    const Rng base = master.fork(1);

    TaskSuite suite;
    suite.num_classes = config.num_classes;
    suite.seed = seed;

    auto make_split = [&](std::uint64_t tag, double shift, std::size_t n) {
        Rng shift_rng = master.fork(100 + tag);
        Rng sample_rng = master.fork(200 + tag);
        if (config.kind == TaskSuiteConfig::Kind::vector) {
            const auto proto = make_vector_prototypes(config, base, shift_rng, shift);
            return sample_vector_split(config, proto, n, sample_rng);
        }
        const auto proto = make_image_prototypes(config, base, shift_rng, shift);
        return sample_image_split(config, proto, n, sample_rng);
    };

    suite.pretrain_a = make_split(0, config.pretrain_shift, config.pretrain_size);
    suite.pretrain_b = make_split(1, config.pretrain_shift, config.pretrain_size);
    // downstream train and test share prototypes (tag 2) but not sample noise
    Rng down_shift = master.fork(102);
    Rng train_rng = master.fork(202);
    Rng test_rng = master.fork(203);
    if (config.kind == TaskSuiteConfig::Kind::vector) {
        const auto proto = make_vector_prototypes(config, base, down_shift,
                                                  config.downstream_shift);
        suite.downstream_train =
            sample_vector_split(config, proto, config.downstream_train_size, train_rng);
        suite.downstream_test =
            sample_vector_split(config, proto, config.downstream_test_size, test_rng);
    } else {
        const auto proto = make_image_prototypes(config, base, down_shift,
                                                 config.downstream_shift);
        suite.downstream_train =
            sample_image_split(config, proto, config.downstream_train_size, train_rng);
        suite.downstream_test =
            sample_image_split(config, proto, config.downstream_test_size, test_rng);
    }
    return suite;
}

}  // namespace bico
