#include "bico/calib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bico/rng.hpp"

namespace bico {

std::string to_string(CalibStrategy s) {
    switch (s) {
        case CalibStrategy::random: return "random";
        case CalibStrategy::class_balanced: return "class_balanced";
        case CalibStrategy::centroid_near: return "centroid_near";
        case CalibStrategy::centroid_far: return "centroid_far";
        case CalibStrategy::half_class: return "half_class";
        case CalibStrategy::one_class: return "one_class";
    }
    return "random";
}

CalibStrategy calib_strategy_from_string(const std::string& s) {
    if (s == "random") return CalibStrategy::random;
    if (s == "class_balanced") return CalibStrategy::class_balanced;
    if (s == "centroid_near") return CalibStrategy::centroid_near;
    if (s == "centroid_far") return CalibStrategy::centroid_far;
    if (s == "half_class") return CalibStrategy::half_class;
    if (s == "one_class") return CalibStrategy::one_class;
    throw argument_error("unknown calibration strategy: " + s);
}

namespace {

std::size_t num_classes_of(const Batch& data) {
    std::int64_t mx = 0;
    for (auto y : data.labels) mx = std::max(mx, y);
    return static_cast<std::size_t>(mx) + 1;
}

std::vector<std::vector<std::size_t>> indices_by_class(const Batch& data, std::size_t C) {
    std::vector<std::vector<std::size_t>> by_class(C);
    for (std::size_t i = 0; i < data.labels.size(); ++i)
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    return by_class;
}

// Per-class quotas for a total budget N over C classes: as even as possible,
// remainder to the lowest class indices.
std::vector<std::size_t> class_quotas(std::size_t n, std::size_t C) {
    std::vector<std::size_t> q(C, n / C);
    for (std::size_t c = 0; c < n % C; ++c) ++q[c];
    return q;
}

// Per-example feature rows: input activations to the final block (the head),
// token-averaged for sequence models.
DenseMatrix head_input_features(const Model& model, const Batch& data) {
    const ForwardTrace t = forward(model, data.inputs);
    const DenseMatrix& x = t.layer_inputs.back();
    const std::size_t L = t.tokens_per_example, N = t.batch_size;
    if (L == 1) return x;
    DenseMatrix f(N, x.cols());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t tok = 0; tok < L; ++tok)
            for (std::size_t c = 0; c < x.cols(); ++c)
                f(n, c) += x(n * L + tok, c) / static_cast<double>(L);
    return f;
}

}  // namespace

CalibrationSet select_calibration(const Batch& dataset, CalibStrategy strategy,
                                  CalibBudget budget, const Model* feature_model,
                                  std::uint64_t seed) {
    if (dataset.size() == 0) throw argument_error("select_calibration: empty dataset");
    if (budget.value == 0) throw argument_error("select_calibration: zero budget");
    const std::size_t C = num_classes_of(dataset);
    const auto by_class = indices_by_class(dataset, C);
    Rng rng(seed);

    auto require_available = [&](std::size_t cls, std::size_t want) {
        if (want > by_class[cls].size())
            throw argument_error("select_calibration: class " + std::to_string(cls) +
                                 " has " + std::to_string(by_class[cls].size()) +
                                 " examples, need " + std::to_string(want));
    };

    std::vector<std::size_t> chosen;
    switch (strategy) {
        case CalibStrategy::random: {
            const std::size_t n =
                budget.kind == CalibBudget::Kind::total ? budget.value : budget.value * C;
            if (n > dataset.size())
                throw argument_error("select_calibration: budget " + std::to_string(n) +
                                     " exceeds dataset size " +
                                     std::to_string(dataset.size()));
            const auto perm = rng.permutation(dataset.size());
            chosen.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
            break;
        }
        case CalibStrategy::class_balanced:
        case CalibStrategy::centroid_near:
        case CalibStrategy::centroid_far: {
            std::vector<std::size_t> quota =
                budget.kind == CalibBudget::Kind::total
                    ? class_quotas(budget.value, C)
                    : std::vector<std::size_t>(C, budget.value);
            for (std::size_t c = 0; c < C; ++c) require_available(c, quota[c]);

            if (strategy == CalibStrategy::class_balanced) {
                for (std::size_t c = 0; c < C; ++c) {
                    auto pool = by_class[c];
                    const auto perm = rng.permutation(pool.size());
                    for (std::size_t i = 0; i < quota[c]; ++i) chosen.push_back(pool[perm[i]]);
                }
            } else {
                if (!feature_model)
                    throw argument_error(
                        "select_calibration: centroid strategies require a feature model");
                const DenseMatrix feats = head_input_features(*feature_model, dataset);
                for (std::size_t c = 0; c < C; ++c) {
                    std::vector<double> centroid(feats.cols(), 0.0);
                    for (std::size_t i : by_class[c])
                        for (std::size_t j = 0; j < feats.cols(); ++j)
                            centroid[j] += feats(i, j) / double(by_class[c].size());
                    std::vector<std::pair<double, std::size_t>> dist;
                    for (std::size_t i : by_class[c]) {
                        double d2 = 0.0;
                        for (std::size_t j = 0; j < feats.cols(); ++j) {
                            const double d = feats(i, j) - centroid[j];
                            d2 += d * d;
                        }
                        dist.emplace_back(d2, i);
                    }
                    std::stable_sort(dist.begin(), dist.end());
                    if (strategy == CalibStrategy::centroid_far)
                        std::reverse(dist.begin(), dist.end());
                    for (std::size_t i = 0; i < quota[c]; ++i) chosen.push_back(dist[i].second);
                }
            }
            break;
        }
        case CalibStrategy::half_class:
        case CalibStrategy::one_class: {
            const std::size_t keep =
                strategy == CalibStrategy::one_class ? 1 : (C + 1) / 2;
            std::vector<std::size_t> pool;
            for (std::size_t c = 0; c < keep; ++c)
                pool.insert(pool.end(), by_class[c].begin(), by_class[c].end());
            const std::size_t n =
                budget.kind == CalibBudget::Kind::total ? budget.value : budget.value * keep;
            if (n > pool.size())
                throw argument_error("select_calibration: class 0.." + std::to_string(keep - 1) +
                                     " pool has " + std::to_string(pool.size()) +
                                     " examples, need " + std::to_string(n));
            const auto perm = rng.permutation(pool.size());
            for (std::size_t i = 0; i < n; ++i) chosen.push_back(pool[perm[i]]);
            break;
        }
    }

    CalibrationSet out;
    out.examples = dataset.subset(chosen);
    out.strategy = strategy;
    out.budget = budget;
    return out;
}

CalibrationCapture collect(const Model& model, const CalibrationSet& calib,
                           bool capture_input_grads) {
    const ForwardTrace ft = forward(model, calib.examples.inputs);
    const BackwardTrace bt = backward(model, ft, calib.examples.labels);

    CalibrationCapture cap;
    cap.batch_size = ft.batch_size;
    cap.tokens_per_example = ft.tokens_per_example;
    cap.x = ft.layer_inputs;
    cap.g = bt.output_grads;
    if (capture_input_grads) cap.gx = bt.input_grads;
    return cap;
}

DenseMatrix interpolate_sequence(const DenseMatrix& x, std::size_t batch_size,
                                 std::size_t source_len, std::size_t target_len) {
    if (source_len < 1 || target_len < 1)
        throw argument_error("interpolate_sequence: zero sequence length");
    if (x.rows() != batch_size * source_len)
        throw shape_error("interpolate_sequence: " + shape_string(x) + " is not " +
                          std::to_string(batch_size) + "x" + std::to_string(source_len) +
                          " tokens");
    if (source_len == target_len) return x;

    const std::size_t d = x.cols();
    DenseMatrix out(batch_size * target_len, d);
    for (std::size_t n = 0; n < batch_size; ++n) {
        for (std::size_t j = 0; j < target_len; ++j) {
            double pos = 0.0;
            if (target_len > 1)
                pos = static_cast<double>(j) * static_cast<double>(source_len - 1) /
                      static_cast<double>(target_len - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, source_len - 1);
            const double w = pos - static_cast<double>(lo);
            for (std::size_t c = 0; c < d; ++c)
                out(n * target_len + j, c) = (1.0 - w) * x(n * source_len + lo, c) +
                                             w * x(n * source_len + hi, c);
        }
    }
    return out;
}

CalibrationCapture interpolate_capture(const CalibrationCapture& capture,
                                       std::size_t target_len) {
    if (capture.tokens_per_example == target_len) return capture;
    CalibrationCapture out;
    out.batch_size = capture.batch_size;
    out.tokens_per_example = target_len;
    for (const auto& m : capture.x)
        out.x.push_back(interpolate_sequence(m, capture.batch_size,
                                             capture.tokens_per_example, target_len));
    for (const auto& m : capture.g)
        out.g.push_back(interpolate_sequence(m, capture.batch_size,
                                             capture.tokens_per_example, target_len));
    for (const auto& m : capture.gx)
        out.gx.push_back(interpolate_sequence(m, capture.batch_size,
                                              capture.tokens_per_example, target_len));
    return out;
}

}  // namespace bico
