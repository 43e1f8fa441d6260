#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bico/calib.hpp"
#include "bico/rng.hpp"

using namespace bico;

namespace {

// n examples per class, classes interleaved, feature 0 encodes the label.
Batch labeled_batch(std::size_t num_classes, std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = num_classes * per_class;
    Batch b;
    b.inputs = DenseMatrix(n, 4);
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = i % num_classes;
        b.labels[i] = static_cast<std::int64_t>(cls);
        b.inputs(i, 0) = double(cls);
        for (std::size_t j = 1; j < 4; ++j) b.inputs(i, j) = rng.normal();
    }
    return b;
}

std::vector<std::size_t> class_counts(const Batch& b, std::size_t num_classes) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto l : b.labels) counts[std::size_t(l)]++;
    return counts;
}

ModelSpec feature_spec() {
    ModelSpec spec;
    spec.input = VectorInput{4};
    spec.layers = {
        {"block0", 4, 4, Nonlinearity::relu, true},
        {"head", 4, 4, Nonlinearity::identity, true},
    };
    spec.num_classes = 4;
    spec.depth = 1;
    return spec;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
    for (CalibStrategy s : {CalibStrategy::random, CalibStrategy::class_balanced,
                            CalibStrategy::centroid_near, CalibStrategy::centroid_far,
                            CalibStrategy::half_class, CalibStrategy::one_class}) {
        CHECK(calib_strategy_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(calib_strategy_from_string("bogus"), argument_error);
}

TEST_CASE("random strategy honors total budget") {
    const Batch data = labeled_batch(4, 16, 1);
    const CalibrationSet cs =
        select_calibration(data, CalibStrategy::random, CalibBudget::total(10), nullptr, 7);
    CHECK(cs.examples.size() == 10);
    // deterministic for a fixed seed
    const CalibrationSet cs2 =
        select_calibration(data, CalibStrategy::random, CalibBudget::total(10), nullptr, 7);
    CHECK(cs.examples.inputs == cs2.examples.inputs);
    CHECK(cs.examples.labels == cs2.examples.labels);
}

TEST_CASE("class_balanced splits a non-divisible total with remainder to low classes") {
    const Batch data = labeled_batch(4, 16, 2);
    const CalibrationSet cs = select_calibration(data, CalibStrategy::class_balanced,
                                                 CalibBudget::total(10), nullptr, 3);
    CHECK(cs.examples.size() == 10);
    const auto counts = class_counts(cs.examples, 4);
    CHECK(counts == std::vector<std::size_t>{3, 3, 2, 2});
}

TEST_CASE("class_balanced per-class budget") {
    const Batch data = labeled_batch(3, 8, 3);
    const CalibrationSet cs = select_calibration(data, CalibStrategy::class_balanced,
                                                 CalibBudget::per_class(5), nullptr, 3);
    CHECK(class_counts(cs.examples, 3) == std::vector<std::size_t>{5, 5, 5});
}

TEST_CASE("insufficient class examples fail with the class named") {
    Batch data = labeled_batch(3, 4, 4);
    // strip class 2 down to one example
    std::vector<std::size_t> keep;
    std::size_t seen2 = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] == 2 && seen2++ > 0) continue;
        keep.push_back(i);
    }
    data = data.subset(keep);
    try {
        select_calibration(data, CalibStrategy::class_balanced, CalibBudget::per_class(3),
                           nullptr, 0);
        FAIL("expected argument_error");
    } catch (const argument_error& e) {
        CHECK(std::string(e.what()).find("class 2") != std::string::npos);
    }
}

TEST_CASE("half_class uses the lower half of the label space") {
    const Batch data = labeled_batch(5, 8, 5);  // keep = ceil(5/2) = 3
    const CalibrationSet cs = select_calibration(data, CalibStrategy::half_class,
                                                 CalibBudget::total(12), nullptr, 9);
    CHECK(cs.examples.size() == 12);
    for (auto l : cs.examples.labels) CHECK(l < 3);
}

TEST_CASE("one_class draws only class 0") {
    const Batch data = labeled_batch(4, 8, 6);
    const CalibrationSet cs = select_calibration(data, CalibStrategy::one_class,
                                                 CalibBudget::total(6), nullptr, 2);
    CHECK(cs.examples.size() == 6);
    for (auto l : cs.examples.labels) CHECK(l == 0);
}

TEST_CASE("centroid strategies require a feature model") {
    const Batch data = labeled_batch(4, 8, 7);
    CHECK_THROWS_AS(select_calibration(data, CalibStrategy::centroid_near,
                                       CalibBudget::per_class(2), nullptr, 0),
                    argument_error);
}

TEST_CASE("centroid_near picks the most central example first") {
    // Features = inputs under an identity-ish model; plant one outlier per class.
    ModelSpec spec = feature_spec();
    Rng rng(8);
    const Model m = random_init(spec, rng);

    Batch data;
    data.inputs = DenseMatrix(8, 4);
    data.labels = {0, 0, 0, 0, 1, 1, 1, 1};
    for (std::size_t i = 0; i < 8; ++i) {
        data.inputs(i, 0) = (data.labels[i] == 0) ? 1.0 : -1.0;
        data.inputs(i, 1) = 0.1 * double(i % 4);
    }
    data.inputs(3, 1) = 50.0;  // class 0 outlier
    data.inputs(7, 1) = -50.0; // class 1 outlier

    const CalibrationSet near = select_calibration(data, CalibStrategy::centroid_near,
                                                   CalibBudget::per_class(3), &m, 0);
    for (std::size_t i = 0; i < near.examples.size(); ++i)
        CHECK(std::abs(near.examples.inputs(i, 1)) < 10.0);

    const CalibrationSet far = select_calibration(data, CalibStrategy::centroid_far,
                                                  CalibBudget::per_class(1), &m, 0);
    REQUIRE(far.examples.size() == 2);
    CHECK(std::abs(far.examples.inputs(0, 1)) == 50.0);
    CHECK(std::abs(far.examples.inputs(1, 1)) == 50.0);
}

TEST_CASE("zero budget and oversized budget are rejected") {
    const Batch data = labeled_batch(4, 4, 9);
    CHECK_THROWS_AS(select_calibration(data, CalibStrategy::random, CalibBudget::total(0),
                                       nullptr, 0),
                    argument_error);
    CHECK_THROWS_AS(select_calibration(data, CalibStrategy::random, CalibBudget::total(17),
                                       nullptr, 0),
                    argument_error);
}

TEST_CASE("collect captures per-layer x, g and gx without touching the model") {
    const ModelSpec spec = feature_spec();
    Rng rng(10);
    const Model m = random_init(spec, rng);
    const Model before = m;
    const Batch data = labeled_batch(4, 8, 11);
    const CalibrationSet cs = select_calibration(data, CalibStrategy::class_balanced,
                                                 CalibBudget::per_class(4), nullptr, 1);
    const CalibrationCapture cap = collect(m, cs, true);
    CHECK(m == before);
    CHECK(cap.batch_size == 16);
    CHECK(cap.tokens_per_example == 1);
    CHECK(cap.token_count() == 16);
    REQUIRE(cap.x.size() == 2);
    REQUIRE(cap.g.size() == 2);
    REQUIRE(cap.gx.size() == 2);
    CHECK(cap.x[0].rows() == 16);
    CHECK(cap.x[0].cols() == 4);

    const CalibrationCapture no_gx = collect(m, cs, false);
    CHECK(no_gx.gx.empty());
}

TEST_CASE("captured G^T X equals the weight gradient") {
    const ModelSpec spec = feature_spec();
    Rng rng(12);
    const Model m = random_init(spec, rng);
    const Batch data = labeled_batch(4, 8, 13);
    const CalibrationSet cs = select_calibration(data, CalibStrategy::random,
                                                 CalibBudget::total(16), nullptr, 5);
    const CalibrationCapture cap = collect(m, cs);
    const ForwardTrace t = forward(m, cs.examples.inputs);
    const BackwardTrace bt = backward(m, t, cs.examples.labels);
    for (std::size_t l = 0; l < 2; ++l) {
        const DenseMatrix gtx = matmul_at_b(cap.g[l], cap.x[l]);
        const DenseMatrix diff = gtx - bt.weight_grads[l];
        CHECK(diff.max_abs() < 1e-10);
    }
}

TEST_CASE("interpolation is exact on affine token sequences") {
    // rows are affine in the token index: interpolation must reproduce the
    // affine map at the resampled positions exactly (up to roundoff).
    const std::size_t L_src = 5, L_tgt = 9, d = 3;
    DenseMatrix x(L_src, d);
    for (std::size_t t = 0; t < L_src; ++t)
        for (std::size_t j = 0; j < d; ++j)
            x(t, j) = 2.0 * double(t) + 0.5 * double(j);
    const DenseMatrix y = interpolate_sequence(x, 1, L_src, L_tgt);
    REQUIRE(y.rows() == L_tgt);
    for (std::size_t t = 0; t < L_tgt; ++t) {
        const double pos = double(t) * double(L_src - 1) / double(L_tgt - 1);
        for (std::size_t j = 0; j < d; ++j)
            CHECK(y(t, j) == doctest::Approx(2.0 * pos + 0.5 * double(j)).epsilon(1e-12));
    }
}

TEST_CASE("interpolation endpoints align exactly") {
    Rng rng(14);
    const std::size_t N = 3, L_src = 7, L_tgt = 4, d = 5;
    const DenseMatrix x = random_normal_matrix(N * L_src, d, rng);
    const DenseMatrix y = interpolate_sequence(x, N, L_src, L_tgt);
    REQUIRE(y.rows() == N * L_tgt);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t j = 0; j < d; ++j) {
            CHECK(y(n * L_tgt, j) == x(n * L_src, j));
            CHECK(y(n * L_tgt + L_tgt - 1, j) == x(n * L_src + L_src - 1, j));
        }
}

TEST_CASE("interpolation to the same length is the identity") {
    Rng rng(15);
    const DenseMatrix x = random_normal_matrix(12, 4, rng);
    const DenseMatrix y = interpolate_sequence(x, 3, 4, 4);
    CHECK(y == x);
}

TEST_CASE("interpolate_capture resamples every matrix") {
    const std::size_t N = 2, L_src = 6, L_tgt = 3;
    CalibrationCapture cap;
    cap.batch_size = N;
    cap.tokens_per_example = L_src;
    Rng rng(16);
    cap.x = {random_normal_matrix(N * L_src, 4, rng)};
    cap.g = {random_normal_matrix(N * L_src, 2, rng)};
    cap.gx = {random_normal_matrix(N * L_src, 4, rng)};
    const CalibrationCapture out = interpolate_capture(cap, L_tgt);
    CHECK(out.tokens_per_example == L_tgt);
    CHECK(out.batch_size == N);
    CHECK(out.x[0].rows() == N * L_tgt);
    CHECK(out.g[0].rows() == N * L_tgt);
    CHECK(out.gx[0].rows() == N * L_tgt);
    CHECK(out.token_count() == N * L_tgt);
}
