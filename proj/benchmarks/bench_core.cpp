// Microbenchmarks for the hot paths: dense matmul, Jacobi SVD, Procrustes,
// forward/backward, and the full alignment pipeline at desk scale.

#include <benchmark/benchmark.h>

#include "bico/align.hpp"
#include "bico/calib.hpp"
#include "bico/model.hpp"
#include "bico/rng.hpp"
#include "bico/train.hpp"

using namespace bico;

namespace {

ModelSpec mlp_spec(std::size_t d_in, const std::vector<std::size_t>& hidden,
                   std::size_t classes) {
    ModelSpec spec;
    spec.input = VectorInput{d_in};
    std::size_t prev = d_in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        spec.layers.push_back(
            {"block" + std::to_string(i), prev, hidden[i], Nonlinearity::relu, true});
        prev = hidden[i];
    }
    spec.layers.push_back({"head", prev, classes, Nonlinearity::identity, true});
    spec.num_classes = classes;
    spec.depth = hidden.size();
    return spec;
}

Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes,
                   std::uint64_t seed) {
    Rng rng(seed);
    Batch b;
    b.inputs = random_normal_matrix(n, dim, rng);
    b.labels.resize(n);
    for (auto& l : b.labels) l = static_cast<std::int64_t>(rng.uniform_index(classes));
    return b;
}

void bm_matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const DenseMatrix a = random_normal_matrix(n, n, rng);
    const DenseMatrix b = random_normal_matrix(n, n, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void bm_svd(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const DenseMatrix a = random_normal_matrix(n, n, rng);
    for (auto _ : state) benchmark::DoNotOptimize(svd(a));
}
BENCHMARK(bm_svd)->Arg(16)->Arg(32)->Arg(64)->Arg(128);

void bm_procrustes(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const DenseMatrix src = random_normal_matrix(256, d, rng);
    const DenseMatrix q = random_orthogonal(d, rng);
    const DenseMatrix tgt = matmul(src, q);
    for (auto _ : state) benchmark::DoNotOptimize(procrustes(src, tgt));
}
BENCHMARK(bm_procrustes)->Arg(16)->Arg(64)->Arg(128);

void bm_forward(benchmark::State& state) {
    const ModelSpec spec = mlp_spec(64, {128, 128, 128}, 10);
    Rng rng(4);
    const Model m = random_init(spec, rng);
    const Batch b = random_batch(256, 64, 10, 5);
    for (auto _ : state) benchmark::DoNotOptimize(forward(m, b.inputs));
}
BENCHMARK(bm_forward);

void bm_backward(benchmark::State& state) {
    const ModelSpec spec = mlp_spec(64, {128, 128, 128}, 10);
    Rng rng(6);
    const Model m = random_init(spec, rng);
    const Batch b = random_batch(256, 64, 10, 7);
    for (auto _ : state) {
        const ForwardTrace trace = forward(m, b.inputs);
        benchmark::DoNotOptimize(backward(m, trace, b.labels));
    }
}
BENCHMARK(bm_backward);

void bm_pipeline(benchmark::State& state) {
    const ModelSpec spec_a = mlp_spec(64, {96, 96}, 10);
    const ModelSpec spec_b = mlp_spec(64, {128, 128}, 10);
    Rng rng(8);
    const Model a_pre = random_init(spec_a, rng);
    const Model b_pre = random_init(spec_b, rng);
    const Batch data = random_batch(512, 64, 10, 9);

    OptimizerConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.steps = 50;
    cfg.batch_size = 32;
    cfg.seed = 10;
    const Model a_ft = train(a_pre, data, cfg).model;

    CalibrationSet calib;
    calib.examples = random_batch(128, 64, 10, 11);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            bico_pipeline(a_pre, a_ft, b_pre, calib, TransferVariant::bico));
}
BENCHMARK(bm_pipeline);

}  // namespace

BENCHMARK_MAIN();
