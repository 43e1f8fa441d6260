// Acceptance gate: nine criteria, one pass/fail line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bico/align.hpp"
#include "bico/calib.hpp"
#include "bico/dataset.hpp"
#include "bico/diag.hpp"
#include "bico/rng.hpp"
#include "bico/taskvec.hpp"
#include "bico/train.hpp"

using namespace bico;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %d. %s — %s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    if (!ok) ++g_failures;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

double semi_orthogonality_defect(const DenseMatrix& r) {
    const DenseMatrix gram = r.rows() <= r.cols() ? matmul_a_bt(r, r) : matmul_at_b(r, r);
    return max_abs_diff(gram, DenseMatrix::identity(gram.rows()));
}

ModelSpec mlp_spec(std::size_t d_in, const std::vector<std::size_t>& hidden,
                   std::size_t classes, Nonlinearity nl) {
    ModelSpec spec;
    spec.input = VectorInput{d_in};
    std::size_t prev = d_in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        spec.layers.push_back({"block" + std::to_string(i), prev, hidden[i], nl, true});
        prev = hidden[i];
    }
    spec.layers.push_back({"head", prev, classes, Nonlinearity::identity, true});
    spec.num_classes = classes;
    spec.depth = hidden.size();
    return spec;
}

Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    Batch b;
    b.inputs = random_normal_matrix(n, dim, rng);
    b.labels.resize(n);
    for (auto& l : b.labels) l = static_cast<std::int64_t>(rng.uniform_index(classes));
    return b;
}

// Conjugate every hidden coordinate system with the given square maps
// (permutations or rotations); the head keeps its output basis.
Model conjugate_hidden(const Model& m, const std::vector<DenseMatrix>& maps) {
    const std::size_t depth = m.spec().depth;
    std::vector<DenseMatrix> w;
    std::vector<std::vector<double>> b;
    for (std::size_t l = 0; l < depth; ++l) {
        const DenseMatrix left = matmul_at_b(maps[l], m.weight(l));
        w.push_back(l == 0 ? left : matmul(left, maps[l - 1]));
        std::vector<double> nb(m.bias(l).size(), 0.0);
        for (std::size_t j = 0; j < nb.size(); ++j)
            for (std::size_t i = 0; i < nb.size(); ++i)
                nb[j] += m.bias(l)[i] * maps[l](i, j);
        b.push_back(std::move(nb));
    }
    w.push_back(depth == 0 ? m.weight(depth) : matmul(m.weight(depth), maps[depth - 1]));
    b.push_back(m.bias(depth));
    return Model(m.spec(), std::move(w), std::move(b));
}

// ---------------------------------------------------------------- criteria

void criterion_1_reconstruction() {
    const auto start = std::chrono::steady_clock::now();
    const ModelSpec spec = mlp_spec(16, {32, 24}, 4, Nonlinearity::relu);  // 3 linear layers
    Rng rng(101);
    const Model pre = random_init(spec, rng);
    const Batch data = random_batch(512, 16, 4, 102);

    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.learning_rate = 0.02;
    cfg.steps = 200;
    cfg.batch_size = 32;
    cfg.weight_decay = 0.0;
    cfg.seed = 103;
    TrainLogging logging;
    logging.log_trajectory = true;

    const TrainResult r = train(pre, data, cfg, logging);
    const TaskVector direct = extract(pre, r.model);
    const TaskVector rebuilt = reconstruct_from_trajectory(*r.log, spec);

    double worst = 0.0;
    for (std::size_t l = 0; l < direct.delta_w.size(); ++l) {
        const DenseMatrix diff = rebuilt.delta_w[l] - direct.delta_w[l];
        worst = std::max(worst, diff.frobenius_norm() / direct.delta_w[l].frobenius_norm());
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start).count();
    report(1, "trajectory reconstruction identity", worst <= 1e-8 && secs < 30.0,
           "max per-layer rel Frobenius " + fmt(worst) + ", " + fmt(secs) + " s");
}

void criterion_2_permutation_oracle() {
    const auto start = std::chrono::steady_clock::now();
    const ModelSpec spec = mlp_spec(16, {32, 32, 24}, 4, Nonlinearity::relu);
    Rng rng(201);
    const Model a_pre = random_init(spec, rng);
    const Batch data = random_batch(512, 16, 4, 202);
    const Batch held_out = random_batch(256, 16, 4, 203);

    OptimizerConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.steps = 150;
    cfg.batch_size = 32;
    cfg.seed = 204;
    const Model a_ft = train(a_pre, data, cfg).model;

    std::vector<DenseMatrix> perms;
    for (std::size_t l = 0; l < spec.depth; ++l)
        perms.push_back(random_permutation_matrix(spec.layers[l].d_out, rng));
    const Model b_pre = conjugate_hidden(a_pre, perms);
    const Model b_ft_expected = conjugate_hidden(a_ft, perms);

    CalibrationSet calib;
    calib.examples = random_batch(4 * 32 + 16, 16, 4, 205);  // M >= 4 * max(d)
    const PipelineResult r = bico_pipeline(a_pre, a_ft, b_pre, calib, TransferVariant::bico);

    double map_err = 0.0;
    for (std::size_t l = 0; l < spec.depth; ++l) {
        map_err = std::max(map_err, max_abs_diff(r.maps.maps[l].r_out, perms[l]));
        if (l > 0) map_err = std::max(map_err, max_abs_diff(r.maps.maps[l].r_in, perms[l - 1]));
    }
    map_err = std::max(map_err,
                       max_abs_diff(r.maps.maps[spec.depth].r_in, perms[spec.depth - 1]));

    const DenseMatrix logits_transfer = forward(r.model, held_out.inputs).logits;
    const DenseMatrix logits_expected = forward(b_ft_expected, held_out.inputs).logits;
    const double logit_err = max_abs_diff(logits_transfer, logits_expected);
    const bool acc_equal =
        accuracy(r.model, held_out) == accuracy(a_ft, held_out);
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start).count();
    report(2, "permutation oracle (exact transfer)",
           map_err <= 1e-8 && logit_err <= 1e-6 && acc_equal && secs < 60.0,
           "map err " + fmt(map_err) + ", logit err " + fmt(logit_err) +
               ", accuracy equal " + (acc_equal ? "yes" : "no"));
}

void criterion_3_rotation_oracle() {
    // In a linear net the activations have rank <= d_in + 1 and the
    // output-side gradients have rank <= min(num_classes - 1, downstream
    // widths), so the rotations are identifiable only when every hidden
    // width fits under both caps. 16 -> 8 -> 8 -> 10 satisfies them all.
    const ModelSpec spec = mlp_spec(16, {8, 8}, 10, Nonlinearity::identity);
    Rng rng(301);
    const Model a_pre = random_init(spec, rng);
    const Batch data = random_batch(512, 16, 10, 302);
    const Batch held_out = random_batch(256, 16, 10, 303);

    OptimizerConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.steps = 150;
    cfg.batch_size = 32;
    cfg.seed = 304;
    const Model a_ft = train(a_pre, data, cfg).model;

    std::vector<DenseMatrix> rots;
    for (std::size_t l = 0; l < spec.depth; ++l)
        rots.push_back(random_orthogonal(spec.layers[l].d_out, rng));
    const Model b_pre = conjugate_hidden(a_pre, rots);
    const Model b_ft_expected = conjugate_hidden(a_ft, rots);

    CalibrationSet calib;
    calib.examples = random_batch(160, 16, 10, 305);
    const PipelineResult r = bico_pipeline(a_pre, a_ft, b_pre, calib, TransferVariant::bico);

    double map_err = 0.0;
    for (std::size_t l = 0; l < spec.depth; ++l) {
        map_err = std::max(map_err, max_abs_diff(r.maps.maps[l].r_out, rots[l]));
        if (l > 0)
            map_err = std::max(map_err, max_abs_diff(r.maps.maps[l].r_in, rots[l - 1]));
    }
    map_err = std::max(map_err,
                       max_abs_diff(r.maps.maps[spec.depth].r_in, rots[spec.depth - 1]));
    const double logit_err = max_abs_diff(forward(r.model, held_out.inputs).logits,
                                          forward(b_ft_expected, held_out.inputs).logits);
    report(3, "rotation oracle (linear networks)", map_err <= 1e-8 && logit_err <= 1e-6,
           "rotation err " + fmt(map_err) + ", logit err " + fmt(logit_err));
}

void criterion_4_geometry() {
    Rng rng(401);
    // random expansion maps preserve norms and inner products of row pairs
    double worst_norm = 0.0, worst_dot = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d_a = 8 + rng.uniform_index(25);
        const std::size_t d_b = d_a + 1 + rng.uniform_index(24);
        const DenseMatrix q = random_orthogonal(d_b, rng);
        DenseMatrix r(d_a, d_b);
        for (std::size_t i = 0; i < d_a; ++i)
            for (std::size_t j = 0; j < d_b; ++j) r(i, j) = q(i, j);
        const DenseMatrix rows = random_normal_matrix(200, d_a, rng);
        const DenseMatrix mapped = matmul(rows, r);
        for (int pair = 0; pair < 100; ++pair) {
            const std::size_t i = rng.uniform_index(200), j = rng.uniform_index(200);
            double ni = 0.0, mi = 0.0, dij = 0.0, mdij = 0.0;
            for (std::size_t c = 0; c < d_a; ++c) {
                ni += rows(i, c) * rows(i, c);
                dij += rows(i, c) * rows(j, c);
            }
            for (std::size_t c = 0; c < d_b; ++c) {
                mi += mapped(i, c) * mapped(i, c);
                mdij += mapped(i, c) * mapped(j, c);
            }
            worst_norm = std::max(worst_norm, std::abs(std::sqrt(mi) - std::sqrt(ni)));
            worst_dot = std::max(worst_dot, std::abs(mdij - dij));
        }
    }

    // per-layer Frobenius norm of the moved task vector under expansion
    const ModelSpec src = mlp_spec(12, {16, 16}, 4, Nonlinearity::relu);
    const ModelSpec tgt = mlp_spec(20, {28, 28}, 4, Nonlinearity::relu);
    Rng mrng(402);
    const Model a_pre = random_init(src, mrng);
    const Model b_pre = random_init(tgt, mrng);
    const Batch data = random_batch(256, 12, 4, 403);
    OptimizerConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.steps = 60;
    cfg.batch_size = 16;
    const Model a_ft = train(a_pre, data, cfg).model;
    CalibrationSet ca, cb;
    ca.examples = random_batch(128, 12, 4, 404);
    cb.examples = random_batch(128, 20, 4, 404);
    const AlignmentMaps maps = estimate_maps(collect(a_pre, ca), collect(b_pre, cb),
                                             depth_match(src.depth, tgt.depth),
                                             TransferVariant::bico);
    const TaskVector tau = extract(a_pre, a_ft);
    const TaskVector moved = transfer(tau, maps, tgt, TransferVariant::bico);
    double worst_fro = 0.0;
    for (const auto& map : maps.maps) {
        const double a = tau.delta_w[map.source_layer].frobenius_norm();
        const double b = moved.delta_w[map.target_layer].frobenius_norm();
        worst_fro = std::max(worst_fro, std::abs(a - b));
    }
    report(4, "geometry preservation under expansion maps",
           worst_norm <= 1e-9 && worst_dot <= 1e-9 && worst_fro <= 1e-8,
           "norm err " + fmt(worst_norm) + ", dot err " + fmt(worst_dot) +
               ", tau Frobenius err " + fmt(worst_fro));
}

struct PretrainedPair {
    Model a_pre, a_ft, b_pre;
    TaskSuite suite;
};

PretrainedPair make_pair(const ModelSpec& src, const ModelSpec& tgt,
                         const TaskSuiteConfig& suite_cfg, std::uint64_t seed,
                         std::size_t pretrain_steps, std::size_t finetune_steps) {
    PretrainedPair p;
    p.suite = generate_task_suite(suite_cfg, seed);
    Rng master(seed);
    Rng a_rng = master.fork(1), b_rng = master.fork(2);
    const Model a_init = random_init(src, a_rng);
    const Model b_init = random_init(tgt, b_rng);

    OptimizerConfig pre_cfg;
    pre_cfg.learning_rate = 0.05;
    pre_cfg.steps = pretrain_steps;
    pre_cfg.batch_size = 32;
    pre_cfg.seed = master.fork(11).next_u64();
    p.a_pre = train(a_init, p.suite.pretrain_a, pre_cfg).model;
    pre_cfg.seed = master.fork(12).next_u64();
    p.b_pre = train(b_init, p.suite.pretrain_b, pre_cfg).model;

    OptimizerConfig ft_cfg;
    ft_cfg.learning_rate = 0.05;
    ft_cfg.steps = finetune_steps;
    ft_cfg.batch_size = 32;
    ft_cfg.seed = master.fork(13).next_u64();
    p.a_ft = train(p.a_pre, p.suite.downstream_train, ft_cfg).model;
    return p;
}

void criterion_5_cka_cosine() {
    const ModelSpec src = mlp_spec(16, {32, 32}, 4, Nonlinearity::relu);
    const ModelSpec tgt = mlp_spec(16, {48, 48}, 4, Nonlinearity::relu);
    TaskSuiteConfig suite_cfg;
    suite_cfg.feature_dim = 16;
    suite_cfg.pretrain_size = 512;
    suite_cfg.downstream_train_size = 256;
    suite_cfg.downstream_test_size = 256;

    double worst_cka = 0.0, gain_total = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const PretrainedPair p = make_pair(src, tgt, suite_cfg, seed, 300, 0);
        const CalibrationSet calib = select_calibration(
            p.suite.downstream_train, CalibStrategy::random, CalibBudget::total(96),
            nullptr, seed);
        const CalibrationCapture cap_a = collect(p.a_pre, calib);
        const CalibrationCapture cap_b = collect(p.b_pre, calib);
        const AlignmentMaps maps = estimate_maps(cap_a, cap_b, depth_match(2, 2),
                                                 TransferVariant::bico);
        for (const auto& map : maps.maps) {
            if (map.r_in.rows() == map.r_in.cols()) continue;  // hidden pairs only
            const DenseMatrix& xa = cap_a.x[map.source_layer];
            const DenseMatrix& xb = cap_b.x[map.target_layer];
            const DenseMatrix aligned = matmul(xa, map.r_in);
            worst_cka = std::max(worst_cka,
                                 std::abs(linear_cka(xa, xb) - linear_cka(aligned, xb)));
            // control: the same-dimension unaligned pair via zero padding
            DenseMatrix padded(xa.rows(), xb.cols());
            for (std::size_t i = 0; i < xa.rows(); ++i)
                for (std::size_t j = 0; j < xa.cols(); ++j) padded(i, j) = xa(i, j);
            gain_total += mean_row_cosine(aligned, xb) - mean_row_cosine(padded, xb);
        }
    }
    const double mean_gain = gain_total / (5.0 * 2.0);  // 2 width-mismatched pairs per seed
    report(5, "CKA invariance and cosine alignment gain",
           worst_cka <= 1e-9 && mean_gain >= 0.2,
           "CKA shift " + fmt(worst_cka) + ", mean cosine gain " + fmt(mean_gain));
}

void criterion_6_transfer_ordering() {
    const auto start = std::chrono::steady_clock::now();
    const ModelSpec spec = mlp_spec(16, {32, 32, 32, 32}, 4, Nonlinearity::relu);
    TaskSuiteConfig suite_cfg;
    suite_cfg.feature_dim = 16;
    suite_cfg.pretrain_size = 1024;
    suite_cfg.downstream_train_size = 512;
    suite_cfg.downstream_test_size = 512;

    double bico_sum = 0.0, zero_sum = 0.0, pad_sum = 0.0, in_sum = 0.0, out_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const PretrainedPair p = make_pair(spec, spec, suite_cfg, seed, 400, 400);
        const CalibrationSet calib = select_calibration(
            p.suite.downstream_train, CalibStrategy::random, CalibBudget::total(64),
            nullptr, seed);
        const TaskVector tau = extract(p.a_pre, p.a_ft);
        const Batch& test = p.suite.downstream_test;

        bico_sum += accuracy(
            bico_pipeline(p.a_pre, p.a_ft, p.b_pre, calib, TransferVariant::bico).model, test);
        zero_sum += accuracy(p.b_pre, test);
        pad_sum += accuracy(apply(p.b_pre, naive_transfer(tau, spec, NaiveMode::pad)), test);
        in_sum += accuracy(
            bico_pipeline(p.a_pre, p.a_ft, p.b_pre, calib, TransferVariant::input_only).model,
            test);
        out_sum += accuracy(
            bico_pipeline(p.a_pre, p.a_ft, p.b_pre, calib, TransferVariant::output_only).model,
            test);
    }
    const double bico = bico_sum / 5, zero = zero_sum / 5, pad = pad_sum / 5,
                 in_only = in_sum / 5, out_only = out_sum / 5;
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start).count();
    const bool ok = bico >= zero + 0.02 && bico >= pad + 0.02 && bico >= in_only &&
                    bico >= out_only && secs < 300.0;
    report(6, "desk-scale transfer ordering", ok,
           "bico " + fmt(bico) + " vs zero_shot " + fmt(zero) + ", naive_pad " + fmt(pad) +
               ", input_only " + fmt(in_only) + ", output_only " + fmt(out_only) + " (" +
               fmt(secs) + " s)");
}

void criterion_7_depth_width_mismatch() {
    const ModelSpec src = mlp_spec(16, {32, 32, 32, 32}, 4, Nonlinearity::relu);
    const ModelSpec tgt = mlp_spec(16, {48, 48, 48, 48, 48, 48}, 4, Nonlinearity::relu);
    TaskSuiteConfig suite_cfg;
    suite_cfg.feature_dim = 16;
    suite_cfg.pretrain_size = 1024;
    suite_cfg.downstream_train_size = 512;
    suite_cfg.downstream_test_size = 512;

    double bico_sum = 0.0, zero_sum = 0.0, pad_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const PretrainedPair p = make_pair(src, tgt, suite_cfg, seed, 400, 400);
        const CalibrationSet calib = select_calibration(
            p.suite.downstream_train, CalibStrategy::random, CalibBudget::total(64),
            nullptr, seed);
        const Batch& test = p.suite.downstream_test;
        bico_sum += accuracy(
            bico_pipeline(p.a_pre, p.a_ft, p.b_pre, calib, TransferVariant::bico).model, test);
        zero_sum += accuracy(p.b_pre, test);
        // depth-matched pad baseline: pad each matched source block into the target
        TaskVector tau = extract(p.a_pre, p.a_ft);
        const DepthMatching matching = depth_match(src.depth, tgt.depth);
        TaskVector padded;
        padded.source_spec = tgt;
        for (const auto& [i, j] : matching.pairs) {
            DenseMatrix dw(tgt.layers[j].d_out, tgt.layers[j].d_in);
            for (std::size_t r = 0; r < std::min(dw.rows(), tau.delta_w[i].rows()); ++r)
                for (std::size_t c = 0; c < std::min(dw.cols(), tau.delta_w[i].cols()); ++c)
                    dw(r, c) = tau.delta_w[i](r, c);
            padded.delta_w.push_back(std::move(dw));
            std::vector<double> db(tgt.layers[j].d_out, 0.0);
            for (std::size_t r = 0; r < std::min(db.size(), tau.delta_b[i].size()); ++r)
                db[r] = tau.delta_b[i][r];
            padded.delta_b.push_back(std::move(db));
        }
        // head: pad the source head update
        {
            const std::size_t h = src.depth;
            DenseMatrix dw(tgt.layers[tgt.depth].d_out, tgt.layers[tgt.depth].d_in);
            for (std::size_t r = 0; r < dw.rows(); ++r)
                for (std::size_t c = 0; c < std::min(dw.cols(), tau.delta_w[h].cols()); ++c)
                    dw(r, c) = tau.delta_w[h](r, c);
            padded.delta_w.push_back(std::move(dw));
            padded.delta_b.push_back(tau.delta_b[h]);
        }
        pad_sum += accuracy(apply(p.b_pre, padded), test);
    }

    // exhaustive depth-matching invariants over [1..16]^2
    bool depth_ok = true;
    std::string depth_note;
    for (std::size_t d_a = 1; d_a <= 16 && depth_ok; ++d_a) {
        for (std::size_t d_b = 1; d_b <= 16 && depth_ok; ++d_b) {
            if (d_b == 1 && d_a != 1) {
                // i(0) = 0/0: undefined, must be rejected rather than guessed
                try {
                    depth_match(d_a, d_b);
                    depth_ok = false;
                    depth_note = "depth_match(" + std::to_string(d_a) + ",1) did not reject";
                } catch (const argument_error&) {
                }
                continue;
            }
            const DepthMatching m = depth_match(d_a, d_b);
            if (m.pairs.size() != d_b || m.pairs.front().first != 0 ||
                m.pairs.back().first != d_a - 1) {
                depth_ok = false;
                depth_note = "endpoint violation at (" + std::to_string(d_a) + "," +
                             std::to_string(d_b) + ")";
            }
            for (std::size_t j = 0; j + 1 < m.pairs.size(); ++j)
                if (m.pairs[j].first > m.pairs[j + 1].first) {
                    depth_ok = false;
                    depth_note = "monotonicity violation";
                }
        }
    }

    const double bico = bico_sum / 5, zero = zero_sum / 5, pad = pad_sum / 5;
    const bool ok = bico > zero && bico > pad && depth_ok;
    report(7, "depth/width mismatch transfer", ok,
           "bico " + fmt(bico) + " vs zero_shot " + fmt(zero) + ", naive_pad " + fmt(pad) +
               (depth_ok ? ", depth invariants hold on [1..16]^2" : ", " + depth_note));
}

void criterion_8_cost_estimator() {
    const CostEstimate equal = estimate_cost(1000, 1000, 0, 0, 0, 0, 0);
    const bool calib_ok = equal.calib_flops == 12.0 * 1000.0;  // 6P_A + 6P_B = 12P
    const CostEstimate ab = estimate_cost(700, 1300, 0, 0, 0, 0, 2000);
    const bool general_ok = ab.calib_flops == 6.0 * 700 + 6.0 * 1300;
    const bool ft_ok = ab.finetune_flops == 32000.0 * 1300;  // 16 * 2000 * P_B
    report(8, "cost estimator closed forms", calib_ok && general_ok && ft_ok,
           std::string("12P calibration ") + (calib_ok && general_ok ? "exact" : "WRONG") +
               ", 32000*P_B fine-tuning " + (ft_ok ? "exact" : "WRONG"));
}

void criterion_9_gradient_suite() {
    // finite differences on random tiny models
    double worst_grad = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const ModelSpec spec = mlp_spec(5, {6, 4}, 3,
                                        seed % 2 ? Nonlinearity::relu : Nonlinearity::gelu);
        Rng rng(900 + seed);
        Model m = random_init(spec, rng);
        const Batch b = random_batch(6, 5, 3, 910 + seed);
        const ForwardTrace t = forward(m, b.inputs);
        const BackwardTrace bt = backward(m, t, b.labels);
        const double h = 1e-5;
        for (std::size_t l = 0; l < m.num_layers(); ++l) {
            for (std::size_t i = 0; i < m.weight(l).size(); ++i) {
                double& wv = m.weight(l).values()[i];
                const double saved = wv;
                wv = saved + h;
                const double lp = backward(m, forward(m, b.inputs), b.labels).loss;
                wv = saved - h;
                const double lm = backward(m, forward(m, b.inputs), b.labels).loss;
                wv = saved;
                worst_grad = std::max(
                    worst_grad,
                    std::abs(bt.weight_grads[l].values()[i] - (lp - lm) / (2 * h)));
            }
        }
    }

    // semi-orthogonality of emitted maps across shapes and variants
    double worst_map = 0.0;
    {
        const ModelSpec src = mlp_spec(10, {14, 14}, 4, Nonlinearity::relu);
        const ModelSpec tgt = mlp_spec(12, {9, 9, 9}, 4, Nonlinearity::relu);
        Rng rng(920);
        const Model a = random_init(src, rng);
        const Model b = random_init(tgt, rng);
        CalibrationSet ca, cb;
        ca.examples = random_batch(96, 10, 4, 921);
        cb.examples = random_batch(96, 12, 4, 922);
        const CalibrationCapture cap_a = collect(a, ca);
        const CalibrationCapture cap_b = collect(b, cb);
        for (TransferVariant v : {TransferVariant::bico, TransferVariant::gradient_only}) {
            const AlignmentMaps maps =
                estimate_maps(cap_a, cap_b, depth_match(src.depth, tgt.depth), v);
            for (const auto& map : maps.maps) {
                worst_map = std::max(worst_map, semi_orthogonality_defect(map.r_in));
                worst_map = std::max(worst_map, semi_orthogonality_defect(map.r_out));
            }
        }
    }

    // consistency fixed points
    Rng rng(930);
    const DenseMatrix x0 = random_normal_matrix(10, 6, rng);
    CalibrationCapture pre;
    pre.batch_size = 10;
    pre.tokens_per_example = 1;
    pre.x = {x0};
    DenseMatrix flipped = x0;
    flipped *= -1.0;
    TrajectoryLog log;
    log.snapshots.push_back({0, {x0}});
    log.snapshots.push_back({1, {flipped}});
    const ConsistencyProfile prof = activation_consistency(log, pre);
    const bool consistency_ok =
        std::abs(prof.entries[0].delta_direction[0]) <= 1e-12 &&
        std::abs(prof.entries[0].delta_magnitude[0]) <= 1e-12 &&
        std::abs(prof.entries[1].delta_direction[0] - 2.0) <= 1e-12 &&
        std::abs(prof.entries[1].delta_magnitude[0]) <= 1e-12;

    report(9, "gradient, map and consistency suite",
           worst_grad <= 1e-6 && worst_map <= 1e-8 && consistency_ok,
           "grad err " + fmt(worst_grad) + ", map defect " + fmt(worst_map) +
               ", fixed points " + (consistency_ok ? "exact" : "WRONG"));
}

}  // namespace

int main() {
    criterion_1_reconstruction();
    criterion_2_permutation_oracle();
    criterion_3_rotation_oracle();
    criterion_4_geometry();
    criterion_5_cka_cosine();
    criterion_6_transfer_ordering();
    criterion_7_depth_width_mismatch();
    criterion_8_cost_estimator();
    criterion_9_gradient_suite();
    if (g_failures == 0)
        std::printf("all 9 acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", g_failures);
    return g_failures;
}
