// bico: config-driven front end for the transfer pipeline.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bico/align.hpp"
#include "bico/calib.hpp"
#include "bico/checkpoint.hpp"
#include "bico/dataset.hpp"
#include "bico/diag.hpp"
#include "bico/rng.hpp"
#include "bico/taskvec.hpp"
#include "bico/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bico;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCheckpoint = 3;
constexpr int kExitTransfer = 4;
constexpr int kExitSweepFailed = 5;
constexpr int kSchemaVersion = 1;

constexpr const char* kCsvHeader =
    "task_id,variant,budget,seed,accuracy,delta_acc,wall_time_ms,status";

bool g_quiet = false;

void say(const std::string& line) {
    if (!g_quiet) std::cout << line << "\n";
}

std::size_t worker_count() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BICO_THREADS")) {
        const long v = std::atol(env);
        if (v >= 1) n = std::min<std::size_t>(n, std::size_t(v));
    }
    return n;
}

json load_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw argument_error("cannot open config " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw argument_error("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw argument_error("config " + path.string() + " lacks an integer schema_version");
    if (j["schema_version"].get<int>() != kSchemaVersion)
        throw argument_error("config " + path.string() + " has schema_version " +
                             j["schema_version"].dump() + ", expected " +
                             std::to_string(kSchemaVersion));
    return j;
}

TaskSuiteConfig suite_from_json(const json& j) {
    TaskSuiteConfig c;
    const std::string kind = j.value("kind", "vector");
    if (kind == "vector")
        c.kind = TaskSuiteConfig::Kind::vector;
    else if (kind == "image")
        c.kind = TaskSuiteConfig::Kind::image;
    else
        throw argument_error("task_suite.kind must be vector or image, got " + kind);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.image_size = j.value("image_size", c.image_size);
    c.pretrain_size = j.value("pretrain_size", c.pretrain_size);
    c.downstream_train_size = j.value("downstream_train_size", c.downstream_train_size);
    c.downstream_test_size = j.value("downstream_test_size", c.downstream_test_size);
    c.noise = j.value("noise", c.noise);
    c.mean_scale = j.value("mean_scale", c.mean_scale);
    c.pretrain_shift = j.value("pretrain_shift", c.pretrain_shift);
    c.downstream_shift = j.value("downstream_shift", c.downstream_shift);
    c.validate();
    return c;
}

OptimizerConfig optimizer_from_json(const json& j) {
    OptimizerConfig c;
    const std::string kind = j.value("kind", "sgd");
    if (kind == "sgd")
        c.kind = OptimizerKind::sgd;
    else if (kind == "adamw")
        c.kind = OptimizerKind::adamw;
    else
        throw argument_error("optimizer.kind must be sgd or adamw, got " + kind);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    const std::string sched = j.value("schedule", "constant");
    if (sched == "constant")
        c.schedule = LrSchedule::constant;
    else if (sched == "cosine")
        c.schedule = LrSchedule::cosine;
    else
        throw argument_error("optimizer.schedule must be constant or cosine, got " + sched);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

std::uint64_t fnv1a_file(const fs::path& path, std::uint64_t h) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw argument_error("cannot reopen " + path.string());
    char buf[4096];
    while (f.read(buf, sizeof buf) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string csv_double(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const fs::path& config_path, std::optional<std::uint64_t> seed_override,
                 const fs::path& out_dir) {
    const json cfg = load_config(config_path);
    if (!cfg.contains("task_suite"))
        throw argument_error("gen-data config needs a task_suite object");
    const TaskSuiteConfig suite_cfg = suite_from_json(cfg["task_suite"]);
    const std::uint64_t seed =
        seed_override.value_or(cfg.value("seed", std::uint64_t{0}));

    const TaskSuite suite = generate_task_suite(suite_cfg, seed);
    fs::create_directories(out_dir);
    save_dataset(suite.pretrain_a, out_dir / "pretrain_a.bico");
    save_dataset(suite.pretrain_b, out_dir / "pretrain_b.bico");
    save_dataset(suite.downstream_train, out_dir / "downstream_train.bico");
    save_dataset(suite.downstream_test, out_dir / "downstream_test.bico");

    std::uint64_t digest = 0xcbf29ce484222325ULL;
    for (const char* name : {"pretrain_a.bico", "pretrain_b.bico", "downstream_train.bico",
                             "downstream_test.bico"})
        digest = fnv1a_file(out_dir / name, digest);
    std::ostringstream os;
    os << "digest " << std::hex << digest;
    std::cout << os.str() << "\n";
    return 0;
}

// ---------------------------------------------------------- pretrain/finetune

void save_trajectory(const TrajectoryLog& log, const fs::path& path) {
    Container c;
    c.kind = "trajectory";
    c.meta["optimizer"] = log.optimizer == OptimizerKind::sgd ? "sgd" : "adamw";
    c.meta["weight_decay"] = log.weight_decay;
    c.meta["stride"] = log.stride;
    json steps = json::array();
    for (const auto& s : log.steps) steps.push_back({{"step", s.step}, {"eta", s.eta}});
    c.meta["steps"] = steps;
    json snaps = json::array();
    for (const auto& s : log.snapshots) snaps.push_back(s.step);
    c.meta["snapshot_steps"] = snaps;

    auto add = [&](const std::string& name, const DenseMatrix& m) {
        NamedTensor t;
        t.name = name;
        t.shape = {m.rows(), m.cols()};
        t.f64 = m.values();
        c.tensors.push_back(std::move(t));
    };
    for (std::size_t t = 0; t < log.steps.size(); ++t)
        for (std::size_t l = 0; l < log.steps[t].output_grads.size(); ++l) {
            add("g" + std::to_string(t) + "_" + std::to_string(l), log.steps[t].output_grads[l]);
            add("x" + std::to_string(t) + "_" + std::to_string(l), log.steps[t].inputs[l]);
        }
    for (std::size_t s = 0; s < log.snapshots.size(); ++s)
        for (std::size_t l = 0; l < log.snapshots[s].layer_inputs.size(); ++l)
            add("s" + std::to_string(s) + "_" + std::to_string(l),
                log.snapshots[s].layer_inputs[l]);
    write_container(path, c);
}

DenseMatrix tensor_matrix(const NamedTensor& t) {
    if (t.shape.size() != 2) throw format_error("tensor " + t.name + " is not 2-D", 0);
    return DenseMatrix(t.shape[0], t.shape[1], t.f64);
}

TrajectoryLog load_trajectory(const fs::path& path) {
    const Container c = read_container(path);
    if (c.kind != "trajectory")
        throw format_error("expected kind 'trajectory', got '" + c.kind + "'", 0);
    TrajectoryLog log;
    log.optimizer = c.meta.at("optimizer").get<std::string>() == "sgd" ? OptimizerKind::sgd
                                                                       : OptimizerKind::adamw;
    log.weight_decay = c.meta.at("weight_decay").get<double>();
    log.stride = c.meta.at("stride").get<std::size_t>();
    const json& steps = c.meta.at("steps");
    for (std::size_t t = 0; t < steps.size(); ++t) {
        TrajectoryStep s;
        s.step = steps[t].at("step").get<std::size_t>();
        s.eta = steps[t].at("eta").get<double>();
        for (std::size_t l = 0;; ++l) {
            const std::string suffix = std::to_string(t) + "_" + std::to_string(l);
            bool found = false;
            for (const auto& tensor : c.tensors)
                if (tensor.name == "g" + suffix) found = true;
            if (!found) break;
            s.output_grads.push_back(tensor_matrix(c.tensor("g" + suffix)));
            s.inputs.push_back(tensor_matrix(c.tensor("x" + suffix)));
        }
        log.steps.push_back(std::move(s));
    }
    const json& snaps = c.meta.at("snapshot_steps");
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        ActivationSnapshot snap;
        snap.step = snaps[i].get<std::size_t>();
        for (std::size_t l = 0;; ++l) {
            const std::string name = "s" + std::to_string(i) + "_" + std::to_string(l);
            bool found = false;
            for (const auto& tensor : c.tensors)
                if (tensor.name == name) found = true;
            if (!found) break;
            snap.layer_inputs.push_back(tensor_matrix(c.tensor(name)));
        }
        log.snapshots.push_back(std::move(snap));
    }
    return log;
}

int cmd_train(const fs::path& config_path, std::optional<std::uint64_t> seed_override,
              const fs::path& data_path, const fs::path& in_ckpt, const fs::path& out_ckpt,
              const fs::path& trajectory_out, std::size_t snapshot_stride,
              const fs::path& probe_path, bool is_finetune) {
    const json cfg = load_config(config_path);
    if (!cfg.contains("optimizer"))
        throw argument_error("train config needs an optimizer object");
    OptimizerConfig opt = optimizer_from_json(cfg["optimizer"]);
    if (seed_override) opt.seed = *seed_override;

    Model start;
    if (!in_ckpt.empty()) {
        start = load_checkpoint(in_ckpt);
    } else {
        if (!cfg.contains("model"))
            throw argument_error("train config needs a model spec when no --in-ckpt is given");
        const ModelSpec spec = spec_from_json(cfg["model"]);
        Rng rng(Rng(opt.seed).fork(0xC0FFEE).next_u64());
        start = random_init(spec, rng);
    }

    const Batch data = load_dataset(data_path);

    TrainLogging logging;
    Batch probe;
    if (!trajectory_out.empty()) logging.log_trajectory = true;
    if (snapshot_stride > 0) {
        if (probe_path.empty())
            throw argument_error("--snapshot-stride needs --probe DATASET");
        probe = load_dataset(probe_path);
        logging.snapshot_stride = snapshot_stride;
        logging.snapshot_probe = &probe;
    }

    const TrainResult r = train(start, data, opt, logging);
    if (!out_ckpt.empty()) {
        fs::create_directories(out_ckpt.parent_path().empty() ? "." : out_ckpt.parent_path());
        save_checkpoint(r.model, out_ckpt);
    }
    if (!trajectory_out.empty() || snapshot_stride > 0) {
        if (!r.log) throw numeric_error("trainer produced no log");
        if (!trajectory_out.empty()) save_trajectory(*r.log, trajectory_out);
    }
    say((is_finetune ? std::string("finetuned ") : std::string("pretrained ")) +
        std::to_string(opt.steps) + " steps -> " + out_ckpt.string());
    return 0;
}

// ---------------------------------------------------------------- transfer

CalibrationSet make_calib(const Batch& data, const std::string& strategy_name,
                          const std::string& budget_kind, std::size_t budget_value,
                          const Model* feature_model, std::uint64_t seed) {
    const CalibStrategy strategy = calib_strategy_from_string(strategy_name);
    const CalibBudget budget = budget_kind == "per_class" ? CalibBudget::per_class(budget_value)
                                                         : CalibBudget::total(budget_value);
    if (budget_kind != "per_class" && budget_kind != "total")
        throw argument_error("budget kind must be total or per_class, got " + budget_kind);
    return select_calibration(data, strategy, budget, feature_model, seed);
}

Model run_variant(const std::string& variant, const Model& a_pre, const Model& a_ft,
                  const Model& b_pre, const CalibrationSet& calib) {
    if (variant == "zero_shot") return b_pre;
    if (variant == "naive_pad" || variant == "naive_crop") {
        const TaskVector tau = extract(a_pre, a_ft);
        const NaiveMode mode = variant == "naive_pad" ? NaiveMode::pad : NaiveMode::crop;
        return apply(b_pre, naive_transfer(tau, b_pre.spec(), mode));
    }
    const TransferVariant v = transfer_variant_from_string(variant);
    return bico_pipeline(a_pre, a_ft, b_pre, calib, v).model;
}

int cmd_transfer(const fs::path& source_pre_path, const fs::path& source_ft_path,
                 const fs::path& target_pre_path, const fs::path& calib_data_path,
                 const std::string& strategy, const std::string& budget_kind,
                 std::size_t budget_value, std::uint64_t calib_seed,
                 const std::string& variant, const fs::path& out_ckpt,
                 const fs::path& maps_out) {
    const Model a_pre = load_checkpoint(source_pre_path);
    const Model a_ft = load_checkpoint(source_ft_path);
    const Model b_pre = load_checkpoint(target_pre_path);
    const Batch calib_data = load_dataset(calib_data_path);
    const CalibrationSet calib =
        make_calib(calib_data, strategy, budget_kind, budget_value, &a_pre, calib_seed);

    if (variant == "zero_shot" || variant == "naive_pad" || variant == "naive_crop") {
        const Model out = run_variant(variant, a_pre, a_ft, b_pre, calib);
        save_checkpoint(out, out_ckpt);
        say("wrote " + out_ckpt.string() + " (" + variant + ")");
        return 0;
    }
    const TransferVariant v = transfer_variant_from_string(variant);
    const PipelineResult r = bico_pipeline(a_pre, a_ft, b_pre, calib, v);
    save_checkpoint(r.model, out_ckpt);
    if (!maps_out.empty()) save_alignment_maps(r.maps, maps_out);
    for (const auto& w : r.maps.warnings) say("warning: " + w);
    say("wrote " + out_ckpt.string() + " (" + variant + ")");
    return 0;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const fs::path& ckpt, const fs::path& data_path) {
    const Model m = load_checkpoint(ckpt);
    const Batch data = load_dataset(data_path);
    if (data.size() == 0) throw argument_error("eval: empty dataset");
    for (auto l : data.labels)
        if (l < 0 || std::size_t(l) >= m.spec().num_classes)
            throw argument_error("eval: label " + std::to_string(l) +
                                 " outside the model's class space");
    const auto start = std::chrono::steady_clock::now();
    const double acc = accuracy(m, data);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start).count();
    std::cout << "accuracy " << csv_double(acc) << "\n";
    std::cout << kCsvHeader << "\n";
    std::cout << "eval,-,-,-," << csv_double(acc) << ",0.000000," << csv_double(ms)
              << ",ok\n";
    return 0;
}

// ---------------------------------------------------------------- diagnose

int cmd_diagnose(const std::string& which, const fs::path& source_pre,
                 const fs::path& target_pre, const fs::path& calib_data_path,
                 const std::string& strategy, const std::string& budget_kind,
                 std::size_t budget_value, std::uint64_t calib_seed,
                 const fs::path& trajectory_path, const fs::path& target_calib_path) {
    if (which == "cka_cosine") {
        const Model a = load_checkpoint(source_pre);
        const Model b = load_checkpoint(target_pre);
        const Batch a_data = load_dataset(calib_data_path);
        const Batch b_data =
            target_calib_path.empty() ? a_data : load_dataset(target_calib_path);
        const CalibrationSet ca =
            make_calib(a_data, strategy, budget_kind, budget_value, &a, calib_seed);
        const CalibrationSet cb =
            make_calib(b_data, strategy, budget_kind, budget_value, &b, calib_seed);
        CalibrationCapture cap_a = collect(a, ca);
        CalibrationCapture cap_b = collect(b, cb);
        if (cap_a.token_count() != cap_b.token_count())
            cap_a = interpolate_capture(cap_a, cap_b.tokens_per_example);
        const DepthMatching matching = depth_match(a.spec().depth, b.spec().depth);
        const AlignmentMaps maps =
            estimate_maps(cap_a, cap_b, matching, TransferVariant::bico);
        std::cout << "layer,cka_before,cka_after,cosine_before,cosine_after\n";
        for (const auto& map : maps.maps) {
            const DenseMatrix& xa = cap_a.x[map.source_layer];
            const DenseMatrix& xb = cap_b.x[map.target_layer];
            const DenseMatrix aligned = matmul(xa, map.r_in);
            const double cos_before =
                xa.cols() == xb.cols() ? mean_row_cosine(xa, xb) : 0.0;
            std::cout << map.target_layer << "," << csv_double(linear_cka(xa, xb)) << ","
                      << csv_double(linear_cka(aligned, xb)) << ","
                      << csv_double(cos_before) << ","
                      << csv_double(mean_row_cosine(aligned, xb)) << "\n";
        }
        return 0;
    }
    if (which == "layer_similarity") {
        const Model cand = load_checkpoint(source_pre);
        const Model ref = load_checkpoint(target_pre);
        const Batch data = load_dataset(calib_data_path);
        const auto sims = layer_output_similarity(cand, ref, data.inputs);
        std::cout << "layer,mean_row_cosine\n";
        for (std::size_t l = 0; l < sims.size(); ++l)
            std::cout << l << "," << csv_double(sims[l]) << "\n";
        return 0;
    }
    if (which == "consistency") {
        const Model pre = load_checkpoint(source_pre);
        // the probe batch itself, in file order, so rows line up with snapshots
        CalibrationSet calib;
        calib.examples = load_dataset(calib_data_path);
        const CalibrationCapture cap = collect(pre, calib, false);
        const TrajectoryLog log = load_trajectory(trajectory_path);
        const ConsistencyProfile profile = activation_consistency(log, cap);
        std::cout << "step,layer,delta_direction,delta_magnitude,skipped_rows\n";
        for (const auto& e : profile.entries)
            for (std::size_t l = 0; l < e.delta_direction.size(); ++l)
                std::cout << e.step << "," << l << "," << csv_double(e.delta_direction[l])
                          << "," << csv_double(e.delta_magnitude[l]) << ","
                          << e.skipped_zero_norm_rows << "\n";
        return 0;
    }
    throw argument_error("diagnose --which must be cka_cosine, layer_similarity or consistency");
}

// --------------------------------------------------------------- experiment

struct SweepRow {
    std::string task_id;
    std::string variant;
    std::string budget;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double delta_acc = 0.0;
    double wall_time_ms = 0.0;
    std::string status = "ok";
};

struct ExperimentConfig {
    TaskSuiteConfig suite;
    ModelSpec source_model;
    ModelSpec target_model;
    OptimizerConfig pretrain;
    OptimizerConfig finetune;
    std::string strategy = "random";
    std::string budget_kind = "total";
    std::vector<std::size_t> budgets;
    std::vector<std::string> variants;
    std::vector<std::uint64_t> seeds;
    std::string task_id = "task";
    fs::path out_dir;
};

ExperimentConfig experiment_from_json(const json& cfg, const fs::path& out_override) {
    ExperimentConfig e;
    if (!cfg.contains("task_suite") || !cfg.contains("source_model") ||
        !cfg.contains("target_model") || !cfg.contains("pretrain") ||
        !cfg.contains("finetune") || !cfg.contains("calibration"))
        throw argument_error(
            "experiment config needs task_suite, source_model, target_model, pretrain, "
            "finetune and calibration");
    e.suite = suite_from_json(cfg["task_suite"]);
    e.source_model = spec_from_json(cfg["source_model"]);
    e.target_model = spec_from_json(cfg["target_model"]);
    e.pretrain = optimizer_from_json(cfg["pretrain"]);
    e.finetune = optimizer_from_json(cfg["finetune"]);
    const json& cal = cfg["calibration"];
    e.strategy = cal.value("strategy", e.strategy);
    e.budget_kind = cal.value("budget_kind", e.budget_kind);
    e.budgets = cal.value("budgets", std::vector<std::size_t>{});
    e.variants = cfg.value("variants", std::vector<std::string>{});
    e.seeds = cfg.value("seeds", std::vector<std::uint64_t>{});
    e.task_id = cfg.value("task_id", e.task_id);
    e.out_dir = out_override.empty() ? fs::path(cfg.value("out_dir", "out")) : out_override;
    if (e.budgets.empty() || e.variants.empty() || e.seeds.empty())
        throw argument_error("experiment config needs at least one budget, variant and seed");
    return e;
}

std::vector<SweepRow> run_seed(const ExperimentConfig& e, std::uint64_t seed) {
    std::vector<SweepRow> rows;
    const TaskSuite suite = generate_task_suite(e.suite, seed);

    Rng init_rng(seed);
    Rng a_rng = init_rng.fork(1), b_rng = init_rng.fork(2);
    const Model a_init = random_init(e.source_model, a_rng);
    const Model b_init = random_init(e.target_model, b_rng);

    OptimizerConfig pre_cfg = e.pretrain;
    pre_cfg.seed = Rng(seed).fork(11).next_u64();
    const Model a_pre = train(a_init, suite.pretrain_a, pre_cfg).model;
    pre_cfg.seed = Rng(seed).fork(12).next_u64();
    const Model b_pre = train(b_init, suite.pretrain_b, pre_cfg).model;

    OptimizerConfig ft_cfg = e.finetune;
    ft_cfg.seed = Rng(seed).fork(13).next_u64();
    const Model a_ft = train(a_pre, suite.downstream_train, ft_cfg).model;

    const double zero_shot_acc = accuracy(b_pre, suite.downstream_test);

    for (std::size_t budget : e.budgets) {
        CalibrationSet calib;
        bool calib_ok = true;
        std::string calib_err;
        try {
            calib = make_calib(suite.downstream_train, e.strategy, e.budget_kind, budget,
                               &a_pre, Rng(seed).fork(14).next_u64());
        } catch (const std::exception& ex) {
            calib_ok = false;
            calib_err = ex.what();
        }
        for (const std::string& variant : e.variants) {
            SweepRow row;
            row.task_id = e.task_id;
            row.variant = variant;
            row.budget = std::to_string(budget);
            row.seed = seed;
            const auto start = std::chrono::steady_clock::now();
            try {
                if (!calib_ok) throw argument_error(calib_err);
                Model out;
                if (variant == "target_finetune") {
                    OptimizerConfig tf = e.finetune;
                    tf.seed = Rng(seed).fork(15).next_u64();
                    out = train(b_pre, suite.downstream_train, tf).model;
                } else {
                    out = run_variant(variant, a_pre, a_ft, b_pre, calib);
                }
                row.accuracy = accuracy(out, suite.downstream_test);
                row.delta_acc = row.accuracy - zero_shot_acc;
            } catch (const std::exception& ex) {
                row.status = std::string("failed: ") + ex.what();
                std::replace(row.status.begin(), row.status.end(), ',', ';');
                std::replace(row.status.begin(), row.status.end(), '\n', ' ');
            }
            row.wall_time_ms = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - start).count();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

int cmd_run_experiment(const fs::path& config_path, std::optional<std::uint64_t> seed_override,
                       const fs::path& out_override) {
    const json cfg = load_config(config_path);
    ExperimentConfig e = experiment_from_json(cfg, out_override);
    if (seed_override) e.seeds = {*seed_override};

    std::vector<SweepRow> rows;
    std::mutex rows_mutex;
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(worker_count(), e.seeds.size());
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= e.seeds.size()) return;
            std::vector<SweepRow> seed_rows = run_seed(e, e.seeds[i]);
            std::lock_guard<std::mutex> lock(rows_mutex);
            rows.insert(rows.end(), seed_rows.begin(), seed_rows.end());
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.task_id, a.variant, a.budget, a.seed) <
               std::tie(b.task_id, b.variant, b.budget, b.seed);
    });

    fs::create_directories(e.out_dir);
    {
        std::ofstream f(e.out_dir / "report.csv");
        f << kCsvHeader << "\n";
        for (const auto& r : rows)
            f << r.task_id << "," << r.variant << "," << r.budget << "," << r.seed << ","
              << csv_double(r.accuracy) << "," << csv_double(r.delta_acc) << ","
              << csv_double(r.wall_time_ms) << "," << r.status << "\n";
    }

    // per (variant, budget) aggregate over seeds
    say("variant,budget,mean_accuracy,std_accuracy,mean_delta_acc,rows_ok");
    std::size_t ok_rows = 0;
    for (const std::string& variant : e.variants) {
        for (std::size_t budget : e.budgets) {
            std::vector<double> accs, deltas;
            for (const auto& r : rows)
                if (r.variant == variant && r.budget == std::to_string(budget) &&
                    r.status == "ok") {
                    accs.push_back(r.accuracy);
                    deltas.push_back(r.delta_acc);
                }
            ok_rows += accs.size();
            if (accs.empty()) {
                say(variant + "," + std::to_string(budget) + ",nan,nan,nan,0");
                continue;
            }
            double mean = 0.0, dmean = 0.0;
            for (double a : accs) mean += a;
            for (double d : deltas) dmean += d;
            mean /= double(accs.size());
            dmean /= double(deltas.size());
            double var = 0.0;
            for (double a : accs) var += (a - mean) * (a - mean);
            const double stdev = accs.size() > 1 ? std::sqrt(var / double(accs.size() - 1)) : 0.0;
            say(variant + "," + std::to_string(budget) + "," + csv_double(mean) + "," +
                csv_double(stdev) + "," + csv_double(dmean) + "," +
                std::to_string(accs.size()));
        }
    }

    // cost line at the configured scale
    {
        std::size_t p_a = 0, p_b = 0;
        for (const auto& l : e.source_model.layers)
            p_a += l.d_in * l.d_out + (l.has_bias ? l.d_out : 0);
        for (const auto& l : e.target_model.layers)
            p_b += l.d_in * l.d_out + (l.has_bias ? l.d_out : 0);
        const std::size_t d_a = e.source_model.layers.front().d_out;
        const std::size_t d_b = e.target_model.layers.front().d_out;
        const std::size_t m_tokens =
            e.budgets.front() * e.source_model.tokens_per_example();
        const CostEstimate cost =
            estimate_cost(p_a, p_b, e.target_model.layers.size(), m_tokens, d_a, d_b,
                          e.finetune.steps);
        say("cost: calib=" + std::to_string(cost.calib_flops) +
            " align=" + std::to_string(cost.alignment_flops) +
            " bico_total=" + std::to_string(cost.bico_total) +
            " finetune=" + std::to_string(cost.finetune_flops));
    }

    std::cout << "report " << (e.out_dir / "report.csv").string() << " (" << rows.size()
              << " rows, " << ok_rows << " ok)\n";
    return ok_rows > 0 ? 0 : kExitSweepFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bilinear coordinate alignment lab"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, in_ckpt, out_ckpt, data_path, trajectory_path, probe_path;
    std::string source_pre, source_ft, target_pre, calib_data, maps_out, target_calib;
    std::string strategy = "random", budget_kind = "total", variant = "bico", which;
    std::string out_dir = ".";
    std::size_t budget_value = 64, snapshot_stride = 0;
    std::uint64_t calib_seed = 0;
    std::optional<std::uint64_t> seed_override;

    app.add_flag("--quiet", g_quiet, "suppress progress output");
    app.add_option("--seed", seed_override, "override the config seed");

    auto* gen = app.add_subcommand("gen-data", "generate task suite datasets");
    gen->add_option("--config", config_path, "task suite config")->required();
    gen->add_option("--out", out_dir, "output directory");

    auto add_train_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "model + optimizer config")->required();
        cmd->add_option("--data", data_path, "training dataset")->required();
        cmd->add_option("--out-ckpt", out_ckpt, "output checkpoint")->required();
        cmd->add_option("--in-ckpt", in_ckpt, "starting checkpoint");
        cmd->add_option("--trajectory", trajectory_path, "write the step log here");
        cmd->add_option("--snapshot-stride", snapshot_stride, "probe snapshot stride");
        cmd->add_option("--probe", probe_path, "probe dataset for snapshots");
    };
    auto* pre = app.add_subcommand("pretrain", "train a fresh model");
    add_train_opts(pre);
    auto* fine = app.add_subcommand("finetune", "continue training a checkpoint");
    add_train_opts(fine);

    auto* tr = app.add_subcommand("transfer", "move a task vector across models");
    tr->add_option("--source-pre", source_pre)->required();
    tr->add_option("--source-ft", source_ft)->required();
    tr->add_option("--target-pre", target_pre)->required();
    tr->add_option("--calib-data", calib_data)->required();
    tr->add_option("--strategy", strategy, "calibration strategy");
    tr->add_option("--budget-kind", budget_kind, "total or per_class");
    tr->add_option("--budget", budget_value, "calibration budget");
    tr->add_option("--calib-seed", calib_seed, "calibration selection seed");
    tr->add_option("--variant", variant,
                   "bico, input_only, output_only, gradient_only, naive_pad, naive_crop or "
                   "zero_shot");
    tr->add_option("--out-ckpt", out_ckpt)->required();
    tr->add_option("--maps-out", maps_out, "write alignment maps here");

    auto* ev = app.add_subcommand("eval", "top-1 accuracy of a checkpoint");
    ev->add_option("--ckpt", in_ckpt)->required();
    ev->add_option("--data", data_path)->required();

    auto* diag = app.add_subcommand("diagnose", "representation diagnostics");
    diag->add_option("--which", which, "cka_cosine, layer_similarity or consistency")
        ->required();
    diag->add_option("--source-pre", source_pre);
    diag->add_option("--target-pre", target_pre);
    diag->add_option("--calib-data", calib_data);
    diag->add_option("--target-calib-data", target_calib);
    diag->add_option("--strategy", strategy);
    diag->add_option("--budget-kind", budget_kind);
    diag->add_option("--budget", budget_value);
    diag->add_option("--calib-seed", calib_seed);
    diag->add_option("--trajectory", trajectory_path);

    auto* exp = app.add_subcommand("run-experiment", "config-driven sweep");
    exp->add_option("--config", config_path)->required();
    exp->add_option("--out", out_dir, "override the report directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(config_path, seed_override, out_dir);
        if (pre->parsed() || fine->parsed())
            return cmd_train(config_path, seed_override, data_path, in_ckpt, out_ckpt,
                             trajectory_path, snapshot_stride, probe_path, fine->parsed());
        if (tr->parsed())
            return cmd_transfer(source_pre, source_ft, target_pre, calib_data, strategy,
                                budget_kind, budget_value, calib_seed, variant, out_ckpt,
                                maps_out);
        if (ev->parsed()) return cmd_eval(in_ckpt, data_path);
        if (diag->parsed())
            return cmd_diagnose(which, source_pre, target_pre, calib_data, strategy,
                                budget_kind, budget_value, calib_seed, trajectory_path,
                                target_calib);
        if (exp->parsed())
            return cmd_run_experiment(config_path, seed_override, out_dir);
    } catch (const format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckpoint;
    } catch (const shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTransfer;
    } catch (const precondition_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTransfer;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
