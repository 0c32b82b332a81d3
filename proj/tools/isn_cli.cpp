// Command-line front end: config-driven dataset generation, training,
// evaluation, floors, cross-task evaluation, heatmap export, parameter
// inference and reweighting.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "isn/isn.hpp"

namespace {

using nlohmann::json;

std::string output_path(const std::string& path) {
    const char* dir = std::getenv("ISN_OUTPUT_DIR");
    if (!dir || !*dir) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(dir) / p).string();
}

std::string hash_hex(uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

isn::Vec parse_vec(const std::string& s) {
    isn::Vec v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        v.push_back(std::stod(item));
    }
    if (v.empty()) throw isn::ConfigError("expected a comma-separated list of numbers, got '" + s + "'");
    return v;
}

json metric_json(const isn::MetricStat& m) { return json{{"value", m.value}, {"se", m.se}}; }

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw isn::IoError("cannot open output file: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw isn::IoError("failed while writing: " + path);
}

void write_manifest(const std::string& dataset_path, const std::string& task, size_t n, uint64_t seed,
                    const isn::ExperimentConfig& cfg, const isn::GenerationCounters& counters) {
    json j;
    j["file"] = std::filesystem::path(dataset_path).filename().string();
    j["task"] = task;
    j["n"] = n;
    j["seed"] = seed;
    j["config_hash"] = hash_hex(cfg.hash);
    j["counters"] = {{"domain_redraws", counters.domain_redraws},
                     {"boundary_redraws", counters.boundary_redraws},
                     {"dropped_zero_weight", counters.dropped_zero_weight}};
    write_json(j, dataset_path + ".manifest.json");
}

struct PredictorChoice {
    bool use_oracle = false;
    std::string model_path;
};

isn::TaskPredictor load_predictor(const PredictorChoice& choice, const isn::ExperimentConfig& cfg,
                                  isn::AnyModel& storage) {
    if (choice.use_oracle) return isn::predictor_from_oracle(isn::make_oracle(cfg.oracle_kind));
    if (choice.model_path.empty()) throw isn::ConfigError("pass --model FILE or --oracle");
    storage = isn::load_model(choice.model_path);
    return isn::predictor_from_model(storage);
}

int run_generate(const std::string& config_path, const std::string& task, const std::string& out,
                 uint64_t seed, long n_override, const std::string& theta_str) {
    isn::ExperimentConfig cfg = isn::load_experiment_config(config_path);
    std::string path = output_path(out);
    isn::Rng rng = isn::Rng(seed).substream(isn::stream::kTrainData);
    isn::OracleModel oracle = isn::make_oracle(cfg.oracle_kind);
    size_t n = n_override > 0 ? static_cast<size_t>(n_override) : cfg.n_train;

    isn::Dataset ds;
    if (task == "kse") {
        ds = isn::generate_kse(oracle, cfg.prior, cfg.kernel, n, rng);
    } else if (task == "kse_alt") {
        ds = isn::generate_kse_alt(oracle, cfg.prior, cfg.kernel, n, rng);
    } else if (task == "klre" || task == "carl") {
        isn::TaskSpec spec = isn::task_from_config(cfg, isn::task_id_from_string(task));
        ds = isn::generate_ratio(oracle, isn::task_pair_distribution(spec), n, rng, spec.with_latent);
    } else if (task == "events") {
        if (theta_str.empty()) throw isn::ConfigError("task 'events' needs --theta a,b,c");
        ds = isn::generate_events(oracle, parse_vec(theta_str), n, rng);
    } else {
        throw isn::ConfigError("unknown task '" + task +
                               "' (valid tasks: kse, kse_alt, klre, carl, events)");
    }
    isn::dataset_save(ds, path);
    write_manifest(path, task, n, seed, cfg, ds.counters);
    std::cout << "wrote " << ds.size() << " rows to " << path << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& task_str, const std::string& arch_str,
              const std::string& data_path, const std::string& out, uint64_t seed) {
    isn::ExperimentConfig cfg = isn::load_experiment_config(config_path);
    isn::TaskSpec task = isn::task_from_config(cfg, isn::task_id_from_string(task_str));
    isn::Dataset data = isn::dataset_load(data_path);

    isn::ArchitectureTag tag;
    if (arch_str == "isn")
        tag = isn::ArchitectureTag::Isn;
    else if (arch_str == "direct")
        tag = isn::direct_architecture(task.id);
    else
        tag = isn::architecture_from_string(arch_str);

    isn::Rng init_rng = isn::Rng(seed).substream(isn::stream::kInit);
    isn::Rng shuffle_rng = isn::Rng(seed).substream(isn::stream::kShuffle);
    isn::AnyModel model = isn::make_model(tag, task.oracle.event_dim, task.oracle.param_dim, cfg.hidden);
    isn::init_lecun_normal(model.net(), init_rng);

    auto t0 = std::chrono::steady_clock::now();
    isn::TrainingReport report = isn::train_model(model, data, task.loss, task.train, shuffle_rng);
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::string path = output_path(out);
    isn::save_model(model, path);
    std::cout << "trained " << isn::to_string(tag) << " (" << model.net().parameter_count()
              << " parameters) for " << report.train_loss.size() << " epochs in " << seconds << " s\n";
    if (!report.train_loss.empty())
        std::cout << "final train loss " << report.train_loss.back() << ", validation loss "
                  << report.val_loss.back() << " (split " << report.n_val << "/" << report.n_train + report.n_val
                  << ")\n";
    std::cout << "model written to " << path << "\n";
    return 0;
}

int run_evaluate(const std::string& config_path, const std::string& task_str,
                 const std::vector<std::string>& model_paths, bool with_oracle, uint64_t seed,
                 const std::string& report_path) {
    isn::ExperimentConfig cfg = isn::load_experiment_config(config_path);
    isn::TaskSpec task = isn::task_from_config(cfg, isn::task_id_from_string(task_str));
    isn::Dataset eval1 = isn::make_eval_set(task, seed, 1);
    isn::Dataset eval2 = isn::make_eval_set(task, seed, 2);
    isn::MetricStat floor = isn::oracle_floor(task, eval1);

    json rows = json::array();
    auto add_row = [&](const std::string& name, const isn::TaskPredictor& pred) {
        isn::MetricStat loss = isn::eval_avg_loss(pred, task, eval1);
        isn::MetricStat error = isn::eval_avg_error(pred, task, eval2);
        std::cout << name << ": avg_loss " << loss.value << " +- " << loss.se << ", avg_error "
                  << error.value << " +- " << error.se << "\n";
        rows.push_back(json{{"model", name}, {"avg_loss", metric_json(loss)}, {"avg_error", metric_json(error)}});
    };

    if (with_oracle) add_row("oracle", isn::predictor_from_oracle(task.oracle));
    std::vector<isn::AnyModel> keep_alive;
    keep_alive.reserve(model_paths.size());
    for (const std::string& mp : model_paths) {
        keep_alive.push_back(isn::load_model(mp));
        add_row(mp, isn::predictor_from_model(keep_alive.back()));
    }
    std::cout << "oracle floor: " << floor.value << " +- " << floor.se << "\n";

    if (!report_path.empty()) {
        json j;
        j["task"] = task_str;
        j["seed"] = seed;
        j["config_hash"] = hash_hex(cfg.hash);
        j["n_eval"] = task.n_eval;
        j["oracle_floor"] = metric_json(floor);
        j["models"] = rows;
        write_json(j, output_path(report_path));
    }
    return 0;
}

int run_floors(const std::string& config_path, uint64_t seed, long n_eval_override,
               const std::string& out) {
    isn::ExperimentConfig cfg = isn::load_experiment_config(config_path);
    json j;
    j["seed"] = seed;
    j["config_hash"] = hash_hex(cfg.hash);
    for (isn::TaskId id : {isn::TaskId::Kse, isn::TaskId::Klre, isn::TaskId::Carl}) {
        isn::TaskSpec task = isn::task_from_config(cfg, id);
        if (n_eval_override > 0) task.n_eval = static_cast<size_t>(n_eval_override);
        isn::Dataset eval1 = isn::make_eval_set(task, seed, 1);
        isn::MetricStat floor = isn::oracle_floor(task, eval1);
        std::printf("%-5s floor %.4f +- %.4f  (n_eval=%zu)\n", isn::to_string(id).c_str(), floor.value,
                    floor.se, task.n_eval);
        j["floors"][isn::to_string(id)] = metric_json(floor);
    }
    if (!out.empty()) write_json(j, output_path(out));
    return 0;
}

int run_cross_eval(const std::string& config_path, uint64_t seed, int jobs, const std::string& out) {
    isn::ExperimentConfig cfg = isn::load_experiment_config(config_path);
    std::array<isn::TaskSpec, 3> tasks{isn::task_from_config(cfg, isn::TaskId::Kse),
                                       isn::task_from_config(cfg, isn::TaskId::Klre),
                                       isn::task_from_config(cfg, isn::TaskId::Carl)};
    std::array<isn::Dataset, 3> eval1, eval2;
    for (int t = 0; t < 3; ++t) {
        eval1[t] = isn::make_eval_set(tasks[t], seed, 1);
        eval2[t] = isn::make_eval_set(tasks[t], seed, 2);
    }

    std::array<std::array<std::vector<isn::TrainedInstance>, 2>, 3> trained;
    double total_seconds = 0.0;
    for (int t = 0; t < 3; ++t) {
        for (int a = 0; a < 2; ++a) {
            isn::ArchitectureTag arch =
                a == 0 ? isn::ArchitectureTag::Isn : isn::direct_architecture(tasks[t].id);
            auto t0 = std::chrono::steady_clock::now();
            trained[t][a] = isn::run_task(tasks[t], arch, seed, eval1[t], eval2[t], jobs);
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            total_seconds += secs;
            std::cout << "trained " << tasks[t].n_seeds << " x " << isn::to_string(arch) << " on "
                      << isn::to_string(tasks[t].id) << " in " << secs << " s\n";
        }
    }

    isn::CrossEvalReport matrix = isn::cross_evaluate(tasks, trained, eval1, eval2);

    // Human-readable table: rows are evaluation tasks, columns the trained nets.
    std::printf("\n%-18s", "eval \\ trained");
    for (int t = 0; t < 3; ++t)
        for (const char* arch : {"isn", "dir"})
            std::printf(" %10s", (isn::to_string(tasks[t].id) + "-" + arch).c_str());
    std::printf(" %10s\n", "truth");
    for (int e = 0; e < 3; ++e) {
        for (int metric = 0; metric < 2; ++metric) {
            std::printf("%-5s %-12s", isn::to_string(tasks[e].id).c_str(),
                        metric == 0 ? "avg_loss" : "avg_error");
            for (int t = 0; t < 3; ++t)
                for (int a = 0; a < 2; ++a) {
                    const isn::CrossCell& cell = matrix.cells[e][t][a];
                    if (!cell.applicable)
                        std::printf(" %10s", "---");
                    else
                        std::printf(" %10.3f", metric == 0 ? cell.median_loss : cell.median_error);
                }
            if (metric == 0)
                std::printf(" %10.3f\n", matrix.truth_loss[e].value);
            else
                std::printf(" %10.3f\n", 0.0);
        }
    }
    std::cout << "total training wall time " << total_seconds << " s\n";

    json j;
    j["seed"] = seed;
    j["config_hash"] = hash_hex(cfg.hash);
    j["n_train"] = cfg.n_train;
    j["n_eval"] = cfg.n_eval;
    j["epochs"] = cfg.train.epochs;
    j["wall_seconds"] = total_seconds;
    for (int e = 0; e < 3; ++e) j["floors"][isn::to_string(tasks[e].id)] = metric_json(matrix.truth_loss[e]);
    json cells = json::array();
    for (int e = 0; e < 3; ++e)
        for (int t = 0; t < 3; ++t)
            for (int a = 0; a < 2; ++a) {
                const isn::CrossCell& cell = matrix.cells[e][t][a];
                json c;
                c["eval_task"] = isn::to_string(tasks[e].id);
                c["train_task"] = isn::to_string(tasks[t].id);
                c["arch"] = a == 0 ? "isn" : "direct";
                c["applicable"] = cell.applicable;
                if (cell.applicable) {
                    c["median_loss"] = cell.median_loss;
                    c["median_error"] = cell.median_error;
                    json inst = json::array();
                    for (size_t i = 0; i < cell.instance_loss.size(); ++i)
                        inst.push_back(json{{"avg_loss", metric_json(cell.instance_loss[i])},
                                            {"avg_error", metric_json(cell.instance_error[i])}});
                    c["instances"] = inst;
                }
                cells.push_back(c);
            }
    j["cells"] = cells;
    if (!out.empty()) write_json(j, output_path(out));
    return 0;
}

int run_heatmap(const std::string& config_path, const std::string& task_str,
                const PredictorChoice& choice, uint64_t seed, const std::string& out) {
    isn::ExperimentConfig cfg = isn::load_experiment_config(config_path);
    isn::TaskSpec task = isn::task_from_config(cfg, isn::task_id_from_string(task_str));
    isn::Dataset eval2 = isn::make_eval_set(task, seed, 2);
    isn::AnyModel storage;
    isn::TaskPredictor pred = load_predictor(choice, cfg, storage);
    std::string path = output_path(out);
    isn::export_heatmap_data(pred, task, eval2, path);
    std::cout << "heatmap data written to " << path << "\n";
    return 0;
}

void write_trace_csv(const isn::EstimateResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw isn::IoError("cannot open trace file: " + path);
    out << "iteration";
    for (size_t i = 1; i <= result.theta_hat.size(); ++i) out << ",theta" << i;
    out << ",objective\n";
    for (const auto& row : result.trace) {
        out << row.iteration;
        for (double v : row.theta) out << "," << v;
        out << "," << row.objective << "\n";
    }
}

int run_infer(const std::string& config_path, const std::string& data_path,
              const std::string& ref_data_path, const PredictorChoice& choice,
              const std::string& estimator, const std::string& method, const std::string& theta_ref_str,
              double grid_step, const std::string& out) {
    isn::ExperimentConfig cfg = isn::load_experiment_config(config_path);
    isn::Dataset data = isn::dataset_load(data_path);
    if (data.kind != isn::DatasetKind::Events)
        throw isn::ConfigError("infer expects an events dataset (task=events)");
    isn::AnyModel storage;
    isn::TaskPredictor pred = load_predictor(choice, cfg, storage);
    if (!pred.log_ratio) throw isn::ConfigError("the chosen predictor has no ratio head");

    isn::SearchConfig search;
    search.region = cfg.prior;
    search.method = isn::search_method_from_string(method);
    search.grid_step = grid_step;
    isn::Vec theta_ref = parse_vec(theta_ref_str);

    isn::EstimateResult result;
    if (estimator == "mle") {
        result = isn::mle_estimate(pred.log_ratio, data.events, theta_ref, search, pred.score);
    } else if (estimator == "bce") {
        if (ref_data_path.empty()) throw isn::ConfigError("bce needs --ref-data (events at theta_ref)");
        isn::Dataset ref = isn::dataset_load(ref_data_path);
        if (ref.kind != isn::DatasetKind::Events)
            throw isn::ConfigError("--ref-data must be an events dataset");
        result = isn::bce_estimate(pred.log_ratio, data.events, ref.events, theta_ref, search, pred.score);
    } else {
        throw isn::ConfigError("unknown estimator '" + estimator + "' (valid: mle, bce)");
    }

    std::cout << "theta_hat =";
    for (double v : result.theta_hat) std::cout << " " << v;
    std::cout << "  (objective " << result.objective << ")\n";
    if (result.warning) std::cout << "warning: " << result.warning_text << "\n";
    if (!out.empty()) write_trace_csv(result, output_path(out));
    return 0;
}

int run_reweight(const std::string& config_path, const std::string& data_path,
                 const PredictorChoice& choice, const std::string& theta0_str,
                 const std::string& theta1_str, const std::string& out) {
    isn::ExperimentConfig cfg = isn::load_experiment_config(config_path);
    isn::Dataset data = isn::dataset_load(data_path);
    if (data.kind != isn::DatasetKind::Events)
        throw isn::ConfigError("reweight expects an events dataset (task=events)");
    isn::AnyModel storage;
    isn::TaskPredictor pred = load_predictor(choice, cfg, storage);
    if (!pred.log_ratio) throw isn::ConfigError("the chosen predictor has no ratio head");

    isn::Vec theta0 = parse_vec(theta0_str);
    isn::Vec theta1 = parse_vec(theta1_str);
    isn::Vec weights = isn::reweight(pred.log_ratio, data.events, theta0, theta1);

    std::string path = output_path(out);
    std::ofstream f(path);
    if (!f) throw isn::IoError("cannot open weights file: " + path);
    f << "weight\n";
    char buf[40];
    for (double w : weights) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", w);
        f << buf;
    }
    std::cout << "mean weight " << isn::mean(weights) << " over " << weights.size() << " events, written to "
              << path << "\n";
    return 0;
}

int error_exit_code(const isn::Error& e) {
    if (e.category() == "config") return 2;
    if (e.category() == "parse") return 3;
    if (e.category() == "shape") return 4;
    if (e.category() == "domain") return 5;
    if (e.category() == "divergence") return 6;
    if (e.category() == "io") return 7;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulation-based inference toolkit: scalar-potential networks with kernel score and "
                 "kernel likelihood-ratio training"};
    app.require_subcommand(1);

    std::string config_path, task, arch = "isn", data_path, ref_data_path, out, report_path;
    std::string theta_str, theta0_str, theta1_str, theta_ref_str, method = "grid", estimator = "mle";
    std::vector<std::string> model_paths;
    PredictorChoice choice;
    uint64_t seed = 0;
    long n_override = 0, n_eval_override = 0;
    int jobs = 1;
    double grid_step = 0.05;

    auto* generate = app.add_subcommand("generate", "generate a dataset file plus manifest");
    generate->add_option("--config", config_path, "experiment config file")->required();
    generate->add_option("--task", task, "kse | kse_alt | klre | carl | events")->required();
    generate->add_option("--out", out, "output dataset file")->required();
    generate->add_option("--seed", seed, "master seed");
    generate->add_option("--n", n_override, "row count (defaults to train.n_train)");
    generate->add_option("--theta", theta_str, "parameter point for task=events, e.g. 1.5,3,5");

    auto* train = app.add_subcommand("train", "train one model on a dataset file");
    train->add_option("--config", config_path)->required();
    train->add_option("--task", task, "kse | klre | carl")->required();
    train->add_option("--arch", arch, "isn | direct | direct_score | direct_ratio");
    train->add_option("--data", data_path, "training dataset file")->required();
    train->add_option("--out", out, "output model file")->required();
    train->add_option("--seed", seed, "seed for init and batch shuffling");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate models on a task's evaluation datasets");
    evaluate->add_option("--config", config_path)->required();
    evaluate->add_option("--task", task)->required();
    evaluate->add_option("--models", model_paths, "model files")->delimiter(',');
    evaluate->add_flag("--oracle", choice.use_oracle, "also evaluate the exact score/ratio");
    evaluate->add_option("--seed", seed, "seed for the evaluation datasets");
    evaluate->add_option("--report", report_path, "write a JSON report");

    auto* cross = app.add_subcommand("cross-eval", "run the full protocol and cross-evaluate");
    cross->add_option("--config", config_path)->required();
    cross->add_option("--seed", seed);
    cross->add_option("--jobs", jobs, "instance-level parallelism (default 1, fully deterministic)");
    cross->add_option("--out", out, "write the matrix as JSON");

    auto* floors = app.add_subcommand("floors", "oracle loss floors for the three tasks");
    floors->add_option("--config", config_path)->required();
    floors->add_option("--seed", seed);
    floors->add_option("--n-eval", n_eval_override, "override eval.n_eval");
    floors->add_option("--out", out, "write floors as JSON");

    auto* heatmap = app.add_subcommand("heatmap", "export (component, truth, prediction) CSV");
    heatmap->add_option("--config", config_path)->required();
    heatmap->add_option("--task", task)->required();
    heatmap->add_option("--model", choice.model_path, "model file");
    heatmap->add_flag("--oracle", choice.use_oracle, "use the exact score/ratio");
    heatmap->add_option("--seed", seed);
    heatmap->add_option("--out", out, "output CSV")->required();

    auto* infer = app.add_subcommand("infer", "estimate theta from an events dataset");
    infer->add_option("--config", config_path)->required();
    infer->add_option("--data", data_path, "events dataset")->required();
    infer->add_option("--ref-data", ref_data_path, "events at theta_ref (bce only)");
    infer->add_option("--model", choice.model_path, "model file");
    infer->add_flag("--oracle", choice.use_oracle, "use the exact ratio");
    infer->add_option("--estimator", estimator, "mle | bce");
    infer->add_option("--method", method, "grid | gradient");
    infer->add_option("--theta-ref", theta_ref_str, "reference parameter, e.g. 1,1,1")->required();
    infer->add_option("--grid-step", grid_step, "final grid resolution");
    infer->add_option("--out", out, "trace CSV");

    auto* reweight = app.add_subcommand("reweight", "weights emulating theta1 from theta0 events");
    reweight->add_option("--config", config_path)->required();
    reweight->add_option("--data", data_path, "events dataset drawn at theta0")->required();
    reweight->add_option("--model", choice.model_path, "model file");
    reweight->add_flag("--oracle", choice.use_oracle, "use the exact ratio");
    reweight->add_option("--theta0", theta0_str)->required();
    reweight->add_option("--theta1", theta1_str)->required();
    reweight->add_option("--out", out, "weights CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return run_generate(config_path, task, out, seed, n_override, theta_str);
        if (train->parsed()) return run_train(config_path, task, arch, data_path, out, seed);
        if (evaluate->parsed())
            return run_evaluate(config_path, task, model_paths, choice.use_oracle, seed, report_path);
        if (cross->parsed()) return run_cross_eval(config_path, seed, jobs, out);
        if (floors->parsed()) return run_floors(config_path, seed, n_eval_override, out);
        if (heatmap->parsed()) return run_heatmap(config_path, task, choice, seed, out);
        if (infer->parsed())
            return run_infer(config_path, data_path, ref_data_path, choice, estimator, method,
                             theta_ref_str, grid_step, out);
        if (reweight->parsed())
            return run_reweight(config_path, data_path, choice, theta0_str, theta1_str, out);
    } catch (const isn::Error& e) {
        std::cerr << "error [" << e.category() << "]: " << e.what() << "\n";
        return error_exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
