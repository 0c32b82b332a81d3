#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "isn/core.hpp"
#include "isn/datagen.hpp"
#include "isn/kernels.hpp"
#include "isn/losses.hpp"
#include "isn/models.hpp"
#include "isn/oracles.hpp"
#include "isn/rng.hpp"
#include "isn/training.hpp"

namespace isn {

enum class TaskId { Kse, Klre, Carl };

inline std::string to_string(TaskId t) {
    switch (t) {
        case TaskId::Kse: return "kse";
        case TaskId::Klre: return "klre";
        case TaskId::Carl: return "carl";
    }
    return "kse";
}

inline TaskId task_id_from_string(const std::string& s) {
    if (s == "kse") return TaskId::Kse;
    if (s == "klre") return TaskId::Klre;
    if (s == "carl") return TaskId::Carl;
    throw ConfigError("unknown task '" + s + "' (valid tasks: kse, klre, carl)");
}

struct TaskSpec {
    TaskId id = TaskId::Kse;
    OracleModel oracle;
    PriorSpec prior;
    KernelSpec kernel;       // score-regression kernel
    KernelSpec pair_kernel;  // correlated-pair kernel
    LossKind loss = LossKind::Mse;
    size_t n_train = 100000;
    size_t n_eval = 100000;
    int n_seeds = 5;
    bool with_latent = false;
    TrainConfig train;
};

// The benchmark study configuration: Dirichlet events, box prior on
// [0.5, 5)^3, delta kernel of width 0.25 for score regression, rectangular
// pair kernel of width 0.4, MSE/logistic losses. The desk profile shrinks
// training for fast runs; the full profile matches the study scale.
inline TaskSpec make_dirichlet_task(TaskId id, const std::string& profile = "full") {
    TaskSpec task;
    task.id = id;
    task.oracle = make_dirichlet3();
    task.prior = make_box_prior({0.5, 0.5, 0.5}, {5.0, 5.0, 5.0});
    task.kernel = make_kernel(KernelKind::Delta, {0.25, 0.25, 0.25});
    task.pair_kernel = make_kernel(KernelKind::Rectangular, {0.4, 0.4, 0.4});
    task.loss = id == TaskId::Kse ? LossKind::Mse : LossKind::Logistic;
    if (profile == "full") {
        task.n_train = 100000;
        task.train.epochs = 20;
    } else if (profile == "desk") {
        task.n_train = 20000;
        task.train.epochs = 10;
    } else {
        throw ConfigError("unknown profile '" + profile + "' (valid: full, desk)");
    }
    return task;
}

inline uint64_t task_stream_id(TaskId id) {
    switch (id) {
        case TaskId::Kse: return 101;
        case TaskId::Klre: return 102;
        case TaskId::Carl: return 103;
    }
    return 101;
}

inline PairDistribution task_pair_distribution(const TaskSpec& task) {
    PairDistribution pd;
    pd.prior = task.prior;
    if (task.id == TaskId::Klre) {
        pd.kind = PairKind::KernelCorrelated;
        pd.kernel = task.pair_kernel;
    } else {
        pd.kind = PairKind::Iid;
    }
    return pd;
}

inline Dataset generate_task_dataset(const TaskSpec& task, size_t n, Rng rng) {
    if (n == 0) throw ConfigError("dataset size must be positive");
    if (task.id == TaskId::Kse) return generate_kse(task.oracle, task.prior, task.kernel, n, rng);
    return generate_ratio(task.oracle, task_pair_distribution(task), n, rng, task.with_latent);
}

inline Dataset make_training_set(const TaskSpec& task, uint64_t master_seed, int instance) {
    Rng rng = Rng(master_seed)
                  .substream(task_stream_id(task.id))
                  .substream(stream::kTrainData)
                  .substream(static_cast<uint64_t>(instance));
    return generate_task_dataset(task, task.n_train, rng);
}

// which = 1 is the loss dataset, which = 2 the error dataset; both are
// disjoint streams from every training set.
inline Dataset make_eval_set(const TaskSpec& task, uint64_t master_seed, int which) {
    Rng rng = Rng(master_seed)
                  .substream(task_stream_id(task.id))
                  .substream(which == 1 ? stream::kEvalLoss : stream::kEvalError);
    return generate_task_dataset(task, task.n_eval, rng);
}

struct MetricStat {
    double value = 0.0;
    double se = 0.0;
};

// Score and log-ratio heads bundled for evaluation; either may be absent.
struct TaskPredictor {
    std::function<Vec(const Vec& x, const Vec& theta)> score;
    std::function<double(const Vec& x, const Vec& theta0, const Vec& theta1)> log_ratio;
};

inline TaskPredictor predictor_from_model(const AnyModel& model) {
    TaskPredictor p;
    if (model.can_predict_score())
        p.score = [&model](const Vec& x, const Vec& theta) { return predict_score(model, x, theta); };
    if (model.can_predict_log_ratio())
        p.log_ratio = [&model](const Vec& x, const Vec& t0, const Vec& t1) {
            return predict_log_ratio(model, x, t0, t1);
        };
    return p;
}

inline TaskPredictor predictor_from_oracle(const OracleModel& oracle) {
    TaskPredictor p;
    p.score = [oracle](const Vec& x, const Vec& theta) { return oracle.score(x, theta); };
    p.log_ratio = [oracle](const Vec& x, const Vec& t0, const Vec& t1) {
        return oracle.log_ratio(x, t0, t1);
    };
    return p;
}

namespace detail {

inline MetricStat mean_with_se(const Vec& values) { return {mean(values), standard_error(values)}; }

}  // namespace detail

// Average per-example loss of a predictor on evaluation dataset 1. Plugging
// the exact score/ratio in gives the oracle floor for the task.
inline MetricStat eval_avg_loss(const TaskPredictor& pred, const TaskSpec& task, const Dataset& eval1) {
    Vec values;
    values.reserve(eval1.size());
    if (task.id == TaskId::Kse) {
        if (eval1.kind != DatasetKind::Score) throw ConfigError("task kse needs a score dataset");
        if (!pred.score) throw ConfigError("predictor has no score head for task kse");
        for (const auto& ex : eval1.score)
            values.push_back(score_loss_value_and_grad(pred.score(ex.x, ex.theta), ex).value);
    } else {
        if (eval1.kind != DatasetKind::Ratio) throw ConfigError("ratio tasks need a ratio dataset");
        if (!pred.log_ratio) throw ConfigError("predictor has no ratio head for task " + to_string(task.id));
        for (const auto& ex : eval1.ratio) {
            double t = pred.log_ratio(ex.x, ex.theta0, ex.theta1);
            values.push_back(ratio_loss_value_and_grad(task.loss, t, ex).value);
        }
    }
    return detail::mean_with_se(values);
}

// Average per-example error against the exact score/ratio on evaluation
// dataset 2. Zero iff the predictor matches the truth on the dataset.
inline MetricStat eval_avg_error(const TaskPredictor& pred, const TaskSpec& task, const Dataset& eval2) {
    if (!task.oracle.can_score || !task.oracle.can_log_density)
        throw ConfigError("task oracle does not expose the truth needed by the error metric");
    Vec values;
    values.reserve(eval2.size());
    if (task.id == TaskId::Kse) {
        if (!pred.score) throw ConfigError("predictor has no score head for task kse");
        for (const auto& ex : eval2.score) {
            Vec predicted = pred.score(ex.x, ex.theta);
            Vec truth = task.oracle.score(ex.x, ex.theta);
            double err = 0.0;
            for (size_t i = 0; i < truth.size(); ++i) {
                double diff = predicted[i] - truth[i];
                err += diff * diff;
            }
            values.push_back(err / static_cast<double>(truth.size()));
        }
    } else {
        if (!pred.log_ratio) throw ConfigError("predictor has no ratio head for task " + to_string(task.id));
        for (const auto& ex : eval2.ratio) {
            double t = pred.log_ratio(ex.x, ex.theta0, ex.theta1);
            double truth = task.oracle.log_ratio(ex.x, ex.theta0, ex.theta1);
            double diff = t - truth;
            values.push_back(diff * diff);
        }
    }
    return detail::mean_with_se(values);
}

inline MetricStat oracle_floor(const TaskSpec& task, const Dataset& eval1) {
    return eval_avg_loss(predictor_from_oracle(task.oracle), task, eval1);
}

// The direct (non-potential) baseline head for each task.
inline ArchitectureTag direct_architecture(TaskId id) {
    return id == TaskId::Kse ? ArchitectureTag::DirectScore : ArchitectureTag::DirectRatio;
}

struct TrainedInstance {
    AnyModel model;
    TrainingReport report;
    MetricStat avg_loss;   // on the training task's eval dataset 1
    MetricStat avg_error;  // on the training task's eval dataset 2
    double wall_seconds = 0.0;
};

namespace detail {

inline void parallel_instances(int n, int jobs, const std::function<void(int)>& body) {
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    int workers = std::min(jobs, n);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace detail

// Train n_seeds instances of one architecture on the task: instance i gets its
// own training dataset, its own initialization and its own shuffle stream, all
// derived from the master seed, so results do not depend on --jobs.
inline std::vector<TrainedInstance> run_task(const TaskSpec& task, ArchitectureTag arch,
                                             uint64_t master_seed, const Dataset& eval1,
                                             const Dataset& eval2, int jobs = 1) {
    if (task.n_train == 0) throw ConfigError("task has n_train = 0");
    std::vector<TrainedInstance> instances(task.n_seeds);
    uint64_t arch_offset = arch == ArchitectureTag::Isn ? 0 : 1000;
    detail::parallel_instances(task.n_seeds, jobs, [&](int i) {
        auto t0 = std::chrono::steady_clock::now();
        Dataset train_data = make_training_set(task, master_seed, i);
        Rng task_rng = Rng(master_seed).substream(task_stream_id(task.id));
        Rng init_rng = task_rng.substream(stream::kInit).substream(arch_offset + i);
        Rng shuffle_rng = task_rng.substream(stream::kShuffle).substream(arch_offset + i);

        AnyModel model = make_model(arch, task.oracle.event_dim, task.oracle.param_dim);
        init_lecun_normal(model.net(), init_rng);
        TrainingReport report;
        try {
            report = train_model(model, train_data, task.loss, task.train, shuffle_rng);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " (task " + to_string(task.id) + ", instance " +
                                  std::to_string(i) + ")");
        }
        TrainedInstance& inst = instances[i];
        inst.model = std::move(model);
        inst.report = std::move(report);
        TaskPredictor pred = predictor_from_model(inst.model);
        inst.avg_loss = eval_avg_loss(pred, task, eval1);
        inst.avg_error = eval_avg_error(pred, task, eval2);
        inst.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    return instances;
}

// One cell of the cross-evaluation matrix: a trained column (train task x
// architecture) measured on an evaluation task. Dashes in the study table map
// to applicable == false.
struct CrossCell {
    bool applicable = false;
    std::vector<MetricStat> instance_loss;
    std::vector<MetricStat> instance_error;
    double median_loss = 0.0;
    double median_error = 0.0;
};

struct CrossEvalReport {
    std::array<TaskId, 3> eval_tasks{TaskId::Kse, TaskId::Klre, TaskId::Carl};
    std::array<TaskId, 3> train_tasks{TaskId::Kse, TaskId::Klre, TaskId::Carl};
    // cells[eval][train][arch] with arch index 0 = isn, 1 = direct
    std::array<std::array<std::array<CrossCell, 2>, 3>, 3> cells;
    std::array<MetricStat, 3> truth_loss;  // oracle floors per eval task
};

inline bool can_perform(ArchitectureTag arch, TaskId eval_task) {
    switch (arch) {
        case ArchitectureTag::Isn: return true;
        case ArchitectureTag::DirectScore: return eval_task == TaskId::Kse;
        case ArchitectureTag::DirectRatio: return eval_task != TaskId::Kse;
    }
    return false;
}

// Evaluate every trained column on every task it can perform, against shared
// evaluation datasets, and aggregate medians over the instances.
inline CrossEvalReport cross_evaluate(
    const std::array<TaskSpec, 3>& tasks,
    const std::array<std::array<std::vector<TrainedInstance>, 2>, 3>& trained,  // [train][arch]
    const std::array<Dataset, 3>& eval1, const std::array<Dataset, 3>& eval2) {
    CrossEvalReport report;
    for (int e = 0; e < 3; ++e) report.truth_loss[e] = oracle_floor(tasks[e], eval1[e]);
    for (int e = 0; e < 3; ++e) {
        for (int tr = 0; tr < 3; ++tr) {
            for (int a = 0; a < 2; ++a) {
                CrossCell& cell = report.cells[e][tr][a];
                const auto& instances = trained[tr][a];
                if (instances.empty()) continue;
                ArchitectureTag arch = instances[0].model.tag();
                if (!can_perform(arch, tasks[e].id)) continue;
                cell.applicable = true;
                Vec losses, errors;
                for (const auto& inst : instances) {
                    TaskPredictor pred = predictor_from_model(inst.model);
                    cell.instance_loss.push_back(eval_avg_loss(pred, tasks[e], eval1[e]));
                    cell.instance_error.push_back(eval_avg_error(pred, tasks[e], eval2[e]));
                    losses.push_back(cell.instance_loss.back().value);
                    errors.push_back(cell.instance_error.back().value);
                }
                cell.median_loss = median(losses);
                cell.median_error = median(errors);
            }
        }
    }
    return report;
}

// (component, truth, prediction) rows for the score or log-ratio heatmaps.
inline void export_heatmap_data(const TaskPredictor& pred, const TaskSpec& task, const Dataset& eval2,
                                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open heatmap file for writing: " + path);
    out << "component,truth,prediction\n";
    char buf[96];
    if (task.id == TaskId::Kse) {
        if (!pred.score) throw ConfigError("predictor has no score head for task kse");
        for (const auto& ex : eval2.score) {
            Vec predicted = pred.score(ex.x, ex.theta);
            Vec truth = task.oracle.score(ex.x, ex.theta);
            for (size_t i = 0; i < truth.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i + 1, truth[i], predicted[i]);
                out << buf;
            }
        }
    } else {
        if (!pred.log_ratio) throw ConfigError("predictor has no ratio head for task " + to_string(task.id));
        for (const auto& ex : eval2.ratio) {
            double t = pred.log_ratio(ex.x, ex.theta0, ex.theta1);
            double truth = task.oracle.log_ratio(ex.x, ex.theta0, ex.theta1);
            std::snprintf(buf, sizeof(buf), "1,%.17g,%.17g\n", truth, t);
            out << buf;
        }
    }
    if (!out) throw IoError("failed while writing heatmap file: " + path);
}

}  // namespace isn
