#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "isn/core.hpp"
#include "isn/evaluation.hpp"
#include "isn/kernels.hpp"
#include "isn/losses.hpp"
#include "isn/oracles.hpp"
#include "isn/training.hpp"

namespace isn {

// Experiment configuration file: one JSON object with the sections
// {oracle, prior, kernel, pair, loss, train, eval}. Every key has a default
// (the full-scale Dirichlet study); unknown keys are schema errors.
struct ExperimentConfig {
    OracleKind oracle_kind = OracleKind::Dirichlet3;
    PriorSpec prior = make_box_prior({0.5, 0.5, 0.5}, {5.0, 5.0, 5.0});
    KernelSpec kernel = make_kernel(KernelKind::Delta, {0.25, 0.25, 0.25});
    KernelKind pair_kernel_kind = KernelKind::Rectangular;
    Vec pair_widths{0.4, 0.4, 0.4};
    Vec theta_ref;
    LossKind score_loss = LossKind::Mse;
    LossKind ratio_loss = LossKind::Logistic;
    bool with_latent = false;
    size_t n_train = 100000;
    size_t n_eval = 100000;
    int n_seeds = 5;
    std::vector<int> hidden{8, 16, 8};
    TrainConfig train;

    uint64_t hash = 0;  // FNV-1a of the canonical JSON dump
};

namespace detail {

inline void check_keys(const nlohmann::json& section, const std::string& name,
                       const std::set<std::string>& known, std::vector<std::string>& offending) {
    if (!section.is_object()) {
        offending.push_back(name + " (must be an object)");
        return;
    }
    for (auto it = section.begin(); it != section.end(); ++it)
        if (!known.count(it.key())) offending.push_back(name + "." + it.key());
}

inline Vec json_vec(const nlohmann::json& j) { return j.get<Vec>(); }

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::string& origin) {
    if (!j.is_object()) throw ConfigError(origin + ": config root must be a JSON object");
    static const std::set<std::string> kSections{"oracle", "prior", "kernel", "pair",
                                                 "loss",   "train", "eval"};
    std::vector<std::string> offending;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!kSections.count(it.key())) offending.push_back(it.key());

    ExperimentConfig cfg;
    try {
        if (j.contains("oracle")) {
            detail::check_keys(j["oracle"], "oracle", {"kind"}, offending);
            if (j["oracle"].contains("kind"))
                cfg.oracle_kind = oracle_kind_from_string(j["oracle"]["kind"].get<std::string>());
        }
        if (j.contains("prior")) {
            detail::check_keys(j["prior"], "prior", {"kind", "lower", "upper"}, offending);
            const auto& p = j["prior"];
            if (p.contains("kind") && p["kind"].get<std::string>() != "box_uniform")
                offending.push_back("prior.kind (only box_uniform is supported)");
            Vec lower = p.contains("lower") ? detail::json_vec(p["lower"]) : cfg.prior.lower;
            Vec upper = p.contains("upper") ? detail::json_vec(p["upper"]) : cfg.prior.upper;
            cfg.prior = make_box_prior(lower, upper);
        }
        if (j.contains("kernel")) {
            detail::check_keys(j["kernel"], "kernel", {"kind", "widths"}, offending);
            const auto& k = j["kernel"];
            KernelKind kind = k.contains("kind") ? kernel_kind_from_string(k["kind"].get<std::string>())
                                                 : cfg.kernel.kind;
            Vec widths = k.contains("widths") ? detail::json_vec(k["widths"]) : cfg.kernel.widths.constant;
            cfg.kernel = make_kernel(kind, widths);
        }
        if (j.contains("pair")) {
            detail::check_keys(j["pair"], "pair", {"kernel", "widths", "theta_ref"}, offending);
            const auto& p = j["pair"];
            if (p.contains("kernel")) cfg.pair_kernel_kind = kernel_kind_from_string(p["kernel"].get<std::string>());
            if (p.contains("widths")) cfg.pair_widths = detail::json_vec(p["widths"]);
            if (p.contains("theta_ref")) cfg.theta_ref = detail::json_vec(p["theta_ref"]);
        }
        if (j.contains("loss")) {
            detail::check_keys(j["loss"], "loss", {"score", "ratio", "with_latent"}, offending);
            const auto& l = j["loss"];
            if (l.contains("score")) cfg.score_loss = loss_kind_from_string(l["score"].get<std::string>());
            if (l.contains("ratio")) cfg.ratio_loss = loss_kind_from_string(l["ratio"].get<std::string>());
            if (l.contains("with_latent")) cfg.with_latent = l["with_latent"].get<bool>();
        }
        if (j.contains("train")) {
            detail::check_keys(j["train"], "train",
                               {"n_train", "epochs", "batch_size", "learning_rate", "beta1", "beta2",
                                "epsilon", "validation_fraction", "n_seeds", "hidden"},
                               offending);
            const auto& t = j["train"];
            if (t.contains("n_train")) cfg.n_train = t["n_train"].get<size_t>();
            if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
            if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
            if (t.contains("learning_rate")) cfg.train.adam.learning_rate = t["learning_rate"].get<double>();
            if (t.contains("beta1")) cfg.train.adam.beta1 = t["beta1"].get<double>();
            if (t.contains("beta2")) cfg.train.adam.beta2 = t["beta2"].get<double>();
            if (t.contains("epsilon")) cfg.train.adam.epsilon = t["epsilon"].get<double>();
            if (t.contains("validation_fraction"))
                cfg.train.validation_fraction = t["validation_fraction"].get<double>();
            if (t.contains("n_seeds")) cfg.n_seeds = t["n_seeds"].get<int>();
            if (t.contains("hidden")) cfg.hidden = t["hidden"].get<std::vector<int>>();
        }
        if (j.contains("eval")) {
            detail::check_keys(j["eval"], "eval", {"n_eval"}, offending);
            if (j["eval"].contains("n_eval")) cfg.n_eval = j["eval"]["n_eval"].get<size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(origin + ": malformed value: " + e.what());
    }

    if (!offending.empty()) {
        std::string msg = origin + ": unknown or invalid config keys:";
        for (const auto& k : offending) msg += " " + k;
        throw ConfigError(msg);
    }

    cfg.hash = fnv1a_hash(j.dump());
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return parse_experiment_config(j, path);
}

inline TaskSpec task_from_config(const ExperimentConfig& cfg, TaskId id) {
    TaskSpec task;
    task.id = id;
    task.oracle = make_oracle(cfg.oracle_kind);
    task.prior = cfg.prior;
    task.kernel = cfg.kernel;
    task.pair_kernel = make_kernel(cfg.pair_kernel_kind, cfg.pair_widths);
    task.loss = id == TaskId::Kse ? cfg.score_loss : cfg.ratio_loss;
    task.with_latent = id != TaskId::Kse && cfg.with_latent;
    task.n_train = cfg.n_train;
    task.n_eval = cfg.n_eval;
    task.n_seeds = cfg.n_seeds;
    task.train = cfg.train;
    if (task.prior.dim() != task.oracle.param_dim)
        throw ConfigError("prior dimension does not match the oracle parameter dimension");
    return task;
}

}  // namespace isn
