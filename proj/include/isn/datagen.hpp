#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isn/core.hpp"
#include "isn/kernels.hpp"
#include "isn/oracles.hpp"
#include "isn/rng.hpp"

namespace isn {

// One score-regression row: regress target on (x, theta) with a sample weight.
struct ScoreExample {
    Vec x;
    Vec theta;
    Vec target;
    double weight = 1.0;
};

// One ratio-classification row; r_lat is attached when the oracle exposes a
// latent channel.
struct RatioExample {
    Vec x;
    Vec theta0;
    Vec theta1;
    int label = 0;
    std::optional<double> r_lat;
};

enum class DatasetKind { Score, Ratio, Events };

struct GenerationCounters {
    long domain_redraws = 0;
    long boundary_redraws = 0;
    long dropped_zero_weight = 0;
};

// Generation-time quantities kept alongside plain-KSE rows so tests can
// recompute targets from first principles. Not serialized.
struct ScoreGenAux {
    Vec u;
    Vec lambda;
    double sigma_sq = 1.0;
};

struct Dataset {
    DatasetKind kind = DatasetKind::Score;
    std::string task;  // kse | kse_alt | klre | carl | events
    bool has_latent = false;
    std::vector<ScoreExample> score;
    std::vector<RatioExample> ratio;
    std::vector<Vec> events;
    GenerationCounters counters;
    std::vector<ScoreGenAux> score_aux;

    size_t size() const {
        switch (kind) {
            case DatasetKind::Score: return score.size();
            case DatasetKind::Ratio: return ratio.size();
            case DatasetKind::Events: return events.size();
        }
        return 0;
    }
};

// Score-regression rows: theta ~ prior, u ~ K, eps = lambda(theta) * u,
// x ~ p(. ; theta + eps), target_i = u_i / (lambda_i(theta) sigma_i^2).
// Parameter points pushed outside the oracle domain are redrawn and counted.
inline Dataset generate_kse(const OracleModel& oracle, const PriorSpec& prior, const KernelSpec& kernel,
                            size_t n, Rng& rng) {
    if (kernel.dim() != prior.dim() || prior.dim() != oracle.param_dim)
        throw ShapeError("prior/kernel dimension does not match the oracle parameter dimension");
    Dataset ds;
    ds.kind = DatasetKind::Score;
    ds.task = "kse";
    OracleDiagnostics diag;
    double sigma_sq = kernel.sigma_sq();
    ds.score.reserve(n);
    ds.score_aux.reserve(n);
    while (ds.score.size() < n) {
        Vec theta = prior_sample(prior, rng);
        Vec lambda = kernel.widths(theta);
        Vec u = sample_u(kernel, rng);
        Vec shifted(theta.size());
        for (size_t i = 0; i < theta.size(); ++i) shifted[i] = theta[i] + lambda[i] * u[i];
        if (!oracle.valid_theta(shifted)) {
            ds.counters.domain_redraws += 1;
            continue;
        }
        ScoreExample ex;
        ex.x = oracle.sample(shifted, rng, &diag);
        ex.theta = theta;
        ex.target.resize(theta.size());
        for (size_t i = 0; i < theta.size(); ++i) ex.target[i] = u[i] / (lambda[i] * sigma_sq);
        ds.score.push_back(std::move(ex));
        ds.score_aux.push_back({u, lambda, sigma_sq});
    }
    ds.counters.boundary_redraws = diag.boundary_redraws;
    return ds;
}

// Width hook for the reweighted pipeline; may depend on the event as well.
using EventWidthFn = std::function<Vec(const Vec& x, const Vec& theta)>;

// Weighted score-regression rows sampled the other way around: theta' ~ prior,
// x ~ p(. ; theta'), eps = lambda(x, theta') * u, theta = theta' - eps.
// Target carries the width ratio, weight is pi(theta)/pi(theta + eps).
// Zero-weight rows (theta escaped the prior support) are dropped and counted;
// they would contribute nothing to the weighted regression.
inline Dataset generate_kse_alt(const OracleModel& oracle, const PriorSpec& prior, const KernelSpec& kernel,
                                size_t n, Rng& rng, const EventWidthFn& widths_xtheta = nullptr) {
    if (kernel.dim() != prior.dim() || prior.dim() != oracle.param_dim)
        throw ShapeError("prior/kernel dimension does not match the oracle parameter dimension");
    Dataset ds;
    ds.kind = DatasetKind::Score;
    ds.task = "kse_alt";
    OracleDiagnostics diag;
    double sigma_sq = kernel.sigma_sq();
    auto widths_at = [&](const Vec& x, const Vec& theta) {
        return widths_xtheta ? widths_xtheta(x, theta) : kernel.widths(theta);
    };
    ds.score.reserve(n);
    while (ds.score.size() < n) {
        Vec source = prior_sample(prior, rng);
        Vec x = oracle.sample(source, rng, &diag);
        Vec lambda_source = widths_at(x, source);
        Vec u = sample_u(kernel, rng);
        Vec eps(source.size()), theta(source.size());
        for (size_t i = 0; i < source.size(); ++i) {
            eps[i] = lambda_source[i] * u[i];
            theta[i] = source[i] - eps[i];
        }
        double denom = prior_density(prior, source);
        if (!(denom > 0.0)) {
            ds.counters.dropped_zero_weight += 1;
            continue;
        }
        double weight = prior_density(prior, theta) / denom;
        if (!(weight > 0.0)) {
            ds.counters.dropped_zero_weight += 1;
            continue;
        }
        Vec lambda_center = widths_at(x, theta);
        ScoreExample ex;
        ex.x = std::move(x);
        ex.theta = theta;
        ex.weight = weight;
        ex.target.resize(theta.size());
        for (size_t i = 0; i < theta.size(); ++i) {
            double ratio = (lambda_center[i] * lambda_center[i]) / (lambda_source[i] * lambda_source[i]);
            double eps_sq_mean = lambda_center[i] * lambda_center[i] * sigma_sq;
            ex.target[i] = ratio * eps[i] / eps_sq_mean;
        }
        ds.score.push_back(std::move(ex));
        ds.score_aux.push_back({u, lambda_source, sigma_sq});
    }
    ds.counters.boundary_redraws = diag.boundary_redraws;
    return ds;
}

// Ratio-classification rows: (theta0, theta1) ~ pair distribution,
// y ~ Bernoulli(1/2), x ~ p(. ; theta_y). Pairs outside the oracle domain are
// redrawn and counted.
inline Dataset generate_ratio(const OracleModel& oracle, const PairDistribution& pairs, size_t n, Rng& rng,
                              bool with_latent = false) {
    if (pairs.prior.dim() != oracle.param_dim)
        throw ShapeError("pair distribution dimension does not match the oracle parameter dimension");
    if (with_latent && !oracle.can_latent_ratio)
        throw ConfigError("latent supervision requested but oracle " + to_string(oracle.kind) +
                          " has no latent channel");
    Dataset ds;
    ds.kind = DatasetKind::Ratio;
    ds.task = pairs.kind == PairKind::KernelCorrelated ? "klre" : "carl";
    ds.has_latent = with_latent;
    OracleDiagnostics diag;
    ds.ratio.reserve(n);
    while (ds.ratio.size() < n) {
        auto [theta0, theta1] = sample_pair(pairs, rng);
        if (!oracle.valid_theta(theta0) || !oracle.valid_theta(theta1)) {
            ds.counters.domain_redraws += 1;
            continue;
        }
        RatioExample ex;
        ex.label = rng.bernoulli() ? 1 : 0;
        const Vec& source = ex.label == 0 ? theta0 : theta1;
        if (with_latent) {
            LatentEvent ev = oracle.sample_latent(source, rng);
            ex.x = std::move(ev.x);
            ex.r_lat = std::exp(oracle.latent_log_ratio(ev.z, theta0, theta1));
        } else {
            ex.x = oracle.sample(source, rng, &diag);
        }
        ex.theta0 = std::move(theta0);
        ex.theta1 = std::move(theta1);
        ds.ratio.push_back(std::move(ex));
    }
    ds.counters.boundary_redraws = diag.boundary_redraws;
    return ds;
}

inline Dataset generate_events(const OracleModel& oracle, const Vec& theta, size_t n, Rng& rng) {
    if (!oracle.valid_theta(theta)) throw DomainError("theta outside the oracle domain");
    Dataset ds;
    ds.kind = DatasetKind::Events;
    ds.task = "events";
    OracleDiagnostics diag;
    ds.events.reserve(n);
    for (size_t i = 0; i < n; ++i) ds.events.push_back(oracle.sample(theta, rng, &diag));
    ds.counters.boundary_redraws = diag.boundary_redraws;
    return ds;
}

// With a bounded-support kernel the regression target is capped at
// 1/(lambda_i sigma_i^2); predictions piling up against the cap indicate the
// kernel width biases the estimate.
struct SaturationReport {
    long checked = 0;
    long saturated = 0;
    double threshold = 0.95;

    bool warning() const { return saturated > 0; }
    double fraction() const { return checked == 0 ? 0.0 : static_cast<double>(saturated) / checked; }
};

inline SaturationReport check_score_saturation(const KernelSpec& kernel, const std::vector<Vec>& thetas,
                                               const std::vector<Vec>& predictions, double threshold = 0.95) {
    SaturationReport report;
    report.threshold = threshold;
    double sigma_sq = kernel.sigma_sq();
    for (size_t row = 0; row < predictions.size(); ++row) {
        Vec lambda = kernel.widths(thetas[row]);
        for (size_t i = 0; i < predictions[row].size(); ++i) {
            report.checked += 1;
            double bound = 1.0 / (lambda[i] * sigma_sq);
            if (std::abs(predictions[row][i]) >= threshold * bound) report.saturated += 1;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Dataset file format: one header row carrying the schema id, task kind, row
// count and column names, then one row per example. Numbers are written as
// decimal with 17 significant digits so reloading is value-exact.
// ---------------------------------------------------------------------------

namespace detail {

constexpr const char* kDatasetSchema = "isn-dataset-v1";

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> dataset_columns(const Dataset& ds, int event_dim, int param_dim) {
    std::vector<std::string> cols;
    auto push_block = [&cols](const std::string& stem, int n) {
        for (int i = 1; i <= n; ++i) cols.push_back(stem + std::to_string(i));
    };
    push_block("x", event_dim);
    if (ds.kind == DatasetKind::Score) {
        push_block("theta", param_dim);
        push_block("y", param_dim);
        cols.push_back("weight");
    } else if (ds.kind == DatasetKind::Ratio) {
        push_block("theta0_", param_dim);
        push_block("theta1_", param_dim);
        cols.push_back("label");
        if (ds.has_latent) cols.push_back("r_lat");
    }
    return cols;
}

}  // namespace detail

inline void dataset_save(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open dataset file for writing: " + path);
    int event_dim = 0, param_dim = 0;
    if (ds.kind == DatasetKind::Score && !ds.score.empty()) {
        event_dim = static_cast<int>(ds.score[0].x.size());
        param_dim = static_cast<int>(ds.score[0].theta.size());
    } else if (ds.kind == DatasetKind::Ratio && !ds.ratio.empty()) {
        event_dim = static_cast<int>(ds.ratio[0].x.size());
        param_dim = static_cast<int>(ds.ratio[0].theta0.size());
    } else if (ds.kind == DatasetKind::Events && !ds.events.empty()) {
        event_dim = static_cast<int>(ds.events[0].size());
    }

    out << detail::kDatasetSchema << " task=" << ds.task << " n=" << ds.size() << " columns=";
    auto cols = detail::dataset_columns(ds, event_dim, param_dim);
    for (size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";

    auto write_vec = [&out](const Vec& v, bool lead_space) {
        for (size_t i = 0; i < v.size(); ++i)
            out << (lead_space || i ? " " : "") << detail::format_double(v[i]);
    };
    if (ds.kind == DatasetKind::Score) {
        for (const auto& ex : ds.score) {
            write_vec(ex.x, false);
            write_vec(ex.theta, true);
            write_vec(ex.target, true);
            out << " " << detail::format_double(ex.weight) << "\n";
        }
    } else if (ds.kind == DatasetKind::Ratio) {
        for (const auto& ex : ds.ratio) {
            write_vec(ex.x, false);
            write_vec(ex.theta0, true);
            write_vec(ex.theta1, true);
            out << " " << ex.label;
            if (ds.has_latent) out << " " << detail::format_double(ex.r_lat.value());
            out << "\n";
        }
    } else {
        for (const auto& ex : ds.events) {
            write_vec(ex, false);
            out << "\n";
        }
    }
    if (!out) throw IoError("failed while writing dataset file: " + path);
}

inline Dataset dataset_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw ParseError(path + ":1: empty dataset file");

    std::istringstream hs(header);
    std::string schema, task_field, n_field, cols_field;
    hs >> schema >> task_field >> n_field >> cols_field;
    if (schema != detail::kDatasetSchema) {
        if (schema.rfind("isn-dataset-", 0) == 0)
            throw ParseError(path + ":1: unsupported dataset schema version '" + schema + "' (expected " +
                             detail::kDatasetSchema + ")");
        throw ParseError(path + ":1: not a dataset file (schema id missing)");
    }
    auto field_value = [&path](const std::string& field, const std::string& key) {
        if (field.rfind(key + "=", 0) != 0)
            throw ParseError(path + ":1: malformed header, expected '" + key + "=...'");
        return field.substr(key.size() + 1);
    };
    std::string task = field_value(task_field, "task");
    size_t expected_rows = std::stoull(field_value(n_field, "n"));
    std::string columns = field_value(cols_field, "columns");

    Dataset ds;
    ds.task = task;
    if (task == "kse" || task == "kse_alt")
        ds.kind = DatasetKind::Score;
    else if (task == "klre" || task == "carl")
        ds.kind = DatasetKind::Ratio;
    else if (task == "events")
        ds.kind = DatasetKind::Events;
    else
        throw ParseError(path + ":1: unknown task kind '" + task + "'");
    ds.has_latent = columns.find("r_lat") != std::string::npos;

    // Column blocks are recovered by counting stems in the header.
    auto count_stem = [&columns](const std::string& stem) {
        int n = 0;
        size_t pos = 0;
        std::string token;
        std::string padded = columns + ",";
        while ((pos = padded.find(',')) != std::string::npos) {
            token = padded.substr(0, pos);
            padded.erase(0, pos + 1);
            if (token.rfind(stem, 0) == 0 &&
                token.find_first_not_of("0123456789", stem.size()) == std::string::npos)
                ++n;
        }
        return n;
    };
    int event_dim = count_stem("x");
    int param_dim = ds.kind == DatasetKind::Score ? count_stem("theta") : count_stem("theta0_");

    std::string line;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        auto read_vec = [&](int n) {
            Vec v(n);
            for (int i = 0; i < n; ++i)
                if (!(ls >> v[i]))
                    throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(n) + " numeric fields");
            return v;
        };
        if (ds.kind == DatasetKind::Score) {
            ScoreExample ex;
            ex.x = read_vec(event_dim);
            ex.theta = read_vec(param_dim);
            ex.target = read_vec(param_dim);
            if (!(ls >> ex.weight))
                throw ParseError(path + ":" + std::to_string(line_no) + ": missing weight field");
            ds.score.push_back(std::move(ex));
        } else if (ds.kind == DatasetKind::Ratio) {
            RatioExample ex;
            ex.x = read_vec(event_dim);
            ex.theta0 = read_vec(param_dim);
            ex.theta1 = read_vec(param_dim);
            if (!(ls >> ex.label) || (ex.label != 0 && ex.label != 1))
                throw ParseError(path + ":" + std::to_string(line_no) + ": label must be 0 or 1");
            if (ds.has_latent) {
                double r_lat;
                if (!(ls >> r_lat))
                    throw ParseError(path + ":" + std::to_string(line_no) + ": missing r_lat field");
                ex.r_lat = r_lat;
            }
            ds.ratio.push_back(std::move(ex));
        } else {
            ds.events.push_back(read_vec(event_dim));
        }
    }
    if (ds.size() != expected_rows)
        throw ParseError(path + ": header announces " + std::to_string(expected_rows) + " rows but " +
                         std::to_string(ds.size()) + " were read");
    return ds;
}

}  // namespace isn
