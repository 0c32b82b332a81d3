#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "isn/core.hpp"
#include "isn/kernels.hpp"

namespace isn {

using LogRatioFn = std::function<double(const Vec& x, const Vec& theta0, const Vec& theta1)>;
using ScoreFn = std::function<Vec(const Vec& x, const Vec& theta)>;

enum class SearchMethod { Grid, Gradient };

inline SearchMethod search_method_from_string(const std::string& s) {
    if (s == "grid") return SearchMethod::Grid;
    if (s == "gradient") return SearchMethod::Gradient;
    throw ConfigError("unknown search method '" + s + "' (valid: grid, gradient)");
}

struct SearchConfig {
    SearchMethod method = SearchMethod::Grid;
    PriorSpec region;                // search box; defaults to the prior box
    double grid_step = 0.05;         // final grid resolution
    double gradient_step = 0.01;     // fixed ascent step
    int gradient_iterations = 500;
};

struct TraceRow {
    int iteration = 0;
    Vec theta;
    double objective = 0.0;
};

struct EstimateResult {
    Vec theta_hat;
    double objective = 0.0;
    std::vector<TraceRow> trace;
    bool warning = false;
    std::string warning_text;
};

// Mean negative log-ratio objective of the maximum-likelihood fit.
inline double mle_objective(const LogRatioFn& log_ratio, const std::vector<Vec>& events,
                            const Vec& theta_prime, const Vec& theta_ref) {
    double acc = 0.0;
    for (const Vec& x : events) acc -= log_ratio(x, theta_prime, theta_ref);
    return acc / static_cast<double>(events.size());
}

namespace detail {

inline double softplus_stable(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }

// Coarse-to-fine grid scan: each level re-centers a shrinking window on the
// best point of the previous level until the requested resolution is reached.
template <typename Objective>
EstimateResult grid_search(const Objective& objective, const SearchConfig& cfg) {
    int d = cfg.region.dim();
    Vec widths(d);
    double max_width = 0.0;
    for (int i = 0; i < d; ++i) {
        widths[i] = cfg.region.upper[i] - cfg.region.lower[i];
        max_width = std::max(max_width, widths[i]);
    }
    std::vector<double> steps{cfg.grid_step};
    while (steps.back() * 3.0 < max_width / 3.0) steps.push_back(steps.back() * 3.0);

    Vec lo = cfg.region.lower, hi = cfg.region.upper;
    EstimateResult result;
    Vec best;
    double best_value = std::numeric_limits<double>::infinity();
    for (int level = static_cast<int>(steps.size()) - 1; level >= 0; --level) {
        double step = steps[level];
        std::vector<Vec> axes(d);
        for (int i = 0; i < d; ++i)
            for (double v = lo[i]; v <= hi[i] + 1e-12; v += step)
                axes[i].push_back(std::min(v, cfg.region.upper[i]));

        std::vector<size_t> cursor(d, 0);
        Vec point(d);
        for (;;) {
            for (int i = 0; i < d; ++i) point[i] = axes[i][cursor[i]];
            double value = objective(point);
            if (value < best_value) {
                best_value = value;
                best = point;
            }
            int axis = 0;
            while (axis < d && ++cursor[axis] == axes[axis].size()) cursor[axis++] = 0;
            if (axis == d) break;
        }
        result.trace.push_back({static_cast<int>(steps.size()) - 1 - level, best, best_value});
        for (int i = 0; i < d; ++i) {
            lo[i] = std::max(cfg.region.lower[i], best[i] - 1.5 * step);
            hi[i] = std::min(cfg.region.upper[i], best[i] + 1.5 * step);
        }
    }
    result.theta_hat = best;
    result.objective = best_value;
    return result;
}

inline Vec clip_to_region(Vec theta, const PriorSpec& region) {
    for (int i = 0; i < region.dim(); ++i) {
        // keep strictly inside the half-open box
        double hi = region.upper[i] - 1e-9 * (region.upper[i] - region.lower[i]);
        theta[i] = std::min(std::max(theta[i], region.lower[i]), hi);
    }
    return theta;
}

// Fixed-step descent projected onto the search box. gradient() must return
// the gradient of the objective being minimized.
template <typename Objective, typename Gradient>
EstimateResult gradient_search(const Objective& objective, const Gradient& gradient,
                               const SearchConfig& cfg) {
    int d = cfg.region.dim();
    Vec theta(d);
    for (int i = 0; i < d; ++i) theta[i] = 0.5 * (cfg.region.lower[i] + cfg.region.upper[i]);
    EstimateResult result;
    for (int it = 0; it < cfg.gradient_iterations; ++it) {
        Vec g = gradient(theta);
        if (!all_finite(g)) throw DivergenceError("gradient search diverged at iteration " + std::to_string(it));
        for (int i = 0; i < d; ++i) theta[i] -= cfg.gradient_step * g[i];
        theta = clip_to_region(std::move(theta), cfg.region);
        if (it % 25 == 0 || it == cfg.gradient_iterations - 1)
            result.trace.push_back({it, theta, objective(theta)});
    }
    result.theta_hat = theta;
    result.objective = objective(theta);
    return result;
}

inline void flag_degenerate(EstimateResult& result, size_t n) {
    if (n == 1) {
        result.warning = true;
        result.warning_text = "single-event dataset: the estimate is not statistically meaningful";
    }
}

}  // namespace detail

// Maximum-likelihood fit through a reference point: minimizes
// -(1/N) sum ln r(x_i; theta', theta_ref) over the search region. The
// gradient method uses -(1/N) sum s(x_i; theta') as the objective gradient
// and needs a score head.
inline EstimateResult mle_estimate(const LogRatioFn& log_ratio, const std::vector<Vec>& events,
                                   const Vec& theta_ref, const SearchConfig& cfg,
                                   const ScoreFn& score = nullptr) {
    if (events.empty()) throw DomainError("mle_estimate: empty dataset");
    auto objective = [&](const Vec& theta) { return mle_objective(log_ratio, events, theta, theta_ref); };
    EstimateResult result;
    if (cfg.method == SearchMethod::Grid) {
        result = detail::grid_search(objective, cfg);
    } else {
        if (!score) throw ConfigError("gradient search needs a score function");
        auto gradient = [&](const Vec& theta) {
            Vec g(theta.size(), 0.0);
            for (const Vec& x : events) {
                Vec s = score(x, theta);
                for (size_t i = 0; i < g.size(); ++i) g[i] -= s[i];
            }
            for (double& gi : g) gi /= static_cast<double>(events.size());
            return g;
        };
        result = detail::gradient_search(objective, gradient, cfg);
    }
    detail::flag_degenerate(result, events.size());
    return result;
}

// Two-term binary cross-entropy objective against a reference sample drawn at
// theta_ref.
inline double bce_objective(const LogRatioFn& log_ratio, const std::vector<Vec>& data,
                            const std::vector<Vec>& ref_data, const Vec& theta_prime,
                            const Vec& theta_ref) {
    double acc = 0.0;
    for (const Vec& x : data) acc += detail::softplus_stable(-log_ratio(x, theta_prime, theta_ref)) /
                                     static_cast<double>(data.size());
    for (const Vec& x : ref_data) acc += detail::softplus_stable(log_ratio(x, theta_prime, theta_ref)) /
                                         static_cast<double>(ref_data.size());
    return acc;
}

inline Vec bce_objective_gradient(const LogRatioFn& log_ratio, const ScoreFn& score,
                                  const std::vector<Vec>& data, const std::vector<Vec>& ref_data,
                                  const Vec& theta_prime, const Vec& theta_ref) {
    Vec g(theta_prime.size(), 0.0);
    for (const Vec& x : data) {
        double t = log_ratio(x, theta_prime, theta_ref);
        double w = -1.0 / (1.0 + std::exp(std::min(t, 700.0)));  // -1/(1+r)
        Vec s = score(x, theta_prime);
        for (size_t i = 0; i < g.size(); ++i) g[i] += w * s[i] / static_cast<double>(data.size());
    }
    for (const Vec& x : ref_data) {
        double t = log_ratio(x, theta_prime, theta_ref);
        double w = 1.0 / (1.0 + std::exp(std::min(-t, 700.0)));  // r/(1+r)
        Vec s = score(x, theta_prime);
        for (size_t i = 0; i < g.size(); ++i) g[i] += w * s[i] / static_cast<double>(ref_data.size());
    }
    return g;
}

inline EstimateResult bce_estimate(const LogRatioFn& log_ratio, const std::vector<Vec>& data,
                                   const std::vector<Vec>& ref_data, const Vec& theta_ref,
                                   const SearchConfig& cfg, const ScoreFn& score = nullptr) {
    if (data.empty() || ref_data.empty()) throw DomainError("bce_estimate: empty dataset");
    auto objective = [&](const Vec& theta) {
        return bce_objective(log_ratio, data, ref_data, theta, theta_ref);
    };
    EstimateResult result;
    if (cfg.method == SearchMethod::Grid) {
        result = detail::grid_search(objective, cfg);
    } else {
        if (!score) throw ConfigError("gradient search needs a score function");
        auto gradient = [&](const Vec& theta) {
            return bce_objective_gradient(log_ratio, score, data, ref_data, theta, theta_ref);
        };
        result = detail::gradient_search(objective, gradient, cfg);
    }
    detail::flag_degenerate(result, data.size());
    return result;
}

// Weights that turn a sample drawn at theta0 into an emulation of theta1:
// weight(x) = r(x; theta1, theta0).
inline Vec reweight(const LogRatioFn& log_ratio, const std::vector<Vec>& events_at_theta0,
                    const Vec& theta0, const Vec& theta1) {
    Vec weights;
    weights.reserve(events_at_theta0.size());
    for (const Vec& x : events_at_theta0) weights.push_back(std::exp(log_ratio(x, theta1, theta0)));
    return weights;
}

}  // namespace isn
