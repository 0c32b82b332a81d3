#pragma once

#include <functional>
#include <optional>
#include <string>

#include "isn/core.hpp"
#include "isn/datagen.hpp"

namespace isn {

enum class LossKind {
    Mse,
    Logistic,
    Square,
    Exponential,
    Savage,
    Rolr,
    Alice,
    LatentRolr,
    LatentSquare,
    LatentExponential,
    LatentSavage,
};

inline std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::Mse: return "mse";
        case LossKind::Logistic: return "logistic";
        case LossKind::Square: return "square";
        case LossKind::Exponential: return "exponential";
        case LossKind::Savage: return "savage";
        case LossKind::Rolr: return "rolr";
        case LossKind::Alice: return "alice";
        case LossKind::LatentRolr: return "latent_rolr";
        case LossKind::LatentSquare: return "latent_square";
        case LossKind::LatentExponential: return "latent_exponential";
        case LossKind::LatentSavage: return "latent_savage";
    }
    return "mse";
}

inline LossKind loss_kind_from_string(const std::string& s) {
    for (LossKind k : {LossKind::Mse, LossKind::Logistic, LossKind::Square, LossKind::Exponential,
                       LossKind::Savage, LossKind::Rolr, LossKind::Alice, LossKind::LatentRolr,
                       LossKind::LatentSquare, LossKind::LatentExponential, LossKind::LatentSavage})
        if (to_string(k) == s) return k;
    throw ParseError("unknown loss kind: " + s);
}

// Score losses act on the predicted score vector; every other loss acts on
// ln r_hat, which is the differentiation variable throughout (so r_hat > 0 by
// construction).
inline bool is_score_loss(LossKind k) { return k == LossKind::Mse; }

// Losses that consume the latent joint ratio as a supervisory signal.
inline bool requires_latent(LossKind k) {
    switch (k) {
        case LossKind::Rolr:
        case LossKind::Alice:
        case LossKind::LatentRolr:
        case LossKind::LatentSquare:
        case LossKind::LatentExponential:
        case LossKind::LatentSavage: return true;
        default: return false;
    }
}

// Losses that consume the binary label.
inline bool uses_label(LossKind k) {
    switch (k) {
        case LossKind::Logistic:
        case LossKind::Square:
        case LossKind::Exponential:
        case LossKind::Savage:
        case LossKind::Rolr: return true;
        default: return false;
    }
}

struct LossSpec {
    LossKind kind = LossKind::Mse;
};

// Label-affine classification losses gain a lower-variance twin by replacing
// the binary label with 1/(1+r_lat). The logistic loss becomes ALICE; latent
// kinds are fixed points.
inline LossKind latentify(LossKind base) {
    switch (base) {
        case LossKind::Rolr: return LossKind::LatentRolr;
        case LossKind::Logistic: return LossKind::Alice;
        case LossKind::Square: return LossKind::LatentSquare;
        case LossKind::Exponential: return LossKind::LatentExponential;
        case LossKind::Savage: return LossKind::LatentSavage;
        case LossKind::Alice:
        case LossKind::LatentRolr:
        case LossKind::LatentSquare:
        case LossKind::LatentExponential:
        case LossKind::LatentSavage: return base;
        case LossKind::Mse: break;
    }
    throw ConfigError("latentify: unsupported base loss " + to_string(base));
}

struct ScoreLossResult {
    double value = 0.0;
    Vec grad;  // with respect to the predicted score vector
};

// Weighted mean-square error over score components.
inline ScoreLossResult score_loss_value_and_grad(const Vec& prediction, const ScoreExample& ex) {
    if (prediction.size() != ex.target.size()) throw ShapeError("score prediction/target length mismatch");
    double inv_d = 1.0 / static_cast<double>(prediction.size());
    ScoreLossResult res;
    res.grad.resize(prediction.size());
    for (size_t i = 0; i < prediction.size(); ++i) {
        double diff = prediction[i] - ex.target[i];
        res.value += diff * diff * inv_d;
        res.grad[i] = 2.0 * diff * inv_d * ex.weight;
    }
    res.value *= ex.weight;
    return res;
}

struct RatioLossResult {
    double value = 0.0;
    double grad = 0.0;  // with respect to ln r_hat
    bool clamped = false;
};

namespace detail {

inline double sigmoid(double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

inline double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }

constexpr double kLogRatioClamp = 30.0;

}  // namespace detail

// Value and gradient (in ln r_hat) of a classification/latent loss. The
// effective regression level q is the label for plain losses and
// 1/(1+r_lat) for latent ones; the exponential-family members clamp
// |ln r_hat| at 30 before exponentiating and report it.
inline RatioLossResult ratio_loss_value_and_grad(LossKind kind, double log_ratio, int label,
                                                 std::optional<double> r_lat) {
    if (!std::isfinite(log_ratio)) throw DomainError("non-finite log-ratio prediction");
    if (requires_latent(kind) && !r_lat)
        throw ConfigError("loss " + to_string(kind) + " requires r_lat but the example has none");
    if (r_lat && !(*r_lat > 0.0)) throw DomainError("r_lat must be positive");

    double t = log_ratio;
    double s = detail::sigmoid(t);         // r / (1 + r)
    double q_hat = detail::sigmoid(-t);    // 1 / (1 + r)
    double q_lat = r_lat ? 1.0 / (1.0 + *r_lat) : 0.0;
    double y = static_cast<double>(label);

    RatioLossResult res;
    auto clamped_exp_half = [&res, &t]() {
        double c = t;
        if (std::abs(c) > detail::kLogRatioClamp) {
            c = c > 0.0 ? detail::kLogRatioClamp : -detail::kLogRatioClamp;
            res.clamped = true;
        }
        return std::exp(0.5 * c);
    };
    auto clamped_exp = [&res, &t]() {
        double c = t;
        if (std::abs(c) > detail::kLogRatioClamp) {
            c = c > 0.0 ? detail::kLogRatioClamp : -detail::kLogRatioClamp;
            res.clamped = true;
        }
        return std::exp(c);
    };

    switch (kind) {
        case LossKind::Logistic: {
            res.value = detail::softplus(t) - (1.0 - y) * t;
            res.grad = s - (1.0 - y);
            return res;
        }
        case LossKind::Alice: {
            res.value = detail::softplus(t) - (1.0 - q_lat) * t;
            res.grad = s - (1.0 - q_lat);
            return res;
        }
        case LossKind::Square: {
            double diff = q_hat - y;
            res.value = diff * diff;
            res.grad = -2.0 * diff * s * q_hat;
            return res;
        }
        case LossKind::LatentSquare: {
            double diff = q_hat - q_lat;
            res.value = diff * diff;
            res.grad = -2.0 * diff * s * q_hat;
            return res;
        }
        case LossKind::Exponential:
        case LossKind::LatentExponential: {
            double level = kind == LossKind::Exponential ? y : q_lat;
            double e = clamped_exp_half();
            res.value = level * e + (1.0 - level) / e;
            res.grad = res.clamped ? 0.0 : 0.5 * (level * e - (1.0 - level) / e);
            return res;
        }
        case LossKind::Savage: {
            res.value = y * s * s + (1.0 - y) * q_hat * q_hat;
            res.grad = 2.0 * s * q_hat * (y * s - (1.0 - y) * q_hat);
            return res;
        }
        case LossKind::LatentSavage: {
            res.value = q_lat * s * s + (1.0 - q_lat) * q_hat * q_hat;
            res.grad = 2.0 * s * q_hat * (q_lat * s - (1.0 - q_lat) * q_hat);
            return res;
        }
        case LossKind::Rolr:
        case LossKind::LatentRolr: {
            double level = kind == LossKind::Rolr ? y : q_lat;
            double r = clamped_exp();
            double d_hi = r - *r_lat;
            double d_lo = 1.0 / r - 1.0 / *r_lat;
            res.value = level * d_hi * d_hi + (1.0 - level) * d_lo * d_lo;
            res.grad = res.clamped ? 0.0 : 2.0 * (level * d_hi * r - (1.0 - level) * d_lo / r);
            return res;
        }
        case LossKind::Mse: break;
    }
    throw ConfigError("loss " + to_string(kind) + " does not act on a log-ratio prediction");
}

inline RatioLossResult ratio_loss_value_and_grad(LossKind kind, double log_ratio, const RatioExample& ex) {
    return ratio_loss_value_and_grad(kind, log_ratio, ex.label, ex.r_lat);
}

// ---------------------------------------------------------------------------
// Monte Carlo check of the latent-loss gradient guarantees: replacing the
// label with 1/(1+r_lat) keeps the mean per-example gradient (w.r.t. any one
// network weight) and cannot increase its variance.
// ---------------------------------------------------------------------------

struct VarianceReductionReport {
    double base_mean = 0.0, latent_mean = 0.0;
    double base_var = 0.0, latent_var = 0.0;
    double mean_diff = 0.0, mean_diff_se = 0.0;
    double var_ratio = 0.0, var_ratio_se = 0.0;
    size_t n = 0;

    bool means_agree() const { return std::abs(mean_diff) <= 3.0 * mean_diff_se; }
    bool variance_reduced() const { return latent_var <= base_var * (1.0 + 3.0 * var_ratio_se); }
};

// log_ratio_of and dlogratio_dw evaluate the fixed predictor and the partial
// derivative of its log-ratio output with respect to the designated weight.
inline VarianceReductionReport check_variance_reduction(
    LossKind base, const std::vector<RatioExample>& examples,
    const std::function<double(const RatioExample&)>& log_ratio_of,
    const std::function<double(const RatioExample&)>& dlogratio_dw) {
    LossKind latent = latentify(base);
    size_t n = examples.size();
    if (n < 2) throw DomainError("variance-reduction check needs at least 2 examples");

    Vec g_base(n), g_latent(n), diff(n);
    for (size_t i = 0; i < n; ++i) {
        const RatioExample& ex = examples[i];
        double t = log_ratio_of(ex);
        double dt_dw = dlogratio_dw(ex);
        g_base[i] = ratio_loss_value_and_grad(base, t, ex).grad * dt_dw;
        g_latent[i] = ratio_loss_value_and_grad(latent, t, ex).grad * dt_dw;
        diff[i] = g_latent[i] - g_base[i];
    }

    VarianceReductionReport rep;
    rep.n = n;
    rep.base_mean = mean(g_base);
    rep.latent_mean = mean(g_latent);
    rep.base_var = variance(g_base);
    rep.latent_var = variance(g_latent);
    rep.mean_diff = mean(diff);
    rep.mean_diff_se = standard_error(diff);

    auto variance_se = [](const Vec& v) {
        double m = mean(v);
        double var = variance(v);
        double m4 = 0.0;
        for (double x : v) {
            double d = x - m;
            m4 += d * d * d * d;
        }
        m4 /= static_cast<double>(v.size());
        double spread = m4 - var * var;
        return std::sqrt(std::max(spread, 0.0) / static_cast<double>(v.size()));
    };
    double se_base = variance_se(g_base);
    double se_latent = variance_se(g_latent);
    if (rep.base_var > 0.0) {
        rep.var_ratio = rep.latent_var / rep.base_var;
        double rel_lat = rep.latent_var > 0.0 ? se_latent / rep.latent_var : 0.0;
        double rel_base = se_base / rep.base_var;
        rep.var_ratio_se = std::abs(rep.var_ratio) * std::sqrt(rel_lat * rel_lat + rel_base * rel_base) +
                           se_base / rep.base_var;
    }
    return rep;
}

}  // namespace isn
