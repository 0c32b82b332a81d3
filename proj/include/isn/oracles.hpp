#pragma once

#include <string>

#include "isn/core.hpp"
#include "isn/rng.hpp"
#include "isn/special_functions.hpp"

namespace isn {

enum class OracleKind { Dirichlet3, Gaussian1D, LatentTwoStage };

inline std::string to_string(OracleKind k) {
    switch (k) {
        case OracleKind::Dirichlet3: return "dirichlet3";
        case OracleKind::Gaussian1D: return "gaussian1d";
        case OracleKind::LatentTwoStage: return "latent_two_stage";
    }
    return "dirichlet3";
}

inline OracleKind oracle_kind_from_string(const std::string& s) {
    if (s == "dirichlet3") return OracleKind::Dirichlet3;
    if (s == "gaussian1d") return OracleKind::Gaussian1D;
    if (s == "latent_two_stage") return OracleKind::LatentTwoStage;
    throw ParseError("unknown oracle kind: " + s);
}

struct OracleDiagnostics {
    long boundary_redraws = 0;
};

struct LatentEvent {
    Vec x;
    Vec z;
};

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

inline double normal_log_pdf(double x, double mu, double var) {
    double d = x - mu;
    return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

inline double normal_pdf(double x, double mu, double var) { return std::exp(normal_log_pdf(x, mu, var)); }

// Ground-truth models with exact sampling, log density, score and ratio.
//   Dirichlet3      3-simplex events, 3 positive concentration parameters.
//   Gaussian1D      x ~ N(theta, 1); the 1-d validation model.
//   LatentTwoStage  z ~ N(theta, 1), x = z + N(0, 1); exposes the latent
//                   joint ratio, marginal is N(theta, 2).
struct OracleModel {
    OracleKind kind = OracleKind::Dirichlet3;
    int param_dim = 3;
    int event_dim = 3;
    bool can_log_density = true;
    bool can_score = true;
    bool can_latent_ratio = false;

    bool valid_theta(const Vec& theta) const {
        if (static_cast<int>(theta.size()) != param_dim) return false;
        if (kind == OracleKind::Dirichlet3)
            for (double t : theta)
                if (!(t > 0.0)) return false;
        return true;
    }

    Vec sample(const Vec& theta, Rng& rng, OracleDiagnostics* diag = nullptr) const {
        switch (kind) {
            case OracleKind::Dirichlet3: return dirichlet_sample(theta, rng, diag);
            case OracleKind::Gaussian1D: return {rng.normal(theta[0], 1.0)};
            case OracleKind::LatentTwoStage: return sample_latent(theta, rng).x;
        }
        throw DomainError("unreachable oracle kind");
    }

    LatentEvent sample_latent(const Vec& theta, Rng& rng) const {
        if (kind != OracleKind::LatentTwoStage)
            throw DomainError("oracle has no latent channel: " + to_string(kind));
        double z = rng.normal(theta[0], 1.0);
        double x = z + rng.normal(0.0, 1.0);
        return {{x}, {z}};
    }

    double log_density(const Vec& x, const Vec& theta) const {
        switch (kind) {
            case OracleKind::Dirichlet3: return dirichlet_log_density(x, theta);
            case OracleKind::Gaussian1D: return normal_log_pdf(x[0], theta[0], 1.0);
            case OracleKind::LatentTwoStage: return normal_log_pdf(x[0], theta[0], 2.0);
        }
        throw DomainError("unreachable oracle kind");
    }

    Vec score(const Vec& x, const Vec& theta) const {
        switch (kind) {
            case OracleKind::Dirichlet3: return dirichlet_score(x, theta);
            case OracleKind::Gaussian1D: return {x[0] - theta[0]};
            case OracleKind::LatentTwoStage: return {(x[0] - theta[0]) / 2.0};
        }
        throw DomainError("unreachable oracle kind");
    }

    double log_ratio(const Vec& x, const Vec& theta0, const Vec& theta1) const {
        return log_density(x, theta0) - log_density(x, theta1);
    }

    // log of p_joint(x, z; theta0) / p_joint(x, z; theta1). The x -> z
    // pipeline is Markovian, so only the first stage contributes.
    double latent_log_ratio(const Vec& z, const Vec& theta0, const Vec& theta1) const {
        if (kind != OracleKind::LatentTwoStage)
            throw DomainError("oracle has no latent channel: " + to_string(kind));
        double t0 = theta0[0], t1 = theta1[0];
        return (t0 - t1) * z[0] - 0.5 * (t0 * t0 - t1 * t1);
    }

    static Vec dirichlet_sample(const Vec& theta, Rng& rng, OracleDiagnostics* diag = nullptr) {
        if (theta.size() != 3) throw ShapeError("dirichlet3 expects a 3-dim parameter");
        for (double t : theta)
            if (!(t > 0.0)) throw DomainError("dirichlet parameters must be positive");
        for (;;) {
            Vec x(3);
            double total = 0.0;
            for (int i = 0; i < 3; ++i) {
                x[i] = rng.gamma(theta[i]);
                total += x[i];
            }
            bool interior = total > 0.0;
            for (int i = 0; i < 3 && interior; ++i) {
                x[i] /= total;
                if (!(x[i] > 0.0)) interior = false;
            }
            // Boundary events have probability zero; an underflowed component
            // is redrawn and counted.
            if (interior) return x;
            if (diag) diag->boundary_redraws += 1;
        }
    }

    static double dirichlet_log_density(const Vec& x, const Vec& theta) {
        if (x.size() != 3 || theta.size() != 3) throw ShapeError("dirichlet3 expects 3-dim x and theta");
        double sum_theta = 0.0;
        for (double t : theta) {
            if (!(t > 0.0)) throw DomainError("dirichlet parameters must be positive");
            sum_theta += t;
        }
        double sum_x = x[0] + x[1] + x[2];
        if (std::abs(sum_x - 1.0) > 1e-9) throw DomainError("x does not lie on the simplex");
        for (double xi : x)
            if (!(xi > 0.0)) throw DomainError("boundary event: density is singular at x_i = 0");
        double value = log_gamma(sum_theta);
        for (int i = 0; i < 3; ++i) value += -log_gamma(theta[i]) + (theta[i] - 1.0) * std::log(x[i]);
        return value;
    }

    static Vec dirichlet_score(const Vec& x, const Vec& theta) {
        if (x.size() != 3 || theta.size() != 3) throw ShapeError("dirichlet3 expects 3-dim x and theta");
        for (double xi : x)
            if (!(xi > 0.0)) throw DomainError("boundary event: score undefined at x_i = 0");
        double psi_sum = digamma(theta[0] + theta[1] + theta[2]);
        Vec s(3);
        for (int i = 0; i < 3; ++i) s[i] = std::log(x[i]) + psi_sum - digamma(theta[i]);
        return s;
    }
};

inline OracleModel make_dirichlet3() { return OracleModel{OracleKind::Dirichlet3, 3, 3, true, true, false}; }

inline OracleModel make_gaussian1d() { return OracleModel{OracleKind::Gaussian1D, 1, 1, true, true, false}; }

inline OracleModel make_latent_two_stage() {
    return OracleModel{OracleKind::LatentTwoStage, 1, 1, true, true, true};
}

inline OracleModel make_oracle(OracleKind kind) {
    switch (kind) {
        case OracleKind::Dirichlet3: return make_dirichlet3();
        case OracleKind::Gaussian1D: return make_gaussian1d();
        case OracleKind::LatentTwoStage: return make_latent_two_stage();
    }
    throw DomainError("unreachable oracle kind");
}

// Closed-form kernel score approximation for the unit-variance Gaussian mean
// model with a delta kernel of width lambda and the linear difference
// function. Tends to the true score (x - theta) as lambda -> 0, with an
// O(lambda^2) bias.
inline double gaussian1d_ksa_closed_form(double x, double theta, double lambda) {
    if (!(lambda > 0.0)) throw DomainError("kernel width must be positive");
    double hi = normal_pdf(x, theta + lambda, 1.0);
    double lo = normal_pdf(x, theta - lambda, 1.0);
    return (hi - lo) / (hi + lo) / lambda;
}

}  // namespace isn
