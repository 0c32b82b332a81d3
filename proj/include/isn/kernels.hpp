#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "isn/core.hpp"
#include "isn/rng.hpp"

namespace isn {

// Width parameters of a kernel as a function of the parameter point.
// Constant widths cover everything v1 ships; parameter-dependent widths plug
// in through the hook.
struct WidthFn {
    Vec constant;
    std::function<Vec(const Vec&)> hook;

    Vec operator()(const Vec& theta) const {
        Vec w = hook ? hook(theta) : constant;
        for (double wi : w)
            if (!(wi > 0.0)) throw DomainError("kernel widths must be strictly positive");
        return w;
    }

    int dim() const { return static_cast<int>(constant.size()); }
};

enum class KernelKind { Rectangular, Delta };

inline std::string to_string(KernelKind k) { return k == KernelKind::Rectangular ? "rectangular" : "delta"; }

inline KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "rectangular") return KernelKind::Rectangular;
    if (s == "delta") return KernelKind::Delta;
    throw ParseError("unknown kernel kind: " + s);
}

// Symmetric per-axis kernel for parameter displacements. The standard-width
// variable u_i lives on [-1, 1): uniform for the rectangular kernel, +/-1 for
// the delta kernel.
struct KernelSpec {
    KernelKind kind = KernelKind::Delta;
    WidthFn widths;

    // Variance of u_i under the standard-width kernel (same for every axis).
    double sigma_sq() const { return kind == KernelKind::Rectangular ? 1.0 / 3.0 : 1.0; }

    int dim() const { return widths.dim(); }
};

inline KernelSpec make_kernel(KernelKind kind, Vec constant_widths) {
    KernelSpec k;
    k.kind = kind;
    k.widths.constant = std::move(constant_widths);
    return k;
}

inline Vec sample_u(const KernelSpec& kernel, Rng& rng) {
    Vec u(kernel.dim());
    for (double& ui : u)
        ui = kernel.kind == KernelKind::Rectangular ? rng.uniform(-1.0, 1.0) : (rng.bernoulli() ? 1.0 : -1.0);
    return u;
}

// Difference functions psi_i(eps): odd in eps_i, even in every other axis.
// Only the linear choice ships; the tag keeps the file format extensible.
struct DifferenceFunction {
    enum class Kind { Linear } kind = Kind::Linear;

    double eval(int i, const Vec& eps) const { return eps[i]; }
};

// Independent uniform box prior.
struct PriorSpec {
    Vec lower;
    Vec upper;

    int dim() const { return static_cast<int>(lower.size()); }

    bool contains(const Vec& theta) const {
        for (size_t i = 0; i < lower.size(); ++i)
            if (theta[i] < lower[i] || theta[i] >= upper[i]) return false;
        return true;
    }
};

inline PriorSpec make_box_prior(Vec lower, Vec upper) {
    if (lower.size() != upper.size()) throw ShapeError("prior bounds must have equal dimension");
    for (size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] < upper[i])) throw DomainError("prior requires lower < upper componentwise");
    return PriorSpec{std::move(lower), std::move(upper)};
}

inline Vec prior_sample(const PriorSpec& prior, Rng& rng) {
    Vec theta(prior.dim());
    for (int i = 0; i < prior.dim(); ++i) theta[i] = rng.uniform(prior.lower[i], prior.upper[i]);
    return theta;
}

inline double prior_density(const PriorSpec& prior, const Vec& theta) {
    if (!prior.contains(theta)) return 0.0;
    double density = 1.0;
    for (int i = 0; i < prior.dim(); ++i) density /= prior.upper[i] - prior.lower[i];
    return density;
}

// w(theta, eps) = pi(theta) / pi(theta + eps) for an arbitrary density.
inline double pair_weight(const std::function<double(const Vec&)>& density, const Vec& theta,
                          const Vec& eps) {
    Vec shifted(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) shifted[i] = theta[i] + eps[i];
    double denom = density(shifted);
    if (!(denom > 0.0)) throw DomainError("degenerate weight: prior vanishes at theta + eps");
    return density(theta) / denom;
}

inline double pair_weight(const PriorSpec& prior, const Vec& theta, const Vec& eps) {
    return pair_weight([&prior](const Vec& t) { return prior_density(prior, t); }, theta, eps);
}

enum class PairKind { Iid, Reference, KernelCorrelated };

inline std::string to_string(PairKind k) {
    switch (k) {
        case PairKind::Iid: return "iid";
        case PairKind::Reference: return "reference";
        case PairKind::KernelCorrelated: return "kernel_correlated";
    }
    return "iid";
}

inline PairKind pair_kind_from_string(const std::string& s) {
    if (s == "iid") return PairKind::Iid;
    if (s == "reference") return PairKind::Reference;
    if (s == "kernel_correlated") return PairKind::KernelCorrelated;
    throw ParseError("unknown pair distribution kind: " + s);
}

// Joint distribution of (theta0, theta1) used by the pair-classification
// pipelines. KernelCorrelated realizes the symmetrized mixture by drawing the
// anchor index uniformly; the partner may leave the prior box on purpose.
struct PairDistribution {
    PairKind kind = PairKind::Iid;
    PriorSpec prior;
    Vec theta_ref;       // Reference only
    KernelSpec kernel;   // KernelCorrelated only
};

inline std::pair<Vec, Vec> sample_pair(const PairDistribution& pd, Rng& rng) {
    switch (pd.kind) {
        case PairKind::Iid:
            return {prior_sample(pd.prior, rng), prior_sample(pd.prior, rng)};
        case PairKind::Reference:
            return {prior_sample(pd.prior, rng), pd.theta_ref};
        case PairKind::KernelCorrelated: {
            Vec anchor = prior_sample(pd.prior, rng);
            Vec widths = pd.kernel.widths(anchor);
            Vec u = sample_u(pd.kernel, rng);
            Vec partner(anchor.size());
            for (size_t i = 0; i < anchor.size(); ++i) partner[i] = anchor[i] + widths[i] * u[i];
            if (rng.bernoulli()) return {anchor, partner};
            return {partner, anchor};
        }
    }
    throw DomainError("unreachable pair kind");
}

}  // namespace isn
