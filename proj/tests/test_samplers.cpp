#include <algorithm>
#include <catch_amalgamated.hpp>

#include "isn/kernels.hpp"

using namespace isn;

namespace {

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(Vec a, Vec b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        double fa = static_cast<double>(i) / a.size();
        double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace

TEST_CASE("delta kernel draws unit-magnitude u on every axis") {
    KernelSpec kernel = make_kernel(KernelKind::Delta, {0.25, 0.25, 0.25});
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        Vec u = sample_u(kernel, rng);
        for (double ui : u) CHECK(std::abs(ui) == 1.0);
    }
}

TEST_CASE("rectangular kernel u has the uniform moments") {
    KernelSpec kernel = make_kernel(KernelKind::Rectangular, {0.25});
    Rng rng(2);
    const size_t n = 100000;
    Vec draws(n);
    for (double& d : draws) d = sample_u(kernel, rng)[0];
    double m = mean(draws);
    double v = variance(draws);
    // mean se = sqrt(1/3/n); variance of u^2 is 1/5 - 1/9 = 4/45
    CHECK(std::abs(m) < 3.0 * std::sqrt(1.0 / 3.0 / n));
    CHECK(std::abs(v - 1.0 / 3.0) < 3.0 * std::sqrt(4.0 / 45.0 / n));
}

TEST_CASE("kernel draws are reflection symmetric") {
    const size_t n = 100000;
    // critical value for p = 0.001 with equal sample sizes
    double d_crit = 1.949 * std::sqrt(2.0 / n);
    for (KernelKind kind : {KernelKind::Rectangular, KernelKind::Delta}) {
        KernelSpec kernel = make_kernel(kind, {0.4, 0.4});
        Rng rng(3);
        Vec u0(n), flipped(n);
        for (size_t i = 0; i < n; ++i) {
            Vec u = sample_u(kernel, rng);
            u0[i] = u[0];
            flipped[i] = -u[1];  // independent axis, sign-flipped
        }
        if (kind == KernelKind::Rectangular) {
            CHECK(ks_statistic(u0, flipped) < d_crit);
        } else {
            // two-point distribution: sign balance is the whole story
            CHECK(std::abs(mean(u0)) < 3.0 / std::sqrt(static_cast<double>(n)));
            CHECK(std::abs(mean(flipped)) < 3.0 / std::sqrt(static_cast<double>(n)));
        }
    }
}

TEST_CASE("difference function parity under axis reflections") {
    DifferenceFunction psi;
    Vec eps{0.3, -0.7, 1.1};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            Vec reflected = eps;
            reflected[j] = -reflected[j];
            double expected = (i == j ? -1.0 : 1.0) * psi.eval(i, eps);
            CHECK(psi.eval(i, reflected) == expected);
        }
    }
}

TEST_CASE("kernel normalization: E[eps_i psi_i] equals lambda^2 sigma^2") {
    // delta kernel: eps_i psi_i = lambda^2 exactly on every draw
    KernelSpec delta = make_kernel(KernelKind::Delta, {0.25});
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        double u = sample_u(delta, rng)[0];
        double eps = 0.25 * u;
        CHECK(eps * eps == 0.0625);
    }
    CHECK(0.25 * 0.25 * delta.sigma_sq() == 0.0625);

    KernelSpec rect = make_kernel(KernelKind::Rectangular, {0.25});
    const size_t n = 200000;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double eps = 0.25 * sample_u(rect, rng)[0];
        acc += eps * eps;
    }
    double expected = 0.25 * 0.25 * rect.sigma_sq();
    CHECK(std::abs(acc / n - expected) / expected < 0.01);
}

TEST_CASE("box prior density and sampling") {
    PriorSpec prior = make_box_prior({0.5, 0.5, 0.5}, {5.0, 5.0, 5.0});
    double expected = std::pow(4.5, -3.0);
    CHECK(prior_density(prior, {1.0, 1.0, 1.0}) == Catch::Approx(expected).epsilon(1e-14));
    CHECK(prior_density(prior, {0.4, 1.0, 1.0}) == 0.0);
    CHECK(prior_density(prior, {1.0, 5.0, 1.0}) == 0.0);  // upper edge excluded

    Rng rng(5);
    const size_t n = 100000;
    Vec sums(3, 0.0);
    for (size_t i = 0; i < n; ++i) {
        Vec theta = prior_sample(prior, rng);
        REQUIRE(prior.contains(theta));
        for (int k = 0; k < 3; ++k) sums[k] += theta[k];
    }
    double se = (4.5 / std::sqrt(12.0)) / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < 3; ++k) CHECK(std::abs(sums[k] / n - 2.75) < 3.0 * se);
}

TEST_CASE("prior bounds are validated") {
    CHECK_THROWS_AS(make_box_prior({1.0}, {1.0}), DomainError);
    CHECK_THROWS_AS(make_box_prior({2.0}, {1.0}), DomainError);
    CHECK_THROWS_AS(make_box_prior({0.0, 0.0}, {1.0}), ShapeError);
}

TEST_CASE("pair weight on a uniform box") {
    PriorSpec prior = make_box_prior({0.0, 0.0}, {1.0, 1.0});
    CHECK(pair_weight(prior, {0.5, 0.5}, {0.1, -0.2}) == 1.0);
    CHECK_THROWS_AS(pair_weight(prior, {0.5, 0.5}, {0.6, 0.0}), DomainError);
}

TEST_CASE("pair weight against a non-uniform density") {
    // triangular density on [0, 1): f(t) = 2t
    auto triangular = [](const Vec& t) { return (t[0] >= 0.0 && t[0] < 1.0) ? 2.0 * t[0] : 0.0; };
    double w = pair_weight(triangular, {0.4}, {0.3});
    CHECK(w == Catch::Approx((2.0 * 0.4) / (2.0 * 0.7)).epsilon(1e-14));
}

TEST_CASE("reference pairs pin the second parameter") {
    PairDistribution pd;
    pd.kind = PairKind::Reference;
    pd.prior = make_box_prior({0.5, 0.5, 0.5}, {5.0, 5.0, 5.0});
    pd.theta_ref = {1.0, 1.0, 1.0};
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        auto [t0, t1] = sample_pair(pd, rng);
        CHECK(t1 == Vec{1.0, 1.0, 1.0});
        CHECK(pd.prior.contains(t0));
    }
}

TEST_CASE("kernel-correlated pairs stay within the kernel width") {
    PairDistribution pd;
    pd.kind = PairKind::KernelCorrelated;
    pd.prior = make_box_prior({0.5, 0.5, 0.5}, {5.0, 5.0, 5.0});
    pd.kernel = make_kernel(KernelKind::Rectangular, {0.4, 0.4, 0.4});
    Rng rng(7);
    for (int i = 0; i < 20000; ++i) {
        auto [t0, t1] = sample_pair(pd, rng);
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(t0[k] - t1[k]) < 0.4);
            CHECK(t0[k] > 0.0);  // partner may leave the box but not the Dirichlet domain
            CHECK(t1[k] > 0.0);
        }
    }
}

TEST_CASE("iid pairs are uncorrelated") {
    PairDistribution pd;
    pd.kind = PairKind::Iid;
    pd.prior = make_box_prior({0.5, 0.5, 0.5}, {5.0, 5.0, 5.0});
    Rng rng(8);
    const size_t n = 100000;
    double sum0 = 0.0, sum1 = 0.0, sum01 = 0.0, sq0 = 0.0, sq1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        auto [t0, t1] = sample_pair(pd, rng);
        sum0 += t0[0];
        sum1 += t1[0];
        sum01 += t0[0] * t1[0];
        sq0 += t0[0] * t0[0];
        sq1 += t1[0] * t1[0];
    }
    double m0 = sum0 / n, m1 = sum1 / n;
    double corr =
        (sum01 / n - m0 * m1) / std::sqrt((sq0 / n - m0 * m0) * (sq1 / n - m1 * m1));
    CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("kernel-correlated pairs are exchangeable") {
    // the symmetrized mixture makes (theta0, theta1) and (theta1, theta0)
    // identically distributed; compare first-component means
    PairDistribution pd;
    pd.kind = PairKind::KernelCorrelated;
    pd.prior = make_box_prior({0.5}, {5.0});
    pd.kernel = make_kernel(KernelKind::Rectangular, {0.4});
    Rng rng(9);
    const size_t n = 100000;
    double s0 = 0.0, s1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        auto [t0, t1] = sample_pair(pd, rng);
        s0 += t0[0];
        s1 += t1[0];
    }
    double se = 1.35 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(s0 / n - s1 / n) < 3.0 * se);
}

TEST_CASE("width hook overrides constant widths and must stay positive") {
    KernelSpec kernel = make_kernel(KernelKind::Delta, {1.0, 1.0});
    kernel.widths.hook = [](const Vec& theta) { return Vec{0.1 * theta[0], 0.2 * theta[1]}; };
    Vec w = kernel.widths({2.0, 3.0});
    CHECK(w[0] == Catch::Approx(0.2));
    CHECK(w[1] == Catch::Approx(0.6));
    CHECK_THROWS_AS(kernel.widths({0.0, 1.0}), DomainError);
}

TEST_CASE("rng substreams are independent and reproducible") {
    Rng a(99), b(99);
    CHECK(a.substream(1).uniform() == b.substream(1).uniform());
    CHECK(a.substream(1).uniform() != a.substream(2).uniform());
}
