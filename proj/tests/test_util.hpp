#pragma once

// Shared helpers for the test suite: finite-difference oracles and
// random-net/input factories that stay away from SELU kinks.

#include <functional>

#include "isn/net.hpp"
#include "isn/rng.hpp"

namespace test_util {

using isn::DenseNet;
using isn::Matrix;
using isn::Rng;
using isn::Vec;

inline DenseNet random_net(const std::vector<int>& dims, Rng& rng, bool output_bias = true) {
    size_t layers = dims.size() - 1;
    std::vector<isn::Activation> acts(layers, isn::Activation::Selu);
    acts[layers - 1] = isn::Activation::Linear;
    std::vector<uint8_t> bias(layers, 1);
    bias[layers - 1] = output_bias ? 1 : 0;
    DenseNet net = isn::make_dense_net(dims, acts, bias);
    isn::init_lecun_normal(net, rng);
    for (auto& b : net.biases)
        for (double& v : b) v = 0.1 * rng.normal();
    if (!output_bias) std::fill(net.biases.back().begin(), net.biases.back().end(), 0.0);
    return net;
}

inline Vec random_input(int n, Rng& rng) {
    Vec x(n);
    for (double& v : x) v = rng.normal();
    return x;
}

// Draw inputs until every pre-activation is well away from the SELU kink at
// zero, where the derivative jumps.
inline Vec random_input_away_from_kinks(const DenseNet& net, Rng& rng, double margin = 1e-3) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        Vec x = random_input(net.input_dim(), rng);
        isn::ForwardTrace trace = isn::forward_trace(net, x);
        double closest = 1e30;
        for (const auto& z : trace.preactivations)
            for (double zi : z) closest = std::min(closest, std::abs(zi));
        if (closest > margin) return x;
    }
    throw std::runtime_error("could not find an input away from activation kinks");
}

// Central finite differences of a scalar-valued function of the net
// parameters, matching the layout of WeightGradients.
inline isn::WeightGradients fd_weight_gradients(DenseNet net, const std::function<double(const DenseNet&)>& f,
                                                double step = 1e-4) {
    isn::WeightGradients g = isn::zero_gradients(net);
    for (int k = 0; k < net.layer_count(); ++k) {
        for (size_t i = 0; i < net.weights[k].data.size(); ++i) {
            double saved = net.weights[k].data[i];
            net.weights[k].data[i] = saved + step;
            double hi = f(net);
            net.weights[k].data[i] = saved - step;
            double lo = f(net);
            net.weights[k].data[i] = saved;
            g.weights[k].data[i] = (hi - lo) / (2.0 * step);
        }
        if (!net.bias_enabled[k]) continue;
        for (size_t i = 0; i < net.biases[k].size(); ++i) {
            double saved = net.biases[k][i];
            net.biases[k][i] = saved + step;
            double hi = f(net);
            net.biases[k][i] = saved - step;
            double lo = f(net);
            net.biases[k][i] = saved;
            g.biases[k][i] = (hi - lo) / (2.0 * step);
        }
    }
    return g;
}

// Gradient-check comparison: entries are compared at the stated relative
// tolerance against the overall gradient scale, so near-zero entries do not
// blow up the ratio.
inline double max_gradient_mismatch(const isn::WeightGradients& a, const isn::WeightGradients& b) {
    double scale = 1e-6;
    auto scan = [&scale](const isn::WeightGradients& g) {
        for (const auto& m : g.weights)
            for (double v : m.data) scale = std::max(scale, std::abs(v));
        for (const auto& v : g.biases)
            for (double x : v) scale = std::max(scale, std::abs(x));
    };
    scan(a);
    scan(b);
    double worst = 0.0;
    for (size_t k = 0; k < a.weights.size(); ++k) {
        for (size_t i = 0; i < a.weights[k].data.size(); ++i)
            worst = std::max(worst, std::abs(a.weights[k].data[i] - b.weights[k].data[i]) / scale);
        for (size_t i = 0; i < a.biases[k].size(); ++i)
            worst = std::max(worst, std::abs(a.biases[k][i] - b.biases[k][i]) / scale);
    }
    return worst;
}

inline double fd_scalar(const std::function<double(double)>& f, double x, double step = 1e-6) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
}

}  // namespace test_util
