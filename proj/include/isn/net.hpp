#pragma once

#include <string>
#include <vector>

#include "isn/core.hpp"
#include "isn/rng.hpp"

namespace isn {

enum class Activation { Selu, Linear };

inline std::string to_string(Activation a) { return a == Activation::Selu ? "selu" : "linear"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "selu") return Activation::Selu;
    if (s == "linear") return Activation::Linear;
    throw ParseError("unknown activation: " + s);
}

constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

inline double selu(double x) {
    return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

inline double selu_prime(double x) {
    return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

// At x == 0 the left limit is used; the event has measure zero.
inline double selu_second(double x) {
    return x > 0.0 ? 0.0 : kSeluLambda * kSeluAlpha * std::exp(x);
}

inline double activate(Activation a, double x) { return a == Activation::Selu ? selu(x) : x; }
inline double activate_prime(Activation a, double x) { return a == Activation::Selu ? selu_prime(x) : 1.0; }
inline double activate_second(Activation a, double x) { return a == Activation::Selu ? selu_second(x) : 0.0; }

// Dense feed-forward network. weights[k] maps layer k (dims[k]) to layer k+1
// (dims[k+1]); biases of a layer with bias_enabled[k] == false stay zero and
// are excluded from the trainable parameter count.
struct DenseNet {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
    std::vector<uint8_t> bias_enabled;
    std::vector<Activation> activations;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }

    size_t parameter_count() const {
        size_t n = 0;
        for (int k = 0; k < layer_count(); ++k) {
            n += weights[k].size();
            if (bias_enabled[k]) n += biases[k].size();
        }
        return n;
    }
};

inline DenseNet make_dense_net(std::vector<int> dims, std::vector<Activation> acts,
                               std::vector<uint8_t> bias_flags) {
    if (dims.size() < 2) throw ShapeError("a net needs at least an input and an output layer");
    size_t layers = dims.size() - 1;
    if (acts.size() != layers || bias_flags.size() != layers)
        throw ShapeError("per-layer activation/bias lists must match layer count");
    for (int d : dims)
        if (d <= 0) throw ShapeError("layer dimensions must be positive");
    DenseNet net;
    net.layer_dims = std::move(dims);
    net.activations = std::move(acts);
    net.bias_enabled = std::move(bias_flags);
    for (size_t k = 0; k < layers; ++k) {
        net.weights.emplace_back(net.layer_dims[k + 1], net.layer_dims[k]);
        net.biases.emplace_back(net.layer_dims[k + 1], 0.0);
    }
    return net;
}

// LeCun-normal initialization (std = 1/sqrt(fan_in)); the natural partner of
// SELU. Biases start at zero.
inline void init_lecun_normal(DenseNet& net, Rng& rng) {
    for (int k = 0; k < net.layer_count(); ++k) {
        double std_dev = 1.0 / std::sqrt(static_cast<double>(net.layer_dims[k]));
        for (double& w : net.weights[k].data) w = rng.normal(0.0, std_dev);
        std::fill(net.biases[k].begin(), net.biases[k].end(), 0.0);
    }
}

struct ForwardTrace {
    std::vector<Vec> activations;     // a^0 .. a^L
    std::vector<Vec> preactivations;  // z^1 .. z^L

    const Vec& output() const { return activations.back(); }
};

inline void check_input(const DenseNet& net, const Vec& input) {
    if (static_cast<int>(input.size()) != net.input_dim())
        throw ShapeError("input length " + std::to_string(input.size()) + " does not match net input dim " +
                         std::to_string(net.input_dim()));
}

inline ForwardTrace forward_trace(const DenseNet& net, const Vec& input) {
    check_input(net, input);
    ForwardTrace trace;
    trace.activations.reserve(net.layer_count() + 1);
    trace.preactivations.reserve(net.layer_count());
    trace.activations.push_back(input);
    for (int k = 0; k < net.layer_count(); ++k) {
        const Matrix& w = net.weights[k];
        const Vec& prev = trace.activations.back();
        Vec z(w.rows);
        for (int i = 0; i < w.rows; ++i) {
            double s = net.biases[k][i];
            for (int j = 0; j < w.cols; ++j) s += w(i, j) * prev[j];
            z[i] = s;
        }
        Vec a(w.rows);
        for (int i = 0; i < w.rows; ++i) a[i] = activate(net.activations[k], z[i]);
        trace.preactivations.push_back(std::move(z));
        trace.activations.push_back(std::move(a));
    }
    return trace;
}

inline Vec forward(const DenseNet& net, const Vec& input) { return forward_trace(net, input).output(); }

// Forward pass augmented with tangent matrices tracking d a^(n) / d input[slice].
// tangents[n] has shape dims[n] x slice.size(); pre_tangents[k] holds the
// tangent of the pre-activation of layer k+1 and is needed by the reverse pass.
struct AugmentedTrace {
    ForwardTrace base;
    std::vector<Matrix> tangents;      // B^0 .. B^L
    std::vector<Matrix> pre_tangents;  // C^1 .. C^L
    IndexRange slice;

    const Vec& value() const { return base.output(); }
    const Matrix& jacobian() const { return tangents.back(); }
};

inline AugmentedTrace forward_with_input_gradient_trace(const DenseNet& net, const Vec& input,
                                                        IndexRange slice) {
    if (slice.begin < 0 || slice.end > net.input_dim() || slice.begin >= slice.end)
        throw ShapeError("gradient slice out of input bounds");
    AugmentedTrace aug;
    aug.slice = slice;
    aug.base = forward_trace(net, input);
    int d = slice.size();

    Matrix selector(net.input_dim(), d);
    for (int j = 0; j < d; ++j) selector(slice.begin + j, j) = 1.0;
    aug.tangents.push_back(std::move(selector));

    for (int k = 0; k < net.layer_count(); ++k) {
        const Matrix& w = net.weights[k];
        const Matrix& prev = aug.tangents.back();
        Matrix c(w.rows, d);
        for (int i = 0; i < w.rows; ++i)
            for (int m = 0; m < w.cols; ++m) {
                double wim = w(i, m);
                if (wim == 0.0) continue;
                for (int j = 0; j < d; ++j) c(i, j) += wim * prev(m, j);
            }
        const Vec& z = aug.base.preactivations[k];
        Matrix b(w.rows, d);
        for (int i = 0; i < w.rows; ++i) {
            double dp = activate_prime(net.activations[k], z[i]);
            for (int j = 0; j < d; ++j) b(i, j) = dp * c(i, j);
        }
        aug.pre_tangents.push_back(std::move(c));
        aug.tangents.push_back(std::move(b));
    }
    return aug;
}

struct ValueAndJacobian {
    Vec value;
    Matrix jacobian;  // output_dim x slice.size()
};

inline ValueAndJacobian forward_with_input_gradient(const DenseNet& net, const Vec& input,
                                                    IndexRange slice) {
    AugmentedTrace aug = forward_with_input_gradient_trace(net, input, slice);
    return {aug.value(), aug.jacobian()};
}

struct WeightGradients {
    std::vector<Matrix> weights;
    std::vector<Vec> biases;

    void scale(double f) {
        for (auto& m : weights)
            for (double& x : m.data) x *= f;
        for (auto& v : biases)
            for (double& x : v) x *= f;
    }

    void add(const WeightGradients& other) {
        for (size_t k = 0; k < weights.size(); ++k) {
            for (size_t i = 0; i < weights[k].data.size(); ++i) weights[k].data[i] += other.weights[k].data[i];
            for (size_t i = 0; i < biases[k].size(); ++i) biases[k][i] += other.biases[k][i];
        }
    }
};

inline WeightGradients zero_gradients(const DenseNet& net) {
    WeightGradients g;
    for (int k = 0; k < net.layer_count(); ++k) {
        g.weights.emplace_back(net.layer_dims[k + 1], net.layer_dims[k]);
        g.biases.emplace_back(net.layer_dims[k + 1], 0.0);
    }
    return g;
}

// Reverse-mode pass for d(upstream . output)/d(weights) given a forward trace.
inline void accumulate_backward(const DenseNet& net, const ForwardTrace& trace, const Vec& upstream,
                                WeightGradients& grads) {
    if (static_cast<int>(upstream.size()) != net.output_dim())
        throw ShapeError("upstream gradient length does not match net output dim");
    Vec abar = upstream;
    for (int k = net.layer_count() - 1; k >= 0; --k) {
        const Matrix& w = net.weights[k];
        const Vec& z = trace.preactivations[k];
        const Vec& a_in = trace.activations[k];
        Vec zbar(w.rows);
        for (int i = 0; i < w.rows; ++i) zbar[i] = abar[i] * activate_prime(net.activations[k], z[i]);
        for (int i = 0; i < w.rows; ++i) {
            double zi = zbar[i];
            if (zi == 0.0) continue;
            for (int j = 0; j < w.cols; ++j) grads.weights[k](i, j) += zi * a_in[j];
        }
        if (net.bias_enabled[k])
            for (int i = 0; i < w.rows; ++i) grads.biases[k][i] += zbar[i];
        Vec abar_prev(w.cols, 0.0);
        for (int i = 0; i < w.rows; ++i) {
            double zi = zbar[i];
            if (zi == 0.0) continue;
            for (int j = 0; j < w.cols; ++j) abar_prev[j] += w(i, j) * zi;
        }
        abar = std::move(abar_prev);
    }
}

inline WeightGradients backward(const DenseNet& net, const Vec& input, const Vec& upstream) {
    WeightGradients grads = zero_gradients(net);
    accumulate_backward(net, forward_trace(net, input), upstream, grads);
    return grads;
}

// Reverse-mode through the augmented computation: given upstreams on the
// input-slice Jacobian (and optionally on the value channel), accumulate
// d loss / d weights. Needs the activation second derivative because the
// tangent of layer k+1 multiplies act'(z) which itself depends on weights.
inline void accumulate_backward_through_input_gradient(const DenseNet& net, const AugmentedTrace& aug,
                                                       const Matrix& upstream_on_jacobian,
                                                       const Vec* upstream_on_value,
                                                       WeightGradients& grads) {
    int d = aug.slice.size();
    if (upstream_on_jacobian.rows != net.output_dim() || upstream_on_jacobian.cols != d)
        throw ShapeError("upstream jacobian gradient has wrong shape");
    if (upstream_on_value && static_cast<int>(upstream_on_value->size()) != net.output_dim())
        throw ShapeError("upstream value gradient has wrong shape");

    Vec abar = upstream_on_value ? *upstream_on_value : Vec(net.output_dim(), 0.0);
    Matrix bbar = upstream_on_jacobian;

    for (int k = net.layer_count() - 1; k >= 0; --k) {
        const Matrix& w = net.weights[k];
        const Vec& z = aug.base.preactivations[k];
        const Vec& a_in = aug.base.activations[k];
        const Matrix& b_in = aug.tangents[k];
        const Matrix& c = aug.pre_tangents[k];
        Activation act = net.activations[k];

        // B^(k+1)_ij = act'(z_i) C_ij  and  a^(k+1)_i = act(z_i).
        Matrix cbar(w.rows, d);
        Vec zbar(w.rows);
        for (int i = 0; i < w.rows; ++i) {
            double dp = activate_prime(act, z[i]);
            double dpp = activate_second(act, z[i]);
            double acc = abar[i] * dp;
            for (int j = 0; j < d; ++j) {
                cbar(i, j) = dp * bbar(i, j);
                acc += dpp * c(i, j) * bbar(i, j);
            }
            zbar[i] = acc;
        }

        // z^(k+1) = W a^(k) + b  and  C^(k+1) = W B^(k).
        for (int i = 0; i < w.rows; ++i) {
            for (int m = 0; m < w.cols; ++m) {
                double acc = zbar[i] * a_in[m];
                for (int j = 0; j < d; ++j) acc += cbar(i, j) * b_in(m, j);
                grads.weights[k](i, m) += acc;
            }
        }
        if (net.bias_enabled[k])
            for (int i = 0; i < w.rows; ++i) grads.biases[k][i] += zbar[i];

        if (k == 0) break;
        Vec abar_prev(w.cols, 0.0);
        Matrix bbar_prev(w.cols, d);
        for (int i = 0; i < w.rows; ++i) {
            for (int m = 0; m < w.cols; ++m) {
                double wim = w(i, m);
                if (wim == 0.0) continue;
                abar_prev[m] += wim * zbar[i];
                for (int j = 0; j < d; ++j) bbar_prev(m, j) += wim * cbar(i, j);
            }
        }
        abar = std::move(abar_prev);
        bbar = std::move(bbar_prev);
    }
}

inline WeightGradients backward_through_input_gradient(const DenseNet& net, const Vec& input,
                                                       IndexRange slice,
                                                       const Matrix& upstream_on_jacobian,
                                                       const Vec* upstream_on_value = nullptr) {
    WeightGradients grads = zero_gradients(net);
    AugmentedTrace aug = forward_with_input_gradient_trace(net, input, slice);
    accumulate_backward_through_input_gradient(net, aug, upstream_on_jacobian, upstream_on_value, grads);
    return grads;
}

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
};

struct AdamState {
    AdamConfig config;
    std::vector<Matrix> m_weights, v_weights;
    std::vector<Vec> m_biases, v_biases;
    long step_count = 0;
};

inline AdamState make_adam_state(const DenseNet& net, AdamConfig config = {}) {
    AdamState st;
    st.config = config;
    for (int k = 0; k < net.layer_count(); ++k) {
        st.m_weights.emplace_back(net.layer_dims[k + 1], net.layer_dims[k]);
        st.v_weights.emplace_back(net.layer_dims[k + 1], net.layer_dims[k]);
        st.m_biases.emplace_back(net.layer_dims[k + 1], 0.0);
        st.v_biases.emplace_back(net.layer_dims[k + 1], 0.0);
    }
    return st;
}

inline void adam_step(DenseNet& net, const WeightGradients& grads, AdamState& st) {
    for (const auto& m : grads.weights)
        if (!all_finite(m)) throw DivergenceError("non-finite weight gradient in adam_step");
    for (const auto& v : grads.biases)
        if (!all_finite(v)) throw DivergenceError("non-finite bias gradient in adam_step");

    st.step_count += 1;
    const AdamConfig& c = st.config;
    double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step_count));
    double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step_count));
    auto update = [&](double& param, double g, double& m, double& v) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        param -= c.learning_rate * (m / corr1) / (std::sqrt(v / corr2) + c.epsilon);
    };
    for (int k = 0; k < net.layer_count(); ++k) {
        for (size_t i = 0; i < net.weights[k].data.size(); ++i)
            update(net.weights[k].data[i], grads.weights[k].data[i], st.m_weights[k].data[i],
                   st.v_weights[k].data[i]);
        if (!net.bias_enabled[k]) continue;
        for (size_t i = 0; i < net.biases[k].size(); ++i)
            update(net.biases[k][i], grads.biases[k][i], st.m_biases[k][i], st.v_biases[k][i]);
    }
}

}  // namespace isn
