#include <catch_amalgamated.hpp>

#include "isn/net.hpp"
#include "test_util.hpp"

using namespace isn;
using test_util::fd_weight_gradients;
using test_util::max_gradient_mismatch;
using test_util::random_input_away_from_kinks;
using test_util::random_net;

namespace {

DenseNet single_linear_layer(const Matrix& w, const Vec& bias, bool bias_on) {
    DenseNet net = make_dense_net({w.cols, w.rows}, {Activation::Linear}, {static_cast<uint8_t>(bias_on)});
    net.weights[0] = w;
    if (bias_on) net.biases[0] = bias;
    return net;
}

}  // namespace

TEST_CASE("forward: identity and affine single layers") {
    Matrix eye(2, 2);
    eye(0, 0) = 1.0;
    eye(1, 1) = 1.0;
    DenseNet identity = single_linear_layer(eye, {}, false);
    Vec out = forward(identity, {3.0, 4.0});
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 4.0);

    Matrix w(1, 1);
    w(0, 0) = 2.0;
    DenseNet affine = single_linear_layer(w, {1.0}, true);
    CHECK(forward(affine, {3.0})[0] == 7.0);
}

TEST_CASE("forward: input shape is checked") {
    Matrix w(1, 2, 0.5);
    DenseNet net = single_linear_layer(w, {}, false);
    CHECK_THROWS_AS(forward(net, {1.0}), ShapeError);
    CHECK_THROWS_AS(forward(net, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("selu values and saturation limit") {
    CHECK(selu(0.0) == 0.0);
    CHECK(selu(1.0) == Catch::Approx(kSeluLambda));
    // limit x -> -inf is -lambda*alpha ~ -1.7581
    CHECK(selu(-40.0) == Catch::Approx(-kSeluLambda * kSeluAlpha).epsilon(1e-12));
    CHECK(-kSeluLambda * kSeluAlpha == Catch::Approx(-1.7581).margin(5e-5));
    // second derivative at 0 is the left limit
    CHECK(selu_second(0.0) == Catch::Approx(kSeluLambda * kSeluAlpha));
}

TEST_CASE("input gradient: single neuron has constant theta-gradient") {
    // phi = u*x + v*theta with u = 0.7, v = -1.3; input layout (x, theta)
    Matrix w(1, 2);
    w(0, 0) = 0.7;
    w(0, 1) = -1.3;
    DenseNet net = single_linear_layer(w, {}, false);
    Rng rng(7);
    for (int i = 0; i < 5; ++i) {
        Vec input{rng.normal(), rng.normal()};
        auto [value, jac] = forward_with_input_gradient(net, input, {1, 2});
        CHECK(jac(0, 0) == -1.3);
        CHECK(value[0] == Catch::Approx(0.7 * input[0] - 1.3 * input[1]));
    }
}

TEST_CASE("input gradient: identity net gives the identity jacobian") {
    Matrix eye(3, 3);
    for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
    DenseNet net = single_linear_layer(eye, {}, false);
    auto [value, jac] = forward_with_input_gradient(net, {1.0, 2.0, 3.0}, {0, 3});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(jac(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("input gradient: slice bounds are validated") {
    Rng rng(3);
    DenseNet net = random_net({4, 3, 1}, rng);
    CHECK_THROWS_AS(forward_with_input_gradient(net, {1, 2, 3, 4}, {2, 5}), ShapeError);
    CHECK_THROWS_AS(forward_with_input_gradient(net, {1, 2, 3, 4}, {3, 3}), ShapeError);
}

TEST_CASE("input gradient matches finite differences on random nets") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        DenseNet net = random_net({6, 8, 16, 8, 1}, rng);
        Vec input = random_input_away_from_kinks(net, rng);
        auto [value, jac] = forward_with_input_gradient(net, input, {3, 6});
        double scale = 1e-6;
        for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(jac(0, j)));
        for (int j = 0; j < 3; ++j) {
            Vec hi = input, lo = input;
            hi[3 + j] += 1e-4;
            lo[3 + j] -= 1e-4;
            double fd = (forward(net, hi)[0] - forward(net, lo)[0]) / 2e-4;
            CHECK(std::abs(jac(0, j) - fd) / scale < 1e-5);
        }
    }
}

TEST_CASE("input gradient value channel is bit-identical to forward") {
    Rng rng(23);
    DenseNet net = random_net({5, 8, 8, 2}, rng);
    for (int trial = 0; trial < 20; ++trial) {
        Vec input = test_util::random_input(5, rng);
        Vec direct = forward(net, input);
        auto [value, jac] = forward_with_input_gradient(net, input, {0, 5});
        CHECK(value[0] == direct[0]);
        CHECK(value[1] == direct[1]);
    }
}

TEST_CASE("backward: hand-checked single weight") {
    // net(w) = w * input, loss = net^2; at w = 3, input = 1 the upstream
    // dL/d out = 6 and dL/dw = 6.
    Matrix w(1, 1);
    w(0, 0) = 3.0;
    DenseNet net = single_linear_layer(w, {}, false);
    WeightGradients g = backward(net, {1.0}, {6.0});
    CHECK(g.weights[0](0, 0) == 6.0);
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    Rng rng(5);
    DenseNet net = random_net({4, 8, 2}, rng);
    WeightGradients g = backward(net, test_util::random_input(4, rng), {0.0, 0.0});
    for (const auto& m : g.weights)
        for (double v : m.data) CHECK(v == 0.0);
    for (const auto& b : g.biases)
        for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("backward matches finite differences on random nets") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        DenseNet net = random_net({6, 8, 16, 8, 1}, rng);
        Vec input = random_input_away_from_kinks(net, rng);
        Vec upstream{rng.normal()};
        WeightGradients analytic = backward(net, input, upstream);
        auto loss = [&input, &upstream](const DenseNet& n) { return upstream[0] * forward(n, input)[0]; };
        WeightGradients fd = fd_weight_gradients(net, loss);
        CHECK(max_gradient_mismatch(analytic, fd) < 1e-5);
    }
}

TEST_CASE("backward through input gradient: 1x1 linear chain product rule") {
    // jacobian = w1 * w0, so d jac / d w0 = w1 and d jac / d w1 = w0
    DenseNet net = make_dense_net({1, 1, 1}, {Activation::Linear, Activation::Linear}, {0, 0});
    net.weights[0](0, 0) = 1.7;
    net.weights[1](0, 0) = -0.6;
    Matrix upstream(1, 1);
    upstream(0, 0) = 1.0;
    WeightGradients g = backward_through_input_gradient(net, {0.4}, {0, 1}, upstream);
    CHECK(g.weights[0](0, 0) == Catch::Approx(-0.6));
    CHECK(g.weights[1](0, 0) == Catch::Approx(1.7));
}

TEST_CASE("backward through input gradient: single neuron pattern") {
    // phi = u*x + v*theta: the theta-jacobian is v, so its gradient w.r.t. u
    // vanishes and w.r.t. v is 1.
    Matrix w(1, 2);
    w(0, 0) = 0.9;   // u
    w(0, 1) = -0.2;  // v
    DenseNet net = single_linear_layer(w, {}, false);
    Matrix upstream(1, 1);
    upstream(0, 0) = 1.0;
    WeightGradients g = backward_through_input_gradient(net, {0.3, 1.1}, {1, 2}, upstream);
    CHECK(g.weights[0](0, 0) == 0.0);
    CHECK(g.weights[0](0, 1) == 1.0);
}

TEST_CASE("backward through input gradient matches finite differences") {
    Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        DenseNet net = random_net({6, 8, 16, 8, 1}, rng);
        Vec input = random_input_away_from_kinks(net, rng);
        Matrix upstream(1, 3);
        for (int j = 0; j < 3; ++j) upstream(0, j) = rng.normal();
        WeightGradients analytic = backward_through_input_gradient(net, input, {3, 6}, upstream);
        auto loss = [&](const DenseNet& n) {
            auto [value, jac] = forward_with_input_gradient(n, input, {3, 6});
            double acc = 0.0;
            for (int j = 0; j < 3; ++j) acc += upstream(0, j) * jac(0, j);
            return acc;
        };
        WeightGradients fd = fd_weight_gradients(net, loss);
        CHECK(max_gradient_mismatch(analytic, fd) < 1e-4);
    }
}

TEST_CASE("backward through input gradient: combined value and jacobian upstream") {
    Rng rng(31);
    DenseNet net = random_net({4, 6, 1}, rng);
    Vec input = random_input_away_from_kinks(net, rng);
    Matrix up_j(1, 2);
    up_j(0, 0) = 0.8;
    up_j(0, 1) = -1.1;
    Vec up_v{0.5};
    WeightGradients analytic = zero_gradients(net);
    AugmentedTrace aug = forward_with_input_gradient_trace(net, input, {2, 4});
    accumulate_backward_through_input_gradient(net, aug, up_j, &up_v, analytic);
    auto loss = [&](const DenseNet& n) {
        auto [value, jac] = forward_with_input_gradient(n, input, {2, 4});
        return 0.5 * value[0] + 0.8 * jac(0, 0) - 1.1 * jac(0, 1);
    };
    WeightGradients fd = fd_weight_gradients(net, loss);
    CHECK(max_gradient_mismatch(analytic, fd) < 1e-4);
}

TEST_CASE("adam: zero gradient leaves parameters, advances the step counter") {
    Rng rng(41);
    DenseNet net = random_net({3, 4, 2}, rng);
    DenseNet before = net;
    AdamState st = make_adam_state(net);
    adam_step(net, zero_gradients(net), st);
    CHECK(st.step_count == 1);
    for (int k = 0; k < net.layer_count(); ++k)
        for (size_t i = 0; i < net.weights[k].data.size(); ++i)
            CHECK(net.weights[k].data[i] == before.weights[k].data[i]);
}

TEST_CASE("adam: bias-corrected first step moves by about the learning rate") {
    Matrix w(1, 1);
    w(0, 0) = 0.5;
    DenseNet net = single_linear_layer(w, {}, false);
    AdamState st = make_adam_state(net);
    WeightGradients g = zero_gradients(net);
    g.weights[0](0, 0) = 1.0;
    adam_step(net, g, st);
    // first step: m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps)
    CHECK(0.5 - net.weights[0](0, 0) == Catch::Approx(0.001).margin(1e-9));
}

TEST_CASE("adam: converges on a quadratic") {
    Matrix w(1, 1);
    w(0, 0) = 1.0;
    DenseNet net = single_linear_layer(w, {}, false);
    AdamState st = make_adam_state(net);
    for (int i = 0; i < 10000; ++i) {
        WeightGradients g = zero_gradients(net);
        g.weights[0](0, 0) = 2.0 * net.weights[0](0, 0);
        adam_step(net, g, st);
    }
    CHECK(std::abs(net.weights[0](0, 0)) < 1e-2);
}

TEST_CASE("adam: rejects non-finite gradients") {
    Matrix w(1, 1, 1.0);
    DenseNet net = single_linear_layer(w, {}, false);
    AdamState st = make_adam_state(net);
    WeightGradients g = zero_gradients(net);
    g.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(net, g, st), DivergenceError);
}

TEST_CASE("adam: disabled biases are never updated") {
    DenseNet net = make_dense_net({2, 2}, {Activation::Linear}, {0});
    net.weights[0](0, 0) = 1.0;
    AdamState st = make_adam_state(net);
    WeightGradients g = zero_gradients(net);
    g.weights[0](0, 0) = 1.0;
    g.biases[0] = {5.0, 5.0};  // should be ignored
    adam_step(net, g, st);
    CHECK(net.biases[0][0] == 0.0);
    CHECK(net.biases[0][1] == 0.0);
}

TEST_CASE("determinism: identical seeds give bit-identical nets and outputs") {
    auto build = []() {
        Rng rng(12345);
        DenseNet net = random_net({6, 8, 16, 8, 1}, rng);
        Vec input = test_util::random_input(6, rng);
        return std::pair{net, forward(net, input)[0]};
    };
    auto [net_a, out_a] = build();
    auto [net_b, out_b] = build();
    CHECK(out_a == out_b);
    for (int k = 0; k < net_a.layer_count(); ++k)
        for (size_t i = 0; i < net_a.weights[k].data.size(); ++i)
            CHECK(net_a.weights[k].data[i] == net_b.weights[k].data[i]);
}
