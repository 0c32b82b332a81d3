#pragma once

#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "isn/core.hpp"
#include "isn/net.hpp"

namespace isn {

enum class ArchitectureTag { Isn, DirectScore, DirectRatio };

inline std::string to_string(ArchitectureTag t) {
    switch (t) {
        case ArchitectureTag::Isn: return "isn";
        case ArchitectureTag::DirectScore: return "direct_score";
        case ArchitectureTag::DirectRatio: return "direct_ratio";
    }
    return "isn";
}

inline ArchitectureTag architecture_from_string(const std::string& s) {
    if (s == "isn") return ArchitectureTag::Isn;
    if (s == "direct_score") return ArchitectureTag::DirectScore;
    if (s == "direct_ratio") return ArchitectureTag::DirectRatio;
    throw ParseError("unknown architecture tag: " + s);
}

inline Vec concat(const Vec& a, const Vec& b) {
    Vec out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline Vec concat(const Vec& a, const Vec& b, const Vec& c) { return concat(concat(a, b), c); }

namespace detail {

inline DenseNet make_mlp(int input_dim, int output_dim, const std::vector<int>& hidden,
                         bool output_bias) {
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output_dim);
    std::vector<Activation> acts(hidden.size(), Activation::Selu);
    acts.push_back(Activation::Linear);
    std::vector<uint8_t> bias(hidden.size(), 1);
    bias.push_back(output_bias ? 1 : 0);
    return make_dense_net(std::move(dims), std::move(acts), std::move(bias));
}

}  // namespace detail

// Scalar-potential model: one backend net phi(x, theta) from which the score
// (its theta-gradient) and the log ratio (a potential difference) are derived
// views. The output layer is linear with the bias removed, since a constant
// shift of the potential changes neither view.
struct IsnModel {
    int event_dim = 0;
    int param_dim = 0;
    DenseNet net;

    IndexRange theta_slice() const { return {event_dim, event_dim + param_dim}; }
};

inline IsnModel make_isn_model(int event_dim, int param_dim, const std::vector<int>& hidden = {8, 16, 8}) {
    IsnModel m;
    m.event_dim = event_dim;
    m.param_dim = param_dim;
    m.net = detail::make_mlp(event_dim + param_dim, 1, hidden, /*output_bias=*/false);
    return m;
}

inline double isn_potential(const IsnModel& m, const Vec& x, const Vec& theta) {
    return forward(m.net, concat(x, theta))[0];
}

inline Vec predict_score(const IsnModel& m, const Vec& x, const Vec& theta) {
    ValueAndJacobian vj = forward_with_input_gradient(m.net, concat(x, theta), m.theta_slice());
    Vec s(m.param_dim);
    for (int j = 0; j < m.param_dim; ++j) s[j] = vj.jacobian(0, j);
    return s;
}

inline double predict_log_ratio(const IsnModel& m, const Vec& x, const Vec& theta0, const Vec& theta1) {
    return isn_potential(m, x, theta0) - isn_potential(m, x, theta1);
}

// Plain regression head for the score.
struct DirectScoreModel {
    int event_dim = 0;
    int param_dim = 0;
    DenseNet net;
};

inline DirectScoreModel make_direct_score_model(int event_dim, int param_dim,
                                                const std::vector<int>& hidden = {8, 16, 8}) {
    DirectScoreModel m;
    m.event_dim = event_dim;
    m.param_dim = param_dim;
    m.net = detail::make_mlp(event_dim + param_dim, param_dim, hidden, /*output_bias=*/true);
    return m;
}

inline Vec predict_score(const DirectScoreModel& m, const Vec& x, const Vec& theta) {
    return forward(m.net, concat(x, theta));
}

// Two-output ratio head on (x, theta0, theta1); ln r_hat is zeta0 - zeta1.
// The redundant parameterization is kept on purpose: it is the comparison
// baseline, and nothing enforces antisymmetry under swapping the thetas.
struct DirectRatioModel {
    int event_dim = 0;
    int param_dim = 0;
    DenseNet net;
};

inline DirectRatioModel make_direct_ratio_model(int event_dim, int param_dim,
                                                const std::vector<int>& hidden = {8, 16, 8}) {
    DirectRatioModel m;
    m.event_dim = event_dim;
    m.param_dim = param_dim;
    m.net = detail::make_mlp(event_dim + 2 * param_dim, 2, hidden, /*output_bias=*/true);
    return m;
}

inline double predict_log_ratio(const DirectRatioModel& m, const Vec& x, const Vec& theta0,
                                const Vec& theta1) {
    Vec out = forward(m.net, concat(x, theta0, theta1));
    return out[0] - out[1];
}

struct AnyModel {
    std::variant<IsnModel, DirectScoreModel, DirectRatioModel> impl;

    ArchitectureTag tag() const {
        if (std::holds_alternative<IsnModel>(impl)) return ArchitectureTag::Isn;
        if (std::holds_alternative<DirectScoreModel>(impl)) return ArchitectureTag::DirectScore;
        return ArchitectureTag::DirectRatio;
    }

    bool can_predict_score() const { return tag() != ArchitectureTag::DirectRatio; }
    bool can_predict_log_ratio() const { return tag() != ArchitectureTag::DirectScore; }

    DenseNet& net() {
        return std::visit([](auto& m) -> DenseNet& { return m.net; }, impl);
    }
    const DenseNet& net() const {
        return std::visit([](const auto& m) -> const DenseNet& { return m.net; }, impl);
    }

    int event_dim() const {
        return std::visit([](const auto& m) { return m.event_dim; }, impl);
    }
    int param_dim() const {
        return std::visit([](const auto& m) { return m.param_dim; }, impl);
    }
};

inline Vec predict_score(const AnyModel& m, const Vec& x, const Vec& theta) {
    if (const auto* isn_model = std::get_if<IsnModel>(&m.impl)) return predict_score(*isn_model, x, theta);
    if (const auto* ds = std::get_if<DirectScoreModel>(&m.impl)) return predict_score(*ds, x, theta);
    throw ConfigError("a direct ratio model cannot predict scores");
}

inline double predict_log_ratio(const AnyModel& m, const Vec& x, const Vec& theta0, const Vec& theta1) {
    if (const auto* isn_model = std::get_if<IsnModel>(&m.impl))
        return predict_log_ratio(*isn_model, x, theta0, theta1);
    if (const auto* dr = std::get_if<DirectRatioModel>(&m.impl))
        return predict_log_ratio(*dr, x, theta0, theta1);
    throw ConfigError("a direct score model cannot predict likelihood ratios");
}

inline AnyModel make_model(ArchitectureTag tag, int event_dim, int param_dim,
                           const std::vector<int>& hidden = {8, 16, 8}) {
    switch (tag) {
        case ArchitectureTag::Isn: return {make_isn_model(event_dim, param_dim, hidden)};
        case ArchitectureTag::DirectScore: return {make_direct_score_model(event_dim, param_dim, hidden)};
        case ArchitectureTag::DirectRatio: return {make_direct_ratio_model(event_dim, param_dim, hidden)};
    }
    throw ConfigError("unreachable architecture tag");
}

// ---------------------------------------------------------------------------
// Model files: versioned JSON with the architecture tag, layer structure and
// row-major weight arrays. Doubles survive the round trip value-exactly.
// ---------------------------------------------------------------------------

constexpr int kModelFormatVersion = 1;

inline void save_model(const AnyModel& model, const std::string& path) {
    const DenseNet& net = model.net();
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["architecture_tag"] = to_string(model.tag());
    j["event_dim"] = model.event_dim();
    j["param_dim"] = model.param_dim();
    j["layer_dims"] = net.layer_dims;
    std::vector<std::string> acts;
    for (Activation a : net.activations) acts.push_back(to_string(a));
    j["activations"] = acts;
    std::vector<bool> bias_flags(net.bias_enabled.begin(), net.bias_enabled.end());
    j["bias_enabled"] = bias_flags;
    std::vector<std::vector<double>> weights, biases;
    for (const auto& w : net.weights) weights.push_back(w.data);
    for (const auto& b : net.biases) biases.push_back(b);
    j["weights"] = weights;
    j["biases"] = biases;

    std::ofstream out(path);
    if (!out) throw IoError("cannot open model file for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed while writing model file: " + path);
}

inline AnyModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": invalid model file: " + e.what());
    }
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
        throw ParseError(path + ": missing format_version");
    if (j["format_version"].get<int>() != kModelFormatVersion)
        throw ParseError(path + ": unsupported model format version " +
                         std::to_string(j["format_version"].get<int>()));

    ArchitectureTag tag = architecture_from_string(j.at("architecture_tag").get<std::string>());
    int event_dim = j.at("event_dim").get<int>();
    int param_dim = j.at("param_dim").get<int>();
    std::vector<int> dims = j.at("layer_dims").get<std::vector<int>>();
    std::vector<Activation> acts;
    for (const auto& s : j.at("activations")) acts.push_back(activation_from_string(s.get<std::string>()));
    std::vector<uint8_t> bias_flags;
    for (const auto& b : j.at("bias_enabled")) bias_flags.push_back(b.get<bool>() ? 1 : 0);

    DenseNet net = make_dense_net(dims, acts, bias_flags);
    auto weights = j.at("weights").get<std::vector<std::vector<double>>>();
    auto biases = j.at("biases").get<std::vector<std::vector<double>>>();
    if (weights.size() != net.weights.size() || biases.size() != net.biases.size())
        throw ParseError(path + ": layer count mismatch between dims and weight arrays");
    for (size_t k = 0; k < weights.size(); ++k) {
        if (weights[k].size() != net.weights[k].size() || biases[k].size() != net.biases[k].size())
            throw ParseError(path + ": weight array shape mismatch in layer " + std::to_string(k));
        net.weights[k].data = weights[k];
        net.biases[k] = biases[k];
    }

    int expected_input = event_dim + (tag == ArchitectureTag::DirectRatio ? 2 : 1) * param_dim;
    if (net.input_dim() != expected_input)
        throw ParseError(path + ": input layer does not match event/param dims for tag " + to_string(tag));

    AnyModel model;
    switch (tag) {
        case ArchitectureTag::Isn: model.impl = IsnModel{event_dim, param_dim, std::move(net)}; break;
        case ArchitectureTag::DirectScore:
            model.impl = DirectScoreModel{event_dim, param_dim, std::move(net)};
            break;
        case ArchitectureTag::DirectRatio:
            model.impl = DirectRatioModel{event_dim, param_dim, std::move(net)};
            break;
    }
    return model;
}

}  // namespace isn
