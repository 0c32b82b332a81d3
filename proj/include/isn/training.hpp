#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "isn/core.hpp"
#include "isn/datagen.hpp"
#include "isn/losses.hpp"
#include "isn/models.hpp"
#include "isn/net.hpp"
#include "isn/rng.hpp"

namespace isn {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 20;
    double validation_fraction = 0.1;
    AdamConfig adam;
};

struct TrainingReport {
    std::vector<double> train_loss;  // mean per-example loss per epoch
    std::vector<double> val_loss;
    long clamp_events = 0;
    size_t n_train = 0;
    size_t n_val = 0;
};

namespace detail {

inline void check_trainable(const AnyModel& model, const Dataset& data, LossKind loss) {
    if (data.size() == 0) throw ConfigError("training dataset is empty");
    if (is_score_loss(loss)) {
        if (data.kind != DatasetKind::Score)
            throw ConfigError("loss " + to_string(loss) + " needs a score dataset, got task '" + data.task +
                              "'");
        if (!model.can_predict_score())
            throw ConfigError("model " + to_string(model.tag()) + " has no score head");
    } else {
        if (data.kind != DatasetKind::Ratio)
            throw ConfigError("loss " + to_string(loss) + " needs a ratio dataset, got task '" + data.task +
                              "'");
        if (!model.can_predict_log_ratio())
            throw ConfigError("model " + to_string(model.tag()) + " has no ratio head");
        if (requires_latent(loss) && !data.has_latent)
            throw ConfigError("loss " + to_string(loss) + " requires latent supervision (r_lat column)");
    }
}

// Per-example loss + gradient accumulation for every (model, loss) pairing.
// Score losses on the potential model go through the second-derivative path;
// ratio losses on it are two plain backward passes sharing weights.
inline double accumulate_example(AnyModel& model, const Dataset& data, size_t idx, LossKind loss,
                                 WeightGradients& grads, long& clamp_events) {
    if (is_score_loss(loss)) {
        const ScoreExample& ex = data.score[idx];
        if (auto* isn_model = std::get_if<IsnModel>(&model.impl)) {
            AugmentedTrace aug = forward_with_input_gradient_trace(
                isn_model->net, concat(ex.x, ex.theta), isn_model->theta_slice());
            Vec pred(isn_model->param_dim);
            for (int j = 0; j < isn_model->param_dim; ++j) pred[j] = aug.jacobian()(0, j);
            ScoreLossResult res = score_loss_value_and_grad(pred, ex);
            Matrix upstream(1, isn_model->param_dim);
            for (int j = 0; j < isn_model->param_dim; ++j) upstream(0, j) = res.grad[j];
            accumulate_backward_through_input_gradient(isn_model->net, aug, upstream, nullptr, grads);
            return res.value;
        }
        auto& ds = std::get<DirectScoreModel>(model.impl);
        ForwardTrace trace = forward_trace(ds.net, concat(ex.x, ex.theta));
        ScoreLossResult res = score_loss_value_and_grad(trace.output(), ex);
        accumulate_backward(ds.net, trace, res.grad, grads);
        return res.value;
    }

    const RatioExample& ex = data.ratio[idx];
    if (auto* isn_model = std::get_if<IsnModel>(&model.impl)) {
        ForwardTrace trace0 = forward_trace(isn_model->net, concat(ex.x, ex.theta0));
        ForwardTrace trace1 = forward_trace(isn_model->net, concat(ex.x, ex.theta1));
        double t = trace0.output()[0] - trace1.output()[0];
        RatioLossResult res = ratio_loss_value_and_grad(loss, t, ex);
        if (res.clamped) ++clamp_events;
        accumulate_backward(isn_model->net, trace0, {res.grad}, grads);
        accumulate_backward(isn_model->net, trace1, {-res.grad}, grads);
        return res.value;
    }
    auto& dr = std::get<DirectRatioModel>(model.impl);
    ForwardTrace trace = forward_trace(dr.net, concat(ex.x, ex.theta0, ex.theta1));
    double t = trace.output()[0] - trace.output()[1];
    RatioLossResult res = ratio_loss_value_and_grad(loss, t, ex);
    if (res.clamped) ++clamp_events;
    accumulate_backward(dr.net, trace, {res.grad, -res.grad}, grads);
    return res.value;
}

inline double example_loss(const AnyModel& model, const Dataset& data, size_t idx, LossKind loss) {
    if (is_score_loss(loss)) {
        const ScoreExample& ex = data.score[idx];
        return score_loss_value_and_grad(predict_score(model, ex.x, ex.theta), ex).value;
    }
    const RatioExample& ex = data.ratio[idx];
    double t = predict_log_ratio(model, ex.x, ex.theta0, ex.theta1);
    return ratio_loss_value_and_grad(loss, t, ex).value;
}

}  // namespace detail

// Mini-batch Adam training. The validation split is the tail of one initial
// shuffle and holds exactly ceil(validation_fraction * n) examples; batches
// are reshuffled once per epoch from the same stream. Average losses are
// reported per epoch; a non-finite batch loss aborts with the epoch/batch
// index.
inline TrainingReport train_model(AnyModel& model, const Dataset& data, LossKind loss,
                                  const TrainConfig& config, Rng& rng) {
    detail::check_trainable(model, data, loss);

    size_t n = data.size();
    std::vector<size_t> indices(n);
    std::iota(indices.begin(), indices.end(), size_t{0});
    rng.shuffle(indices.begin(), indices.end());
    size_t n_val = static_cast<size_t>(
        std::ceil(config.validation_fraction * static_cast<double>(n)));
    if (n_val >= n) n_val = n > 1 ? n - 1 : 0;
    size_t n_train = n - n_val;
    std::vector<size_t> train_idx(indices.begin(), indices.begin() + n_train);
    std::vector<size_t> val_idx(indices.begin() + n_train, indices.end());

    TrainingReport report;
    report.n_train = n_train;
    report.n_val = n_val;
    AdamState adam = make_adam_state(model.net(), config.adam);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(train_idx.begin(), train_idx.end());
        double epoch_loss = 0.0;
        size_t batch_start = 0;
        int batch_index = 0;
        while (batch_start < n_train) {
            size_t batch_end = std::min(batch_start + static_cast<size_t>(config.batch_size), n_train);
            WeightGradients grads = zero_gradients(model.net());
            double batch_loss = 0.0;
            for (size_t i = batch_start; i < batch_end; ++i)
                batch_loss +=
                    detail::accumulate_example(model, data, train_idx[i], loss, grads, report.clamp_events);
            double inv = 1.0 / static_cast<double>(batch_end - batch_start);
            if (!std::isfinite(batch_loss))
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index));
            grads.scale(inv);
            adam_step(model.net(), grads, adam);
            epoch_loss += batch_loss;
            batch_start = batch_end;
            ++batch_index;
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(n_train));

        double val_loss = 0.0;
        for (size_t idx : val_idx) val_loss += detail::example_loss(model, data, idx, loss);
        report.val_loss.push_back(n_val ? val_loss / static_cast<double>(n_val) : 0.0);
    }
    return report;
}

}  // namespace isn
