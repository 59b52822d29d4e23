#include "surfblc/param_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace surfblc {

Standardizer Standardizer::fit(const std::vector<ParamTriple>& targets) {
    if (targets.empty()) throw InvalidInput("standardizer needs at least 1 sample");
    Standardizer s;
    const double n = double(targets.size());
    for (const auto& t : targets) {
        s.mean[0] += t.sk;
        s.mean[1] += t.vvv;
        s.mean[2] += t.vmp;
    }
    for (double& m : s.mean) m /= n;
    // a single sample carries no spread information; center it, unit scale
    if (targets.size() == 1) return s;
    std::array<double, 3> var{};
    for (const auto& t : targets) {
        const double d[3] = {t.sk - s.mean[0], t.vvv - s.mean[1], t.vmp - s.mean[2]};
        for (int i = 0; i < 3; ++i) var[i] += d[i] * d[i];
    }
    for (int i = 0; i < 3; ++i) {
        s.stdev[i] = std::sqrt(var[i] / n);
        if (s.stdev[i] <= 0 || !std::isfinite(s.stdev[i]))
            throw ConfigError("degenerate target variance in parameter family " +
                              std::to_string(i));
    }
    return s;
}

std::array<double, 3> Standardizer::standardize(const ParamTriple& t) const {
    return {(t.sk - mean[0]) / stdev[0], (t.vvv - mean[1]) / stdev[1],
            (t.vmp - mean[2]) / stdev[2]};
}

ParamTriple Standardizer::destandardize(const std::array<double, 3>& z) const {
    return {z[0] * stdev[0] + mean[0], z[1] * stdev[1] + mean[1], z[2] * stdev[2] + mean[2]};
}

FeatureVector build_feature_vector(const FilteredBlcStack& stack) {
    FeatureVector f{};
    for (std::size_t c = 0; c < 4; ++c) {
        Blc curve(stack.curves[c]);
        f[c] = extract_k_params(curve).sk;
        VolumeParams v = extract_volume_params(curve);
        f[4 + c] = v.vvv;
        f[8 + c] = v.vmp;
    }
    return f;
}

std::array<double, 3> ParamModel::predict_standardized(const FeatureVector& f) const {
    nn::Vec x(f.begin(), f.end());
    if (inputs_standardized)
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - input_mean[i]) / input_stdev[i];
    nn::Vec y = net.infer(x);
    return {y[0], y[1], y[2]};
}

ParamTriple ParamModel::predict(const FeatureVector& f) const {
    return standardizer.destandardize(predict_standardized(f));
}

ParamModel train_params(const std::vector<ParamSample>& data, const TrainConfig& config) {
    if (data.empty()) throw InvalidInput("parameter training needs at least 1 sample");

    ParamModel model;
    std::vector<ParamTriple> targets;
    targets.reserve(data.size());
    for (const auto& [f, t] : data) targets.push_back(t);
    model.standardizer = Standardizer::fit(targets);

    model.inputs_standardized = config.standardize_inputs;
    if (model.inputs_standardized) {
        model.input_mean.fill(0);
        model.input_stdev.fill(0);
        for (const auto& [f, t] : data)
            for (std::size_t i = 0; i < 12; ++i) model.input_mean[i] += f[i];
        for (double& m : model.input_mean) m /= double(data.size());
        for (const auto& [f, t] : data)
            for (std::size_t i = 0; i < 12; ++i) {
                double d = f[i] - model.input_mean[i];
                model.input_stdev[i] += d * d;
            }
        for (double& s : model.input_stdev) {
            s = std::sqrt(s / double(data.size()));
            if (s <= 0) s = 1.0;  // constant feature, pass through centered
        }
    } else {
        model.input_mean.fill(0);
        model.input_stdev.fill(1);
    }

    // precompute standardized inputs/targets
    std::vector<nn::Vec> xs, ts;
    xs.reserve(data.size());
    ts.reserve(data.size());
    for (const auto& [f, t] : data) {
        nn::Vec x(f.begin(), f.end());
        if (model.inputs_standardized)
            for (std::size_t i = 0; i < 12; ++i)
                x[i] = (x[i] - model.input_mean[i]) / model.input_stdev[i];
        xs.push_back(std::move(x));
        auto z = model.standardizer.standardize(t);
        ts.push_back(nn::Vec(z.begin(), z.end()));
    }

    model.net = nn::make_param_net(config.seed);
    nn::Adam adam(model.net.param_count(), config.lr);
    nn::PlateauScheduler sched{config.scheduler_patience, config.scheduler_factor};
    std::mt19937_64 rng(config.seed);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    const bool mae = config.loss == TrainConfig::Loss::Mae;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            const double inv_bn = 1.0 / double(end - start);
            model.net.zero_grads();
            for (std::size_t i = start; i < end; ++i) {
                const nn::Vec& x = xs[order[i]];
                const nn::Vec& tgt = ts[order[i]];
                nn::Vec pred = model.net.forward(x);
                epoch_loss += mae ? nn::loss_mae(pred, tgt) : nn::loss_mse(pred, tgt);
                nn::Vec g = mae ? nn::loss_mae_grad(pred, tgt) : nn::loss_mse_grad(pred, tgt);
                for (double& gv : g) gv *= inv_bn;
                model.net.backward(g);
            }
            adam.step(model.net.param_views(), model.net.grad_views());
        }
        epoch_loss /= double(data.size());
        adam.lr = sched.update(epoch_loss, adam.lr);
    }
    return model;
}

} // namespace surfblc
