#pragma once

#include <array>
#include <utility>

#include "surfblc/image.hpp"
#include "surfblc/nn.hpp"

namespace surfblc {

/// Shared training knobs for both model stages.
struct TrainConfig {
    enum class Loss { Mae, Mse };

    std::size_t epochs = 30;
    double lr = 1e-3;
    Loss loss = Loss::Mae;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool standardize_inputs = false;
    int scheduler_patience = 5;
    double scheduler_factor = 1.0 / 3.0;
};

/// Sk / Vvv / Vmp triple in physical units (um, ml/m^2, ml/m^2).
struct ParamTriple {
    double sk = 0;
    double vvv = 0;
    double vmp = 0;
};

/// Per-family mean/std computed on training targets.
struct Standardizer {
    std::array<double, 3> mean{0, 0, 0};
    std::array<double, 3> stdev{1, 1, 1};

    static Standardizer fit(const std::vector<ParamTriple>& targets);
    std::array<double, 3> standardize(const ParamTriple& t) const;
    ParamTriple destandardize(const std::array<double, 3>& z) const;
};

using FeatureVector = std::array<double, 12>;

/// [Sk(sigma=8..64), Vvv(sigma=8..64), Vmp(sigma=8..64)] of the filtered-BLC stack.
FeatureVector build_feature_vector(const FilteredBlcStack& stack);

struct ParamModel {
    nn::Mlp net;
    Standardizer standardizer;
    bool inputs_standardized = false;
    std::array<double, 12> input_mean{};
    std::array<double, 12> input_stdev{};

    /// network output in standardized target space
    std::array<double, 3> predict_standardized(const FeatureVector& f) const;
    /// de-standardized physical-unit prediction
    ParamTriple predict(const FeatureVector& f) const;
};

using ParamSample = std::pair<FeatureVector, ParamTriple>;

ParamModel train_params(const std::vector<ParamSample>& data, const TrainConfig& config);

} // namespace surfblc
