#pragma once

#include <filesystem>

#include "surfblc/param_model.hpp"

namespace surfblc {

/// K x 7 network input: the four filtered-BLC channels plus three constant
/// channels broadcasting the standardized stage-1 parameter predictions.
nn::Signal assemble_input(const FilteredBlcStack& stack, const std::array<double, 3>& params_std);

struct BlcModel {
    nn::ConvNet net;

    /// raw network output (length K, possibly non-monotone)
    nn::Vec predict_raw(const nn::Signal& signal) const;
    /// final prediction: raw output projected onto non-increasing vectors
    Blc predict(const nn::Signal& signal) const;
};

using BlcSample = std::pair<nn::Signal, Blc>;

/// Minimizes the component-wise MAE (Wasserstein-1) over the dataset.
BlcModel train_blc(const std::vector<BlcSample>& data, const TrainConfig& config);

struct PreprocessConfig {
    std::size_t k = 512;
    std::size_t resize_rows = 512;
    std::size_t resize_cols = 512;
};

/// Both trained stages plus everything inference needs.
struct ModelBundle {
    ParamModel stage1;
    BlcModel stage2;
    PreprocessConfig prep;
    int version = 1;
    std::string config_echo = "{}";  // training configuration, JSON text

    void save(const std::filesystem::path& path) const;
    static ModelBundle load(const std::filesystem::path& path);
};

struct TransferResult {
    Blc blc;
    ParamTriple params;          // extracted from the predicted BLC
    ParamTriple stage1_params;   // de-standardized stage-1 prediction
};

/// The full transfer function: image -> resize -> Psi -> stage 1 -> stage 2.
TransferResult predict_transfer(const ModelBundle& bundle, const ReflectionImage& img);

} // namespace surfblc
