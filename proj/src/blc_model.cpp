#include "surfblc/blc_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "surfblc/isotonic.hpp"

namespace surfblc {

using nlohmann::json;

nn::Signal assemble_input(const FilteredBlcStack& stack, const std::array<double, 3>& params_std) {
    for (const auto& c : stack.curves)
        if (c.size() != stack.k) throw InvalidInput("filtered-BLC stack has inconsistent K");
    nn::Signal s(stack.k, 7);
    for (std::size_t p = 0; p < stack.k; ++p) {
        for (std::size_t c = 0; c < 4; ++c) s.at(p, c) = stack.curves[c][p];
        for (std::size_t c = 0; c < 3; ++c) s.at(p, 4 + c) = params_std[c];
    }
    return s;
}

nn::Vec BlcModel::predict_raw(const nn::Signal& signal) const {
    nn::Signal out = net.infer(signal);
    nn::Vec y(out.len);
    for (std::size_t p = 0; p < out.len; ++p) y[p] = out.at(p, 0);
    return y;
}

Blc BlcModel::predict(const nn::Signal& signal) const {
    return Blc(isotonic_nonincreasing(predict_raw(signal)));
}

BlcModel train_blc(const std::vector<BlcSample>& data, const TrainConfig& config) {
    if (data.empty()) throw InvalidInput("BLC training needs at least 1 sample");
    const std::size_t k = data.front().first.len;
    for (const auto& [sig, blc] : data)
        if (sig.len != k || sig.channels != 7 || blc.k() != k)
            throw InvalidInput("BLC training data has inconsistent shapes");

    BlcModel model;
    model.net = nn::make_blc_net(config.seed);
    nn::Adam adam(model.net.param_count(), config.lr);
    nn::PlateauScheduler sched{config.scheduler_patience, config.scheduler_factor};
    std::mt19937_64 rng(config.seed);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            const double inv_bn = 1.0 / double(end - start);
            model.net.zero_grads();
            for (std::size_t i = start; i < end; ++i) {
                const auto& [sig, target] = data[order[i]];
                nn::Signal out = model.net.forward(sig);
                nn::Vec pred(out.len);
                for (std::size_t p = 0; p < out.len; ++p) pred[p] = out.at(p, 0);
                const double l = nn::loss_mae(pred, target.values);
                if (!std::isfinite(l)) throw TrainingError("non-finite Wasserstein-1 loss");
                epoch_loss += l;
                nn::Vec g = nn::loss_mae_grad(pred, target.values);
                nn::Signal gs(out.len, 1);
                for (std::size_t p = 0; p < out.len; ++p) gs.at(p, 0) = g[p] * inv_bn;
                model.net.backward(gs);
            }
            adam.step(model.net.param_views(), model.net.grad_views());
        }
        epoch_loss /= double(data.size());
        adam.lr = sched.update(epoch_loss, adam.lr);
    }
    return model;
}

// --- bundle serialization -----------------------------------------------------

namespace {

constexpr char kWeightMagic[5] = "HTWT";  // 4 chars + NUL

json architecture_json(const ModelBundle& b) {
    json stage1 = json::array();
    for (const auto& l : b.stage1.net.layers) stage1.push_back({l.in, l.out});
    json stage2 = json::array();
    for (const auto& l : b.stage2.net.layers) stage2.push_back({l.in_ch, l.out_ch, l.k});
    return {{"stage1", stage1}, {"stage2", stage2}};
}

void append_params(std::vector<double>& blob, const std::vector<std::span<const double>>& views) {
    for (auto v : views) blob.insert(blob.end(), v.begin(), v.end());
}

void check_counts(const nn::Mlp& mlp, const nn::ConvNet& conv) {
    if (mlp.param_count() != nn::kParamNetTotal || conv.param_count() != nn::kBlcNetTotal)
        throw ModelFormatError("architecture parameter counts do not match the reference model");
}

} // namespace

void ModelBundle::save(const std::filesystem::path& path) const {
    check_counts(stage1.net, stage2.net);

    json header;
    header["format"] = "surfblc-bundle";
    header["format_version"] = version;
    header["architecture"] = architecture_json(*this);
    header["standardizer"] = {{"mean", stage1.standardizer.mean},
                              {"stdev", stage1.standardizer.stdev}};
    header["input_standardizer"] = {{"enabled", stage1.inputs_standardized},
                                    {"mean", stage1.input_mean},
                                    {"stdev", stage1.input_stdev}};
    header["preprocess"] = {{"k", prep.k},
                            {"resize", {prep.resize_rows, prep.resize_cols}},
                            {"sigmas", FilteredBlcStack::sigmas}};
    header["config"] = json::parse(config_echo.empty() ? "{}" : config_echo);

    std::vector<double> blob;
    blob.reserve(nn::kParamNetTotal + nn::kBlcNetTotal);
    append_params(blob, std::as_const(stage1.net).param_views());
    append_params(blob, std::as_const(stage2.net).param_views());

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    const std::string text = header.dump();
    os.write(text.data(), std::streamsize(text.size()));
    os.put('\n');
    os.write(kWeightMagic, 4);
    os.write(reinterpret_cast<const char*>(blob.data()), std::streamsize(blob.size() * 8));
    if (!os) throw IoError("write failed: " + path.string());
}

ModelBundle ModelBundle::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    const std::string marker = std::string("\n") + kWeightMagic;
    const std::size_t pos = bytes.find(marker);
    if (pos == std::string::npos) throw ModelFormatError("weight blob magic not found");

    json header;
    try {
        header = json::parse(bytes.substr(0, pos));
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("bundle header is not valid JSON: ") + e.what());
    }
    if (header.value("format", "") != "surfblc-bundle")
        throw ModelFormatError("not a surfblc model bundle");

    ModelBundle b;
    b.version = header.value("format_version", 1);
    b.config_echo = header.value("config", json::object()).dump();
    b.prep.k = header["preprocess"]["k"].get<std::size_t>();
    b.prep.resize_rows = header["preprocess"]["resize"][0].get<std::size_t>();
    b.prep.resize_cols = header["preprocess"]["resize"][1].get<std::size_t>();

    b.stage1.net = nn::make_param_net(0);
    b.stage2.net = nn::make_blc_net(0);

    // architecture and parameter-count conformance
    const json& arch = header["architecture"];
    if (arch["stage1"].size() != b.stage1.net.layers.size() ||
        arch["stage2"].size() != b.stage2.net.layers.size())
        throw ModelFormatError("layer counts do not match the reference architecture");
    for (std::size_t i = 0; i < b.stage1.net.layers.size(); ++i)
        if (arch["stage1"][i][0] != b.stage1.net.layers[i].in ||
            arch["stage1"][i][1] != b.stage1.net.layers[i].out)
            throw ModelFormatError("stage-1 layer shape mismatch");
    for (std::size_t i = 0; i < b.stage2.net.layers.size(); ++i)
        if (arch["stage2"][i][0] != b.stage2.net.layers[i].in_ch ||
            arch["stage2"][i][1] != b.stage2.net.layers[i].out_ch ||
            arch["stage2"][i][2] != b.stage2.net.layers[i].k)
            throw ModelFormatError("stage-2 layer shape mismatch");
    check_counts(b.stage1.net, b.stage2.net);

    for (int i = 0; i < 3; ++i) {
        b.stage1.standardizer.mean[i] = header["standardizer"]["mean"][i].get<double>();
        b.stage1.standardizer.stdev[i] = header["standardizer"]["stdev"][i].get<double>();
    }
    b.stage1.inputs_standardized = header["input_standardizer"]["enabled"].get<bool>();
    for (int i = 0; i < 12; ++i) {
        b.stage1.input_mean[i] = header["input_standardizer"]["mean"][i].get<double>();
        b.stage1.input_stdev[i] = header["input_standardizer"]["stdev"][i].get<double>();
    }

    const std::size_t total = nn::kParamNetTotal + nn::kBlcNetTotal;
    const std::size_t blob_off = pos + marker.size();
    if (bytes.size() - blob_off != total * 8)
        throw ModelFormatError("weight blob size does not match the parameter count");
    const double* src = reinterpret_cast<const double*>(bytes.data() + blob_off);
    std::size_t off = 0;
    for (auto v : b.stage1.net.param_views()) {
        std::memcpy(v.data(), src + off, v.size() * 8);
        off += v.size();
    }
    for (auto v : b.stage2.net.param_views()) {
        std::memcpy(v.data(), src + off, v.size() * 8);
        off += v.size();
    }
    return b;
}

TransferResult predict_transfer(const ModelBundle& bundle, const ReflectionImage& img) {
    img.validate();
    ReflectionImage resized = resize_bilinear(img, bundle.prep.resize_rows, bundle.prep.resize_cols);
    FilteredBlcStack stack = psi_transform(resized, bundle.prep.k);
    FeatureVector features = build_feature_vector(stack);
    std::array<double, 3> params_std = bundle.stage1.predict_standardized(features);
    nn::Signal signal = assemble_input(stack, params_std);

    TransferResult r;
    r.blc = bundle.stage2.predict(signal);
    r.stage1_params = bundle.stage1.standardizer.destandardize(params_std);
    r.params.sk = extract_k_params(r.blc).sk;
    VolumeParams v = extract_volume_params(r.blc);
    r.params.vvv = v.vvv;
    r.params.vmp = v.vmp;
    return r;
}

} // namespace surfblc
