#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "surfblc/errors.hpp"

namespace surfblc::nn {

using Vec = std::vector<double>;

/// 1D multi-channel signal, position-major storage (len x channels).
struct Signal {
    std::size_t len = 0;
    std::size_t channels = 0;
    Vec data;

    Signal() = default;
    Signal(std::size_t l, std::size_t c) : len(l), channels(c), data(l * c, 0.0) {}

    double at(std::size_t pos, std::size_t ch) const { return data[pos * channels + ch]; }
    double& at(std::size_t pos, std::size_t ch) { return data[pos * channels + ch]; }
};

enum class Activation { Linear, Relu, LeakyRelu };

// elementwise activations; LeakyReLU slope is 0.2
double relu(double x);
double leaky_relu(double x);
double linear(double x);
double activate(Activation a, double x);
double activate_grad(Activation a, double x);  // derivative w.r.t. the pre-activation

// --- layers -----------------------------------------------------------------

struct DenseLayer {
    std::size_t in = 0, out = 0;
    Vec w;  // out x in, row-major
    Vec b;  // out

    static DenseLayer glorot(std::size_t in, std::size_t out, std::mt19937_64& rng);
    std::size_t param_count() const { return in * out + out; }

    Vec forward(const Vec& x) const;
    // returns dx; accumulates parameter gradients into gw / gb
    Vec backward(const Vec& x, const Vec& dy, Vec& gw, Vec& gb) const;
};

/// Same-padded 1D convolution (cross-correlation) with per-channel bias.
struct Conv1dLayer {
    std::size_t in_ch = 0, out_ch = 0, k = 0;
    Vec w;  // [tap][in_ch][out_ch] contiguous
    Vec b;  // out_ch

    static Conv1dLayer glorot(std::size_t in_ch, std::size_t out_ch, std::size_t k,
                              std::mt19937_64& rng);
    std::size_t param_count() const { return in_ch * k * out_ch + out_ch; }

    Signal forward(const Signal& x) const;
    Signal backward(const Signal& x, const Signal& dy, Vec& gw, Vec& gb) const;
};

/// Per-channel standardization over the positions of one sample, epsilon 1e-5,
/// no learnable affine terms.
Signal instance_norm(const Signal& x);
Signal instance_norm_backward(const Signal& x, const Signal& dy);

// --- losses -----------------------------------------------------------------

double loss_mae(std::span<const double> pred, std::span<const double> target);
double loss_mse(std::span<const double> pred, std::span<const double> target);
Vec loss_mae_grad(std::span<const double> pred, std::span<const double> target);
Vec loss_mse_grad(std::span<const double> pred, std::span<const double> target);

// --- optimization -----------------------------------------------------------

/// Bias-corrected Adam over a list of parameter views. The moment
/// accumulators mirror the parameter shapes exactly.
struct Adam {
    double lr;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Vec m, v;
    std::uint64_t t = 0;

    Adam(std::size_t n_params, double lr_) : lr(lr_), m(n_params, 0.0), v(n_params, 0.0) {}

    void step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads);
};

/// Divides the learning rate by 3 after `patience` consecutive epochs without
/// improvement of the best observed validation loss.
struct PlateauScheduler {
    int patience = 5;
    double factor = 1.0 / 3.0;
    double best = 0;
    bool have_best = false;
    int stall = 0;

    double update(double validation_loss, double lr);
};

// --- networks ---------------------------------------------------------------

/// Fully-connected network. forward() caches intermediates for backward().
struct Mlp {
    std::vector<DenseLayer> layers;
    std::vector<Activation> acts;  // one per layer

    Vec forward(const Vec& x);                 // training path, records cache
    Vec infer(const Vec& x) const;             // no cache
    Vec backward(const Vec& dloss_dy);         // returns dloss/dx
    void zero_grads();

    std::size_t param_count() const;
    std::vector<std::span<double>> param_views();
    std::vector<std::span<const double>> param_views() const;
    std::vector<std::span<const double>> grad_views() const;

    std::vector<Vec> gw, gb;

  private:
    std::vector<Vec> cache_x_;       // input of each layer
    std::vector<Vec> cache_pre_;     // pre-activation of each layer
    bool has_cache_ = false;
};

/// 1D CNN: conv -> instance norm -> activation per hidden layer, plain conv
/// for the output layer.
struct ConvNet {
    std::vector<Conv1dLayer> layers;
    Activation hidden_act = Activation::Relu;

    Signal forward(const Signal& x);
    Signal infer(const Signal& x) const;
    Signal backward(const Signal& dloss_dy);
    void zero_grads();

    std::size_t param_count() const;
    std::vector<std::span<double>> param_views();
    std::vector<std::span<const double>> param_views() const;
    std::vector<std::span<const double>> grad_views() const;

    std::vector<Vec> gw, gb;

  private:
    std::vector<Signal> cache_x_;     // input of each conv
    std::vector<Signal> cache_conv_;  // conv output (pre instance norm)
    std::vector<Signal> cache_norm_;  // normalized output (pre activation)
    bool has_cache_ = false;
};

// reference architectures
Mlp make_param_net(std::uint64_t seed);     // 12-64-128-256-256-3, LReLU, linear out
ConvNet make_blc_net(std::uint64_t seed);   // 7-64-64-128-128-256-256-512-512-1, k=5

inline constexpr std::size_t kParamNetTotal = 108739;
inline constexpr std::size_t kBlcNetTotal = 2607681;

} // namespace surfblc::nn
