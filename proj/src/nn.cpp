#include "surfblc/nn.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <mutex>

namespace surfblc::nn {

namespace {

void ensure_blas_sequential() {
    static std::once_flag flag;
    std::call_once(flag, [] { openblas_set_num_threads(1); });
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / double(fan_in + fan_out));
}

} // namespace

double relu(double x) { return x > 0 ? x : 0.0; }
double leaky_relu(double x) { return x >= 0 ? x : 0.2 * x; }
double linear(double x) { return x; }

double activate(Activation a, double x) {
    switch (a) {
        case Activation::Relu: return relu(x);
        case Activation::LeakyRelu: return leaky_relu(x);
        default: return x;
    }
}

double activate_grad(Activation a, double x) {
    switch (a) {
        case Activation::Relu: return x > 0 ? 1.0 : 0.0;
        case Activation::LeakyRelu: return x >= 0 ? 1.0 : 0.2;
        default: return 1.0;
    }
}

// --- dense ------------------------------------------------------------------

DenseLayer DenseLayer::glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    DenseLayer l;
    l.in = in;
    l.out = out;
    l.w.resize(in * out);
    l.b.assign(out, 0.0);
    std::uniform_real_distribution<double> dist(-glorot_limit(in, out), glorot_limit(in, out));
    for (double& x : l.w) x = dist(rng);
    return l;
}

Vec DenseLayer::forward(const Vec& x) const {
    if (x.size() != in) throw InvalidInput("dense layer input size mismatch");
    Vec y(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double* wr = &w[o * in];
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += wr[i] * x[i];
        y[o] = acc;
    }
    return y;
}

Vec DenseLayer::backward(const Vec& x, const Vec& dy, Vec& gw, Vec& gb) const {
    if (x.size() != in || dy.size() != out) throw InvalidInput("dense backward size mismatch");
    Vec dx(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        const double g = dy[o];
        gb[o] += g;
        const double* wr = &w[o * in];
        double* gwr = &gw[o * in];
        for (std::size_t i = 0; i < in; ++i) {
            gwr[i] += g * x[i];
            dx[i] += g * wr[i];
        }
    }
    return dx;
}

// --- conv1d -----------------------------------------------------------------

Conv1dLayer Conv1dLayer::glorot(std::size_t in_ch, std::size_t out_ch, std::size_t k,
                                std::mt19937_64& rng) {
    if (k % 2 == 0) throw ConfigError("conv1d kernel size must be odd");
    Conv1dLayer l;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.k = k;
    l.w.resize(k * in_ch * out_ch);
    l.b.assign(out_ch, 0.0);
    double lim = glorot_limit(in_ch * k, out_ch * k);
    std::uniform_real_distribution<double> dist(-lim, lim);
    for (double& x : l.w) x = dist(rng);
    return l;
}

namespace {

// A[p][t*in_ch + ic] = x[p + t - pad][ic] (zero outside), len x (k*in_ch)
Vec im2col(const Signal& x, std::size_t k) {
    const std::size_t pad = (k - 1) / 2;
    const std::size_t cw = k * x.channels;
    Vec a(x.len * cw, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
        const long shift = long(t) - long(pad);
        const std::size_t p_lo = shift < 0 ? std::size_t(-shift) : 0;
        const std::size_t p_hi = shift > 0 ? x.len - std::size_t(shift) : x.len;
        for (std::size_t p = p_lo; p < p_hi; ++p)
            std::memcpy(&a[p * cw + t * x.channels],
                        &x.data[(p + std::size_t(long(t) - long(pad))) * x.channels],
                        x.channels * sizeof(double));
    }
    return a;
}

} // namespace

Signal Conv1dLayer::forward(const Signal& x) const {
    if (k % 2 == 0) throw ConfigError("conv1d kernel size must be odd");
    if (x.channels != in_ch) throw InvalidInput("conv1d input channel mismatch");
    ensure_blas_sequential();

    Vec a = im2col(x, k);
    Signal y(x.len, out_ch);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, int(x.len), int(out_ch),
                int(k * in_ch), 1.0, a.data(), int(k * in_ch), w.data(), int(out_ch), 0.0,
                y.data.data(), int(out_ch));
    for (std::size_t p = 0; p < y.len; ++p)
        for (std::size_t oc = 0; oc < out_ch; ++oc) y.at(p, oc) += b[oc];
    return y;
}

Signal Conv1dLayer::backward(const Signal& x, const Signal& dy, Vec& gw, Vec& gb) const {
    if (x.channels != in_ch || dy.channels != out_ch || dy.len != x.len)
        throw InvalidInput("conv1d backward shape mismatch");
    ensure_blas_sequential();

    const std::size_t cw = k * in_ch;
    Vec a = im2col(x, k);

    // dW += A^T dY, db += column sums of dY
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, int(cw), int(out_ch), int(x.len), 1.0,
                a.data(), int(cw), dy.data.data(), int(out_ch), 1.0, gw.data(), int(out_ch));
    for (std::size_t p = 0; p < dy.len; ++p)
        for (std::size_t oc = 0; oc < out_ch; ++oc) gb[oc] += dy.at(p, oc);

    // dA = dY W^T, scattered back to dx
    Vec da(x.len * cw);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, int(x.len), int(cw), int(out_ch), 1.0,
                dy.data.data(), int(out_ch), w.data(), int(out_ch), 0.0, da.data(), int(cw));

    Signal dx(x.len, in_ch);
    const std::size_t pad = (k - 1) / 2;
    for (std::size_t t = 0; t < k; ++t) {
        const long shift = long(t) - long(pad);
        const std::size_t p_lo = shift < 0 ? std::size_t(-shift) : 0;
        const std::size_t p_hi = shift > 0 ? x.len - std::size_t(shift) : x.len;
        for (std::size_t p = p_lo; p < p_hi; ++p) {
            double* dst = &dx.data[(p + std::size_t(shift)) * in_ch];
            const double* src = &da[p * cw + t * in_ch];
            for (std::size_t ic = 0; ic < in_ch; ++ic) dst[ic] += src[ic];
        }
    }
    return dx;
}

// --- instance norm ----------------------------------------------------------

namespace {
constexpr double kInormEps = 1e-5;
}

Signal instance_norm(const Signal& x) {
    if (x.len < 2) throw InvalidInput("instance norm needs at least 2 positions");
    Signal y(x.len, x.channels);
    const double n = double(x.len);
    for (std::size_t c = 0; c < x.channels; ++c) {
        double mean = 0;
        for (std::size_t p = 0; p < x.len; ++p) mean += x.at(p, c);
        mean /= n;
        double var = 0;
        for (std::size_t p = 0; p < x.len; ++p) {
            double d = x.at(p, c) - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kInormEps);
        for (std::size_t p = 0; p < x.len; ++p) y.at(p, c) = (x.at(p, c) - mean) * inv;
    }
    return y;
}

Signal instance_norm_backward(const Signal& x, const Signal& dy) {
    if (x.len != dy.len || x.channels != dy.channels)
        throw InvalidInput("instance norm backward shape mismatch");
    Signal dx(x.len, x.channels);
    const double n = double(x.len);
    for (std::size_t c = 0; c < x.channels; ++c) {
        double mean = 0;
        for (std::size_t p = 0; p < x.len; ++p) mean += x.at(p, c);
        mean /= n;
        double var = 0;
        for (std::size_t p = 0; p < x.len; ++p) {
            double d = x.at(p, c) - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kInormEps);

        double mean_dy = 0, mean_dyy = 0;
        for (std::size_t p = 0; p < x.len; ++p) {
            double yv = (x.at(p, c) - mean) * inv;
            mean_dy += dy.at(p, c);
            mean_dyy += dy.at(p, c) * yv;
        }
        mean_dy /= n;
        mean_dyy /= n;
        for (std::size_t p = 0; p < x.len; ++p) {
            double yv = (x.at(p, c) - mean) * inv;
            dx.at(p, c) = (dy.at(p, c) - mean_dy - yv * mean_dyy) * inv;
        }
    }
    return dx;
}

// --- losses -----------------------------------------------------------------

namespace {
void check_same_size(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw InvalidInput("loss shape mismatch");
}
} // namespace

double loss_mae(std::span<const double> pred, std::span<const double> target) {
    check_same_size(pred, target);
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / double(pred.size());
}

double loss_mse(std::span<const double> pred, std::span<const double> target) {
    check_same_size(pred, target);
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        s += d * d;
    }
    return s / double(pred.size());
}

Vec loss_mae_grad(std::span<const double> pred, std::span<const double> target) {
    check_same_size(pred, target);
    Vec g(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        g[i] = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / double(pred.size());
    }
    return g;
}

Vec loss_mse_grad(std::span<const double> pred, std::span<const double> target) {
    check_same_size(pred, target);
    Vec g(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        g[i] = 2.0 * (pred[i] - target[i]) / double(pred.size());
    return g;
}

// --- Adam -------------------------------------------------------------------

void Adam::step(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) throw InvalidInput("Adam parameter/gradient view mismatch");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    std::size_t off = 0;
    for (std::size_t v_i = 0; v_i < params.size(); ++v_i) {
        auto p = params[v_i];
        auto g = grads[v_i];
        if (p.size() != g.size()) throw InvalidInput("Adam parameter/gradient shape mismatch");
        if (off + p.size() > m.size()) throw InvalidInput("Adam state smaller than parameters");
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw TrainingError("non-finite gradient encountered at Adam step " +
                                    std::to_string(t));
            double& mi = m[off + i];
            double& vi = v[off + i];
            mi = beta1 * mi + (1.0 - beta1) * g[i];
            vi = beta2 * vi + (1.0 - beta2) * g[i] * g[i];
            p[i] -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
        }
        off += p.size();
    }
}

double PlateauScheduler::update(double validation_loss, double lr) {
    if (!std::isfinite(validation_loss)) throw TrainingError("non-finite validation loss");
    if (!have_best || validation_loss < best) {
        best = validation_loss;
        have_best = true;
        stall = 0;
        return lr;
    }
    if (++stall >= patience) {
        stall = 0;
        return lr * factor;
    }
    return lr;
}

// --- MLP --------------------------------------------------------------------

Vec Mlp::forward(const Vec& x) {
    cache_x_.assign(layers.size(), {});
    cache_pre_.assign(layers.size(), {});
    Vec cur = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        cache_x_[i] = cur;
        Vec pre = layers[i].forward(cur);
        cache_pre_[i] = pre;
        for (double& v_ : pre) v_ = activate(acts[i], v_);
        cur = std::move(pre);
    }
    has_cache_ = true;
    return cur;
}

Vec Mlp::infer(const Vec& x) const {
    Vec cur = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        cur = layers[i].forward(cur);
        for (double& v_ : cur) v_ = activate(acts[i], v_);
    }
    return cur;
}

void Mlp::zero_grads() {
    gw.resize(layers.size());
    gb.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        gw[i].assign(layers[i].w.size(), 0.0);
        gb[i].assign(layers[i].b.size(), 0.0);
    }
}

Vec Mlp::backward(const Vec& dloss_dy) {
    if (!has_cache_) throw StateError("backward called before forward");
    if (gw.size() != layers.size()) zero_grads();
    Vec d = dloss_dy;
    for (std::size_t i = layers.size(); i-- > 0;) {
        for (std::size_t j = 0; j < d.size(); ++j)
            d[j] *= activate_grad(acts[i], cache_pre_[i][j]);
        d = layers[i].backward(cache_x_[i], d, gw[i], gb[i]);
    }
    return d;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
}

std::vector<std::span<double>> Mlp::param_views() {
    std::vector<std::span<double>> v_;
    for (auto& l : layers) {
        v_.emplace_back(l.w);
        v_.emplace_back(l.b);
    }
    return v_;
}

std::vector<std::span<const double>> Mlp::param_views() const {
    std::vector<std::span<const double>> v_;
    for (const auto& l : layers) {
        v_.emplace_back(l.w);
        v_.emplace_back(l.b);
    }
    return v_;
}

std::vector<std::span<const double>> Mlp::grad_views() const {
    std::vector<std::span<const double>> v_;
    for (std::size_t i = 0; i < gw.size(); ++i) {
        v_.emplace_back(gw[i]);
        v_.emplace_back(gb[i]);
    }
    return v_;
}

// --- ConvNet ----------------------------------------------------------------

Signal ConvNet::forward(const Signal& x) {
    const std::size_t n = layers.size();
    cache_x_.assign(n, {});
    cache_conv_.assign(n, {});
    cache_norm_.assign(n, {});
    Signal cur = x;
    for (std::size_t i = 0; i < n; ++i) {
        cache_x_[i] = cur;
        Signal conv = layers[i].forward(cur);
        if (i + 1 < n) {
            cache_conv_[i] = conv;
            Signal norm = instance_norm(conv);
            cache_norm_[i] = norm;
            for (double& v_ : norm.data) v_ = activate(hidden_act, v_);
            cur = std::move(norm);
        } else {
            cur = std::move(conv);
        }
    }
    has_cache_ = true;
    return cur;
}

Signal ConvNet::infer(const Signal& x) const {
    Signal cur = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        cur = layers[i].forward(cur);
        if (i + 1 < layers.size()) {
            cur = instance_norm(cur);
            for (double& v_ : cur.data) v_ = activate(hidden_act, v_);
        }
    }
    return cur;
}

void ConvNet::zero_grads() {
    gw.resize(layers.size());
    gb.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        gw[i].assign(layers[i].w.size(), 0.0);
        gb[i].assign(layers[i].b.size(), 0.0);
    }
}

Signal ConvNet::backward(const Signal& dloss_dy) {
    if (!has_cache_) throw StateError("backward called before forward");
    if (gw.size() != layers.size()) zero_grads();
    Signal d = dloss_dy;
    for (std::size_t i = layers.size(); i-- > 0;) {
        if (i + 1 < layers.size()) {
            for (std::size_t j = 0; j < d.data.size(); ++j)
                d.data[j] *= activate_grad(hidden_act, cache_norm_[i].data[j]);
            d = instance_norm_backward(cache_conv_[i], d);
        }
        d = layers[i].backward(cache_x_[i], d, gw[i], gb[i]);
    }
    return d;
}

std::size_t ConvNet::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
}

std::vector<std::span<double>> ConvNet::param_views() {
    std::vector<std::span<double>> v_;
    for (auto& l : layers) {
        v_.emplace_back(l.w);
        v_.emplace_back(l.b);
    }
    return v_;
}

std::vector<std::span<const double>> ConvNet::param_views() const {
    std::vector<std::span<const double>> v_;
    for (const auto& l : layers) {
        v_.emplace_back(l.w);
        v_.emplace_back(l.b);
    }
    return v_;
}

std::vector<std::span<const double>> ConvNet::grad_views() const {
    std::vector<std::span<const double>> v_;
    for (std::size_t i = 0; i < gw.size(); ++i) {
        v_.emplace_back(gw[i]);
        v_.emplace_back(gb[i]);
    }
    return v_;
}

// --- reference architectures --------------------------------------------------

Mlp make_param_net(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Mlp net;
    const std::size_t dims[] = {12, 64, 128, 256, 256, 3};
    for (std::size_t i = 0; i + 1 < std::size(dims); ++i) {
        net.layers.push_back(DenseLayer::glorot(dims[i], dims[i + 1], rng));
        net.acts.push_back(i + 2 < std::size(dims) ? Activation::LeakyRelu : Activation::Linear);
    }
    net.zero_grads();
    return net;
}

ConvNet make_blc_net(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ConvNet net;
    const std::size_t ch[] = {7, 64, 64, 128, 128, 256, 256, 512, 512, 1};
    for (std::size_t i = 0; i + 1 < std::size(ch); ++i)
        net.layers.push_back(Conv1dLayer::glorot(ch[i], ch[i + 1], 5, rng));
    net.zero_grads();
    return net;
}

} // namespace surfblc::nn
