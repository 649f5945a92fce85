#include "cola/layers.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cola/kernels.hpp"

namespace cola {

Param::Param(std::string n, std::vector<int> s, double fill) : name(std::move(n)), shape(std::move(s)) {
    std::size_t count = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("parameter '" + name + "' has a non-positive dimension");
        count *= static_cast<std::size_t>(d);
    }
    value.assign(count, fill);
    grad.assign(count, 0.0);
}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, bool with_bias)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}), in_(in_channels), out_(out_channels),
      k_(kernel) {
    if (kernel % 2 == 0) throw std::invalid_argument("Conv2d '" + name + "': kernel must be odd");
    if (with_bias) bias = Param(name + ".bias", {out_channels});
}

void Conv2d::init_he(std::mt19937_64& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_) * k_ * k_));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& w : weight.value) w = dist(rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

void Conv2d::init_zero() {
    std::fill(weight.value.begin(), weight.value.end(), 0.0);
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x) const {
    if (x.channels() != in_) {
        throw std::invalid_argument("Conv2d '" + weight.name + "': expected " + std::to_string(in_) +
                                    " input channels, got " + std::to_string(x.channels()));
    }
    return kernels::conv2d(x, weight.value, bias.value, out_, k_);
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& grad_out, bool param_grads, bool input_grad) {
    if (param_grads) kernels::conv2d_param_grad(x, grad_out, k_, weight.grad, bias.grad);
    if (input_grad) return kernels::conv2d_input_grad(grad_out, weight.value, in_, k_);
    return {};
}

LayerNorm::LayerNorm(std::string name, int channels)
    : gamma(name + ".gamma", {channels}, 1.0), beta(name + ".beta", {channels}, 0.0) {}

Tensor LayerNorm::forward(const Tensor& x, Cache* cache) const {
    if (static_cast<std::size_t>(x.channels()) != gamma.size()) throw std::invalid_argument("LayerNorm: channel mismatch");
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x.values()) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x.values()) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + kEps);

    Tensor normalized(x.shape());
    Tensor out(x.shape());
    for (int c = 0; c < x.channels(); ++c) {
        const auto src = x.channel(c);
        auto nrm = normalized.channel(c);
        auto dst = out.channel(c);
        const double g = gamma.value[static_cast<std::size_t>(c)];
        const double b = beta.value[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < src.size(); ++i) {
            nrm[i] = (src[i] - mean) * inv_std;
            dst[i] = g * nrm[i] + b;
        }
    }
    if (cache != nullptr) {
        cache->normalized = std::move(normalized);
        cache->inv_std = inv_std;
    }
    return out;
}

Tensor LayerNorm::backward(const Cache& cache, const Tensor& grad_out, bool param_grads) {
    const Tensor& xhat = cache.normalized;
    const auto n = static_cast<double>(xhat.size());
    Tensor dxhat(xhat.shape());
    double sum_d = 0.0;
    double sum_dx = 0.0;
    for (int c = 0; c < xhat.channels(); ++c) {
        const auto g = grad_out.channel(c);
        const auto xh = xhat.channel(c);
        auto d = dxhat.channel(c);
        const double gm = gamma.value[static_cast<std::size_t>(c)];
        double dg = 0.0;
        double db = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            d[i] = g[i] * gm;
            sum_d += d[i];
            sum_dx += d[i] * xh[i];
            dg += g[i] * xh[i];
            db += g[i];
        }
        if (param_grads) {
            gamma.grad[static_cast<std::size_t>(c)] += dg;
            beta.grad[static_cast<std::size_t>(c)] += db;
        }
    }
    Tensor dx(xhat.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) {
        dx[i] = cache.inv_std / n * (n * dxhat[i] - sum_d - xhat[i] * sum_dx);
    }
    return dx;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_grad(const Tensor& pre_activation, const Tensor& grad_out) {
    Tensor out = grad_out;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!(pre_activation[i] > 0.0)) out[i] = 0.0;
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace cola
