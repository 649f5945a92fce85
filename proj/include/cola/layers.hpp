#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cola/tensor.hpp"

namespace cola {

/// A named learnable array together with its gradient accumulator.
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;

    Param() = default;
    Param(std::string name, std::vector<int> shape, double fill = 0.0);

    std::size_t size() const { return value.size(); }
    void zero_grad();
};

/// Stride-1 "same" convolution with an odd square kernel and optional bias.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_channels, int out_channels, int kernel, bool with_bias);

    /// He-normal weights (std = sqrt(2 / fan_in)), zero bias.
    void init_he(std::mt19937_64& rng);
    void init_zero();

    Tensor forward(const Tensor& x) const;
    /// Accumulates parameter gradients when `param_grads` is set; returns dL/dx when `input_grad` is set.
    Tensor backward(const Tensor& x, const Tensor& grad_out, bool param_grads, bool input_grad);

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    int kernel() const { return k_; }
    bool has_bias() const { return !bias.value.empty(); }

    Param weight;
    Param bias;

private:
    int in_ = 0;
    int out_ = 0;
    int k_ = 1;
};

/// Per-sample normalization over all of (C, H, W) with a per-channel affine map.
class LayerNorm {
public:
    struct Cache {
        Tensor normalized;
        double inv_std = 0.0;
    };

    LayerNorm() = default;
    LayerNorm(std::string name, int channels);

    Tensor forward(const Tensor& x, Cache* cache) const;
    Tensor backward(const Cache& cache, const Tensor& grad_out, bool param_grads);

    static constexpr double kEps = 1e-5;

    Param gamma;
    Param beta;
};

Tensor relu(const Tensor& x);
/// grad_out masked by (pre_activation > 0).
Tensor relu_grad(const Tensor& pre_activation, const Tensor& grad_out);

double sigmoid(double x);

}  // namespace cola
