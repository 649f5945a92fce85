#pragma once

// Dense kernels shared by the encoder, zero convolutions, CBAM and the decoder.
//
// `cola::kernels` holds the OpenMP versions used by the model. Every kernel
// parallelizes over an axis whose outputs are disjoint (output channels for
// forward and weight gradients, input channels for input gradients), so the
// per-element summation order never depends on the thread count and results
// are bit-identical for any OMP_NUM_THREADS.
//
// `cola::kernels::reference` holds straightforward serial loops with the same
// contracts. They are slow and exist for tests and the benchmark.

#include <span>

#include "cola/tensor.hpp"

namespace cola::kernels {

/// Stride-1 "same" convolution with an odd square kernel.
/// weight layout: [out][in][k][k]; bias may be empty.
Tensor conv2d(const Tensor& input, std::span<const double> weight, std::span<const double> bias, int out_channels,
              int kernel);

/// dL/dinput for conv2d.
Tensor conv2d_input_grad(const Tensor& grad_out, std::span<const double> weight, int in_channels, int kernel);

/// Accumulates dL/dweight and dL/dbias (bias_grad may be empty).
void conv2d_param_grad(const Tensor& input, const Tensor& grad_out, int kernel, std::span<double> weight_grad,
                       std::span<double> bias_grad);

/// 2x2 average pooling, stride 2. Height and width must be even.
Tensor avg_pool2(const Tensor& input);
Tensor avg_pool2_grad(const Tensor& grad_out);

/// Bilinear x2 upsampling with half-pixel centers (align_corners = false).
Tensor upsample2(const Tensor& input);
Tensor upsample2_grad(const Tensor& grad_out);

namespace reference {

Tensor conv2d(const Tensor& input, std::span<const double> weight, std::span<const double> bias, int out_channels,
              int kernel);
Tensor conv2d_input_grad(const Tensor& grad_out, std::span<const double> weight, int in_channels, int kernel);
void conv2d_param_grad(const Tensor& input, const Tensor& grad_out, int kernel, std::span<double> weight_grad,
                       std::span<double> bias_grad);
Tensor avg_pool2(const Tensor& input);
Tensor avg_pool2_grad(const Tensor& grad_out);
Tensor upsample2(const Tensor& input);
Tensor upsample2_grad(const Tensor& grad_out);

}  // namespace reference

}  // namespace cola::kernels
