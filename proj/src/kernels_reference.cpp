#include <cmath>
#include <stdexcept>

#include "cola/kernels.hpp"

namespace cola::kernels::reference {

namespace {

std::size_t widx(int oc, int ic, int ky, int kx, int in_channels, int kernel) {
    return ((static_cast<std::size_t>(oc) * in_channels + ic) * kernel + ky) * kernel + kx;
}

double sample_or_zero(const Tensor& t, int c, int y, int x) {
    if (y < 0 || y >= t.height() || x < 0 || x >= t.width()) return 0.0;
    return t.at(c, y, x);
}

// Source coordinate and weights of output index o along an axis of input length n.
void bilinear_source(int o, int n, int& lo, int& hi, double& frac) {
    double src = (o + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    lo = static_cast<int>(std::floor(src));
    if (lo > n - 1) lo = n - 1;
    hi = lo + 1 < n ? lo + 1 : n - 1;
    frac = src - lo;
}

}  // namespace

Tensor conv2d(const Tensor& input, std::span<const double> weight, std::span<const double> bias, int out_channels,
              int kernel) {
    const int in_channels = input.channels();
    if (weight.size() != static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel) {
        throw std::invalid_argument("reference conv2d: weight size mismatch");
    }
    const int pad = kernel / 2;
    Tensor out(out_channels, input.height(), input.width());
    for (int oc = 0; oc < out_channels; ++oc) {
        for (int y = 0; y < input.height(); ++y) {
            for (int x = 0; x < input.width(); ++x) {
                double s = bias.empty() ? 0.0 : bias[oc];
                for (int ic = 0; ic < in_channels; ++ic) {
                    for (int ky = 0; ky < kernel; ++ky) {
                        for (int kx = 0; kx < kernel; ++kx) {
                            s += weight[widx(oc, ic, ky, kx, in_channels, kernel)] *
                                 sample_or_zero(input, ic, y + ky - pad, x + kx - pad);
                        }
                    }
                }
                out.at(oc, y, x) = s;
            }
        }
    }
    return out;
}

Tensor conv2d_input_grad(const Tensor& grad_out, std::span<const double> weight, int in_channels, int kernel) {
    const int out_channels = grad_out.channels();
    const int pad = kernel / 2;
    Tensor grad_in(in_channels, grad_out.height(), grad_out.width());
    for (int ic = 0; ic < in_channels; ++ic) {
        for (int y = 0; y < grad_out.height(); ++y) {
            for (int x = 0; x < grad_out.width(); ++x) {
                // input pixel (y, x) feeds output (y - ky + pad, x - kx + pad)
                double s = 0.0;
                for (int oc = 0; oc < out_channels; ++oc) {
                    for (int ky = 0; ky < kernel; ++ky) {
                        for (int kx = 0; kx < kernel; ++kx) {
                            s += weight[widx(oc, ic, ky, kx, in_channels, kernel)] *
                                 sample_or_zero(grad_out, oc, y - ky + pad, x - kx + pad);
                        }
                    }
                }
                grad_in.at(ic, y, x) = s;
            }
        }
    }
    return grad_in;
}

void conv2d_param_grad(const Tensor& input, const Tensor& grad_out, int kernel, std::span<double> weight_grad,
                       std::span<double> bias_grad) {
    const int in_channels = input.channels();
    const int out_channels = grad_out.channels();
    const int pad = kernel / 2;
    for (int oc = 0; oc < out_channels; ++oc) {
        for (int y = 0; y < grad_out.height(); ++y) {
            for (int x = 0; x < grad_out.width(); ++x) {
                const double g = grad_out.at(oc, y, x);
                if (!bias_grad.empty()) bias_grad[oc] += g;
                for (int ic = 0; ic < in_channels; ++ic) {
                    for (int ky = 0; ky < kernel; ++ky) {
                        for (int kx = 0; kx < kernel; ++kx) {
                            weight_grad[widx(oc, ic, ky, kx, in_channels, kernel)] +=
                                g * sample_or_zero(input, ic, y + ky - pad, x + kx - pad);
                        }
                    }
                }
            }
        }
    }
}

Tensor avg_pool2(const Tensor& input) {
    Tensor out(input.channels(), input.height() / 2, input.width() / 2);
    for (int c = 0; c < out.channels(); ++c)
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x)
                out.at(c, y, x) = (input.at(c, 2 * y, 2 * x) + input.at(c, 2 * y, 2 * x + 1) +
                                   input.at(c, 2 * y + 1, 2 * x) + input.at(c, 2 * y + 1, 2 * x + 1)) /
                                  4.0;
    return out;
}

Tensor avg_pool2_grad(const Tensor& grad_out) {
    Tensor grad_in(grad_out.channels(), grad_out.height() * 2, grad_out.width() * 2);
    for (int c = 0; c < grad_in.channels(); ++c)
        for (int y = 0; y < grad_in.height(); ++y)
            for (int x = 0; x < grad_in.width(); ++x) grad_in.at(c, y, x) = grad_out.at(c, y / 2, x / 2) / 4.0;
    return grad_in;
}

Tensor upsample2(const Tensor& input) {
    Tensor out(input.channels(), input.height() * 2, input.width() * 2);
    for (int c = 0; c < out.channels(); ++c) {
        for (int y = 0; y < out.height(); ++y) {
            int y0, y1;
            double fy;
            bilinear_source(y, input.height(), y0, y1, fy);
            for (int x = 0; x < out.width(); ++x) {
                int x0, x1;
                double fx;
                bilinear_source(x, input.width(), x0, x1, fx);
                out.at(c, y, x) = (1 - fy) * (1 - fx) * input.at(c, y0, x0) + (1 - fy) * fx * input.at(c, y0, x1) +
                                  fy * (1 - fx) * input.at(c, y1, x0) + fy * fx * input.at(c, y1, x1);
            }
        }
    }
    return out;
}

Tensor upsample2_grad(const Tensor& grad_out) {
    Tensor grad_in(grad_out.channels(), grad_out.height() / 2, grad_out.width() / 2);
    for (int c = 0; c < grad_out.channels(); ++c) {
        for (int y = 0; y < grad_out.height(); ++y) {
            int y0, y1;
            double fy;
            bilinear_source(y, grad_in.height(), y0, y1, fy);
            for (int x = 0; x < grad_out.width(); ++x) {
                int x0, x1;
                double fx;
                bilinear_source(x, grad_in.width(), x0, x1, fx);
                const double g = grad_out.at(c, y, x);
                grad_in.at(c, y0, x0) += (1 - fy) * (1 - fx) * g;
                grad_in.at(c, y0, x1) += (1 - fy) * fx * g;
                grad_in.at(c, y1, x0) += fy * (1 - fx) * g;
                grad_in.at(c, y1, x1) += fy * fx * g;
            }
        }
    }
    return grad_in;
}

}  // namespace cola::kernels::reference
