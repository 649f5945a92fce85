#include "cola/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cola::kernels {

namespace {

// Below this width the weight-gradient kernel scatters per pixel instead of reducing per tap.
constexpr int kNarrowPlane = 16;

void check_kernel(int kernel) {
    if (kernel <= 0 || kernel % 2 == 0) throw std::invalid_argument("convolution kernel size must be odd and positive");
}

void check_weight(std::size_t weight_size, int out_channels, int in_channels, int kernel) {
    const auto expected = static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels) *
                          static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel);
    if (weight_size != expected) {
        throw std::invalid_argument("conv2d: weight has " + std::to_string(weight_size) + " entries, expected " +
                                    std::to_string(expected));
    }
}

// Row/column overlap of a plane shifted by `offset` along an axis of length n.
struct Span1d {
    int begin;
    int end;
};

Span1d valid_range(int n, int offset) { return {std::max(0, -offset), std::min(n, n - offset)}; }

struct Tap {
    int lo;
    int hi;
    double w_lo;
    double w_hi;
};

std::vector<Tap> bilinear_taps(int in_size) {
    std::vector<Tap> taps(static_cast<std::size_t>(in_size) * 2);
    for (int o = 0; o < in_size * 2; ++o) {
        const double src = std::max(0.0, (o + 0.5) * 0.5 - 0.5);
        const int lo = std::min(static_cast<int>(src), in_size - 1);
        const int hi = std::min(lo + 1, in_size - 1);
        const double frac = src - lo;
        taps[static_cast<std::size_t>(o)] = {lo, hi, 1.0 - frac, frac};
    }
    return taps;
}

}  // namespace

Tensor conv2d(const Tensor& input, std::span<const double> weight, std::span<const double> bias, int out_channels,
              int kernel) {
    check_kernel(kernel);
    const int in_channels = input.channels();
    check_weight(weight.size(), out_channels, in_channels, kernel);
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels)) {
        throw std::invalid_argument("conv2d: bias size mismatch");
    }
    const int h = input.height();
    const int w = input.width();
    const int pad = kernel / 2;
    const int kk = kernel * kernel;
    Tensor out(out_channels, h, w);

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_channels; ++oc) {
        double* dst_plane = out.channel(oc).data();
        if (!bias.empty()) std::fill_n(dst_plane, static_cast<std::size_t>(h) * w, bias[oc]);
        for (int ic = 0; ic < in_channels; ++ic) {
            const double* src_plane = input.channel(ic).data();
            const double* wk = weight.data() + (static_cast<std::size_t>(oc) * in_channels + ic) * kk;
            for (int ky = 0; ky < kernel; ++ky) {
                const int dy = ky - pad;
                const auto rows = valid_range(h, dy);
                for (int kx = 0; kx < kernel; ++kx) {
                    const int dx = kx - pad;
                    const auto cols = valid_range(w, dx);
                    const double wv = wk[ky * kernel + kx];
                    for (int y = rows.begin; y < rows.end; ++y) {
                        double* dst = dst_plane + static_cast<std::size_t>(y) * w;
                        const double* src = src_plane + static_cast<std::size_t>(y + dy) * w + dx;
#pragma omp simd
                        for (int x = cols.begin; x < cols.end; ++x) dst[x] += wv * src[x];
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_input_grad(const Tensor& grad_out, std::span<const double> weight, int in_channels, int kernel) {
    check_kernel(kernel);
    const int out_channels = grad_out.channels();
    check_weight(weight.size(), out_channels, in_channels, kernel);
    const int h = grad_out.height();
    const int w = grad_out.width();
    const int pad = kernel / 2;
    const int kk = kernel * kernel;
    Tensor grad_in(in_channels, h, w);

#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < in_channels; ++ic) {
        double* dst_plane = grad_in.channel(ic).data();
        for (int oc = 0; oc < out_channels; ++oc) {
            const double* src_plane = grad_out.channel(oc).data();
            const double* wk = weight.data() + (static_cast<std::size_t>(oc) * in_channels + ic) * kk;
            for (int ky = 0; ky < kernel; ++ky) {
                const int dy = ky - pad;
                const auto rows = valid_range(h, dy);
                for (int kx = 0; kx < kernel; ++kx) {
                    const int dx = kx - pad;
                    const auto cols = valid_range(w, dx);
                    const double wv = wk[ky * kernel + kx];
                    for (int y = rows.begin; y < rows.end; ++y) {
                        double* dst = dst_plane + static_cast<std::size_t>(y + dy) * w + dx;
                        const double* src = src_plane + static_cast<std::size_t>(y) * w;
#pragma omp simd
                        for (int x = cols.begin; x < cols.end; ++x) dst[x] += wv * src[x];
                    }
                }
            }
        }
    }
    return grad_in;
}

void conv2d_param_grad(const Tensor& input, const Tensor& grad_out, int kernel, std::span<double> weight_grad,
                       std::span<double> bias_grad) {
    check_kernel(kernel);
    const int in_channels = input.channels();
    const int out_channels = grad_out.channels();
    check_weight(weight_grad.size(), out_channels, in_channels, kernel);
    if (input.height() != grad_out.height() || input.width() != grad_out.width()) {
        throw std::invalid_argument("conv2d_param_grad: spatial mismatch");
    }
    const int h = input.height();
    const int w = input.width();
    const int pad = kernel / 2;
    const int kk = kernel * kernel;

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_channels; ++oc) {
        const double* g_plane = grad_out.channel(oc).data();
        if (!bias_grad.empty()) {
            double s = 0.0;
            const auto n = static_cast<std::size_t>(h) * w;
#pragma omp simd reduction(+ : s)
            for (std::size_t i = 0; i < n; ++i) s += g_plane[i];
            bias_grad[oc] += s;
        }
        for (int ic = 0; ic < in_channels; ++ic) {
            const double* x_plane = input.channel(ic).data();
            double* wg = weight_grad.data() + (static_cast<std::size_t>(oc) * in_channels + ic) * kk;
            if (w < kNarrowPlane) {
                // Rows too short for the per-tap reductions to pay off: sweep pixels once and scatter into the taps.
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        const double gv = g_plane[static_cast<std::size_t>(y) * w + x];
                        for (int ky = 0; ky < kernel; ++ky) {
                            const int iy = y + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            const double* xr = x_plane + static_cast<std::size_t>(iy) * w;
                            for (int kx = 0; kx < kernel; ++kx) {
                                const int ix = x + kx - pad;
                                if (ix >= 0 && ix < w) wg[ky * kernel + kx] += gv * xr[ix];
                            }
                        }
                    }
                }
                continue;
            }
            for (int ky = 0; ky < kernel; ++ky) {
                const int dy = ky - pad;
                const auto rows = valid_range(h, dy);
                for (int kx = 0; kx < kernel; ++kx) {
                    const int dx = kx - pad;
                    const auto cols = valid_range(w, dx);
                    double s = 0.0;
                    for (int y = rows.begin; y < rows.end; ++y) {
                        const double* g = g_plane + static_cast<std::size_t>(y) * w;
                        const double* x = x_plane + static_cast<std::size_t>(y + dy) * w + dx;
#pragma omp simd reduction(+ : s)
                        for (int c = cols.begin; c < cols.end; ++c) s += g[c] * x[c];
                    }
                    wg[ky * kernel + kx] += s;
                }
            }
        }
    }
}

Tensor avg_pool2(const Tensor& input) {
    if (input.height() % 2 != 0 || input.width() % 2 != 0) {
        throw std::invalid_argument("avg_pool2: odd spatial size " + to_string(input.shape()));
    }
    const int ho = input.height() / 2;
    const int wo = input.width() / 2;
    const int w = input.width();
    Tensor out(input.channels(), ho, wo);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < input.channels(); ++c) {
        const double* src = input.channel(c).data();
        double* dst = out.channel(c).data();
        for (int y = 0; y < ho; ++y) {
            const double* r0 = src + static_cast<std::size_t>(2 * y) * w;
            const double* r1 = r0 + w;
            for (int x = 0; x < wo; ++x) {
                dst[static_cast<std::size_t>(y) * wo + x] =
                    0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
            }
        }
    }
    return out;
}

Tensor avg_pool2_grad(const Tensor& grad_out) {
    const int ho = grad_out.height();
    const int wo = grad_out.width();
    const int w = wo * 2;
    Tensor grad_in(grad_out.channels(), ho * 2, w);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < grad_out.channels(); ++c) {
        const double* src = grad_out.channel(c).data();
        double* dst = grad_in.channel(c).data();
        for (int y = 0; y < ho; ++y) {
            double* r0 = dst + static_cast<std::size_t>(2 * y) * w;
            double* r1 = r0 + w;
            for (int x = 0; x < wo; ++x) {
                const double g = 0.25 * src[static_cast<std::size_t>(y) * wo + x];
                r0[2 * x] = g;
                r0[2 * x + 1] = g;
                r1[2 * x] = g;
                r1[2 * x + 1] = g;
            }
        }
    }
    return grad_in;
}

Tensor upsample2(const Tensor& input) {
    const int h = input.height();
    const int w = input.width();
    const auto ty = bilinear_taps(h);
    const auto tx = bilinear_taps(w);
    Tensor out(input.channels(), h * 2, w * 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < input.channels(); ++c) {
        const double* src = input.channel(c).data();
        double* dst = out.channel(c).data();
        for (int oy = 0; oy < h * 2; ++oy) {
            const Tap& a = ty[static_cast<std::size_t>(oy)];
            const double* r_lo = src + static_cast<std::size_t>(a.lo) * w;
            const double* r_hi = src + static_cast<std::size_t>(a.hi) * w;
            for (int ox = 0; ox < w * 2; ++ox) {
                const Tap& b = tx[static_cast<std::size_t>(ox)];
                dst[static_cast<std::size_t>(oy) * (w * 2) + ox] =
                    a.w_lo * (b.w_lo * r_lo[b.lo] + b.w_hi * r_lo[b.hi]) +
                    a.w_hi * (b.w_lo * r_hi[b.lo] + b.w_hi * r_hi[b.hi]);
            }
        }
    }
    return out;
}

Tensor upsample2_grad(const Tensor& grad_out) {
    if (grad_out.height() % 2 != 0 || grad_out.width() % 2 != 0) {
        throw std::invalid_argument("upsample2_grad: odd spatial size");
    }
    const int h = grad_out.height() / 2;
    const int w = grad_out.width() / 2;
    const auto ty = bilinear_taps(h);
    const auto tx = bilinear_taps(w);
    Tensor grad_in(grad_out.channels(), h, w);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < grad_out.channels(); ++c) {
        const double* src = grad_out.channel(c).data();
        double* dst = grad_in.channel(c).data();
        for (int oy = 0; oy < h * 2; ++oy) {
            const Tap& a = ty[static_cast<std::size_t>(oy)];
            double* r_lo = dst + static_cast<std::size_t>(a.lo) * w;
            double* r_hi = dst + static_cast<std::size_t>(a.hi) * w;
            for (int ox = 0; ox < w * 2; ++ox) {
                const Tap& b = tx[static_cast<std::size_t>(ox)];
                const double g = src[static_cast<std::size_t>(oy) * (w * 2) + ox];
                r_lo[b.lo] += a.w_lo * b.w_lo * g;
                r_lo[b.hi] += a.w_lo * b.w_hi * g;
                r_hi[b.lo] += a.w_hi * b.w_lo * g;
                r_hi[b.hi] += a.w_hi * b.w_hi * g;
            }
        }
    }
    return grad_in;
}

}  // namespace cola::kernels
