#include "cola/decoder.hpp"

#include <algorithm>
#include <stdexcept>

#include "cola/kernels.hpp"

namespace cola {

FeaturePyramid fuse(const FeaturePyramid& m1, const FeaturePyramid& m2, const FusionWeights& w) {
    if (m1.size() != m2.size()) throw std::invalid_argument("fuse: pyramids differ in level count");
    FeaturePyramid out;
    out.reserve(m1.size());
    for (std::size_t j = 0; j < m1.size(); ++j) {
        require_same_shape(m1[j], m2[j], "fuse");
        Tensor g(m1[j].shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = w.beta_m1 * m1[j][i] + w.beta_m2 * m2[j][i];
        out.push_back(std::move(g));
    }
    return out;
}

CbamBlock::CbamBlock(const std::string& name, int channels, int reduction, int min_hidden, std::mt19937_64& rng)
    : mlp_in(name + ".mlp_in", channels, std::max(channels / std::max(reduction, 1), min_hidden), 1, true),
      mlp_out(name + ".mlp_out", std::max(channels / std::max(reduction, 1), min_hidden), channels, 1, true),
      spatial(name + ".spatial", 2, 1, 7, true), channels_(channels) {
    mlp_in.init_he(rng);
    mlp_out.init_he(rng);
    spatial.init_he(rng);
}

Tensor CbamBlock::forward(const Tensor& x, Trace* trace) const {
    if (x.channels() != channels_) {
        throw std::invalid_argument("cbam: expected " + std::to_string(channels_) + " channels, got " +
                                    std::to_string(x.channels()));
    }
    const int c_n = x.channels();
    const auto plane = x.shape().plane();
    Tensor avg(c_n, 1, 1);
    Tensor mx(c_n, 1, 1);
    std::vector<int> max_index(static_cast<std::size_t>(c_n), 0);
    for (int c = 0; c < c_n; ++c) {
        const auto v = x.channel(c);
        double s = 0.0;
        std::size_t best = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            s += v[i];
            if (v[i] > v[best]) best = i;
        }
        avg[static_cast<std::size_t>(c)] = s / static_cast<double>(plane);
        mx[static_cast<std::size_t>(c)] = v[best];
        max_index[static_cast<std::size_t>(c)] = static_cast<int>(best);
    }
    Tensor h_avg = mlp_in.forward(avg);
    Tensor h_max = mlp_in.forward(mx);
    Tensor logits = mlp_out.forward(relu(h_avg));
    logits += mlp_out.forward(relu(h_max));
    Tensor gate(c_n, 1, 1);
    for (int c = 0; c < c_n; ++c) gate[static_cast<std::size_t>(c)] = sigmoid(logits[static_cast<std::size_t>(c)]);

    Tensor gated(x.shape());
    for (int c = 0; c < c_n; ++c) {
        const auto src = x.channel(c);
        auto dst = gated.channel(c);
        const double g = gate[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * g;
    }

    Tensor pooled(2, x.height(), x.width());
    std::vector<int> max_channel(plane, 0);
    for (std::size_t i = 0; i < plane; ++i) {
        double s = 0.0;
        int best = 0;
        for (int c = 0; c < c_n; ++c) {
            const double v = gated.channel(c)[i];
            s += v;
            if (v > gated.channel(best)[i]) best = c;
        }
        pooled.channel(0)[i] = s / c_n;
        pooled.channel(1)[i] = gated.channel(best)[i];
        max_channel[i] = best;
    }
    Tensor sgate = spatial.forward(pooled);
    for (double& v : sgate.values()) v = sigmoid(v);

    Tensor out(x.shape());
    for (int c = 0; c < c_n; ++c) {
        const auto src = gated.channel(c);
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * sgate[i];
    }
    if (trace != nullptr) {
        trace->input = x;
        trace->avg = std::move(avg);
        trace->max = std::move(mx);
        trace->max_index = std::move(max_index);
        trace->hidden_avg = std::move(h_avg);
        trace->hidden_max = std::move(h_max);
        trace->channel_gate = std::move(gate);
        trace->gated = std::move(gated);
        trace->pooled = std::move(pooled);
        trace->max_channel = std::move(max_channel);
        trace->spatial_gate = std::move(sgate);
    }
    return out;
}

Tensor CbamBlock::backward(const Trace& t, const Tensor& grad_out, bool param_grads) {
    const int c_n = channels_;
    const auto plane = t.input.shape().plane();

    // out = gated * spatial_gate
    Tensor d_gated(t.gated.shape());
    Tensor d_slogit(1, t.input.height(), t.input.width());
    for (std::size_t i = 0; i < plane; ++i) {
        double dg = 0.0;
        for (int c = 0; c < c_n; ++c) {
            dg += grad_out.channel(c)[i] * t.gated.channel(c)[i];
            d_gated.channel(c)[i] = grad_out.channel(c)[i] * t.spatial_gate[i];
        }
        const double s = t.spatial_gate[i];
        d_slogit[i] = dg * s * (1.0 - s);
    }
    const Tensor d_pooled = spatial.backward(t.pooled, d_slogit, param_grads, true);
    for (std::size_t i = 0; i < plane; ++i) {
        const double d_mean = d_pooled.channel(0)[i] / c_n;
        for (int c = 0; c < c_n; ++c) d_gated.channel(c)[i] += d_mean;
        d_gated.channel(t.max_channel[i])[i] += d_pooled.channel(1)[i];
    }

    // gated = x * channel_gate
    Tensor dx(t.input.shape());
    Tensor d_clogit(c_n, 1, 1);
    for (int c = 0; c < c_n; ++c) {
        const auto dgt = d_gated.channel(c);
        const auto x = t.input.channel(c);
        auto d = dx.channel(c);
        const double g = t.channel_gate[static_cast<std::size_t>(c)];
        double dgate = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            dgate += dgt[i] * x[i];
            d[i] = dgt[i] * g;
        }
        d_clogit[static_cast<std::size_t>(c)] = dgate * g * (1.0 - g);
    }

    // logits = mlp_out(relu(mlp_in(avg))) + mlp_out(relu(mlp_in(max)))
    const Tensor r_avg = relu(t.hidden_avg);
    const Tensor r_max = relu(t.hidden_max);
    const Tensor d_ravg = mlp_out.backward(r_avg, d_clogit, param_grads, true);
    const Tensor d_rmax = mlp_out.backward(r_max, d_clogit, param_grads, true);
    const Tensor d_avg = mlp_in.backward(t.avg, relu_grad(t.hidden_avg, d_ravg), param_grads, true);
    const Tensor d_max = mlp_in.backward(t.max, relu_grad(t.hidden_max, d_rmax), param_grads, true);
    for (int c = 0; c < c_n; ++c) {
        auto d = dx.channel(c);
        const double da = d_avg[static_cast<std::size_t>(c)] / static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) d[i] += da;
        d[static_cast<std::size_t>(t.max_index[static_cast<std::size_t>(c)])] += d_max[static_cast<std::size_t>(c)];
    }
    return dx;
}

std::vector<Param*> CbamBlock::params() {
    return {&mlp_in.weight, &mlp_in.bias, &mlp_out.weight, &mlp_out.bias, &spatial.weight, &spatial.bias};
}

Tensor cbam(const CbamBlock& block, const Tensor& feature) { return block.forward(feature); }

Decoder::Decoder(const DecoderConfig& cfg, std::mt19937_64& rng) {
    if (cfg.widths.empty()) throw std::invalid_argument("decoder needs at least one level");
    const auto n = cfg.widths.size();
    for (std::size_t j = 0; j < n; ++j) {
        const std::string prefix = "decoder.level" + std::to_string(j + 1);
        cbams.emplace_back(prefix + ".cbam", cfg.widths[j], cfg.reduction, cfg.min_hidden, rng);
        const int out = j == 0 ? cfg.widths[0] : cfg.widths[j - 1];
        convs.emplace_back(prefix + ".conv", cfg.widths[j], out, 3, true);
        convs.back().init_he(rng);
    }
    head = Conv2d("decoder.head", cfg.widths[0], 1, 1, true);
    head.init_he(rng);
}

SaliencyMap Decoder::decode(const FeaturePyramid& fused, Trace* trace) const {
    if (fused.size() != convs.size()) {
        throw std::invalid_argument("decode: expected " + std::to_string(convs.size()) + " levels, got " +
                                    std::to_string(fused.size()));
    }
    if (trace != nullptr) trace->levels.assign(convs.size(), {});
    Tensor h = fused.back();
    for (std::size_t jj = convs.size(); jj-- > 0;) {
        CbamBlock::Trace* ct = trace != nullptr ? &trace->levels[jj].cbam : nullptr;
        Tensor attended = cbams[jj].forward(h, ct);
        Tensor z = convs[jj].forward(attended);
        Tensor r = relu(z);
        if (trace != nullptr) {
            trace->levels[jj].attended = std::move(attended);
            trace->levels[jj].pre_relu = std::move(z);
        }
        if (jj == 0) {
            h = std::move(r);
        } else {
            h = kernels::upsample2(r);
            h += fused[jj - 1];
        }
    }
    Tensor logit = head.forward(h);
    for (double& v : logit.values()) v = sigmoid(v);
    SaliencyMap out(kernels::upsample2(logit));
    if (trace != nullptr) {
        trace->head_input = std::move(h);
        trace->prob = std::move(logit);
    }
    return out;
}

FeaturePyramid Decoder::backward(const Trace& t, const SaliencyMap& grad_pred, bool param_grads) {
    Tensor d_prob = kernels::upsample2_grad(grad_pred.values);
    for (std::size_t i = 0; i < d_prob.size(); ++i) d_prob[i] *= t.prob[i] * (1.0 - t.prob[i]);
    Tensor dh = head.backward(t.head_input, d_prob, param_grads, true);

    FeaturePyramid grads(convs.size());
    for (std::size_t jj = 0; jj < convs.size(); ++jj) {
        const LevelTrace& lt = t.levels[jj];
        // dh is the gradient of this level's relu output (level 1) or of up2(relu) (deeper levels).
        Tensor d_relu = jj == 0 ? std::move(dh) : kernels::upsample2_grad(dh);
        const Tensor d_att = convs[jj].backward(lt.attended, relu_grad(lt.pre_relu, d_relu), param_grads, true);
        Tensor d_in = cbams[jj].backward(lt.cbam, d_att, param_grads);
        // d_in is dL/dh_j where h_j = g_j + up2(...) from the level above (h_n = g_n).
        grads[jj] = d_in;
        dh = std::move(d_in);
    }
    return grads;
}

std::vector<Param*> Decoder::params() {
    std::vector<Param*> out;
    for (std::size_t j = 0; j < convs.size(); ++j) {
        for (auto* p : cbams[j].params()) out.push_back(p);
        out.push_back(&convs[j].weight);
        out.push_back(&convs[j].bias);
    }
    out.push_back(&head.weight);
    out.push_back(&head.bias);
    return out;
}

SaliencyMap decode(const Decoder& decoder, const FeaturePyramid& fused) { return decoder.decode(fused); }

}  // namespace cola
