#include "cola/backbone.hpp"

#include <stdexcept>

#include "cola/kernels.hpp"

namespace cola {

EncoderBranch::EncoderBranch(std::string name, const EncoderConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    if (cfg.widths.empty()) throw std::invalid_argument("encoder needs at least one stage");
    int in = cfg.in_channels;
    for (std::size_t j = 0; j < cfg.widths.size(); ++j) {
        const std::string prefix = name + ".stage" + std::to_string(j + 1);
        Stage s{Conv2d(prefix + ".conv", in, cfg.widths[j], 3, false), LayerNorm(prefix + ".norm", cfg.widths[j])};
        s.conv.init_he(rng);
        stages_.push_back(std::move(s));
        in = cfg.widths[j];
    }
}

FeaturePyramid EncoderBranch::encode(const Tensor& img, Trace* trace) const {
    const int divisor = 1 << levels();
    if (img.channels() != cfg_.in_channels || img.height() % divisor != 0 || img.width() % divisor != 0 ||
        img.height() == 0) {
        throw std::invalid_argument("encode: input " + to_string(img.shape()) + " must have " +
                                    std::to_string(cfg_.in_channels) + " channels and sides divisible by " +
                                    std::to_string(divisor));
    }
    FeaturePyramid out;
    out.reserve(stages_.size());
    if (trace != nullptr) trace->stages.assign(stages_.size(), {});
    const Tensor* x = &img;
    for (std::size_t j = 0; j < stages_.size(); ++j) {
        const Stage& s = stages_[j];
        Tensor z = s.conv.forward(*x);
        LayerNorm::Cache cache;
        if (cfg_.norm == NormKind::layer) z = s.norm.forward(z, trace != nullptr ? &cache : nullptr);
        Tensor pooled = kernels::avg_pool2(relu(z));
        if (trace != nullptr) {
            auto& st = trace->stages[j];
            st.input = *x;
            st.norm = std::move(cache);
            st.pre_relu = std::move(z);
        }
        out.push_back(std::move(pooled));
        x = &out.back();
    }
    return out;
}

void EncoderBranch::backward(const Trace& trace, const FeaturePyramid& grad_levels) {
    if (grad_levels.size() != stages_.size() || trace.stages.size() != stages_.size()) {
        throw std::invalid_argument("EncoderBranch::backward: level count mismatch");
    }
    Tensor carry;  // gradient flowing into stage j's output from stage j+1
    for (std::size_t jj = stages_.size(); jj-- > 0;) {
        Stage& s = stages_[jj];
        const auto& st = trace.stages[jj];
        Tensor g = grad_levels[jj];
        if (!carry.empty()) g += carry;
        Tensor d = relu_grad(st.pre_relu, kernels::avg_pool2_grad(g));
        if (cfg_.norm == NormKind::layer) d = s.norm.backward(st.norm, d, true);
        carry = s.conv.backward(st.input, d, true, jj > 0);
    }
}

std::vector<Param*> EncoderBranch::params() {
    std::vector<Param*> out;
    for (auto& s : stages_) {
        out.push_back(&s.conv.weight);
        if (cfg_.norm == NormKind::layer) {
            out.push_back(&s.norm.gamma);
            out.push_back(&s.norm.beta);
        }
    }
    return out;
}

std::vector<const Param*> EncoderBranch::params() const {
    std::vector<const Param*> out;
    for (auto* p : const_cast<EncoderBranch*>(this)->params()) out.push_back(p);
    return out;
}

void EncoderBranch::rename(const std::string& prefix) {
    for (auto* p : params()) {
        const auto dot = p->name.find('.');
        p->name = prefix + (dot == std::string::npos ? "" : p->name.substr(dot));
    }
}

ZeroConvSet::ZeroConvSet(const std::string& prefix, const std::vector<int>& widths) {
    for (std::size_t j = 0; j < widths.size(); ++j) {
        levels.emplace_back(prefix + ".level" + std::to_string(j + 1), widths[j], widths[j], 1, true);
        levels.back().init_zero();
    }
}

std::vector<Param*> ZeroConvSet::params() {
    std::vector<Param*> out;
    for (auto& c : levels) {
        out.push_back(&c.weight);
        out.push_back(&c.bias);
    }
    return out;
}

std::vector<const Param*> ZeroConvSet::params() const {
    std::vector<const Param*> out;
    for (const auto& c : levels) {
        out.push_back(&c.weight);
        out.push_back(&c.bias);
    }
    return out;
}

BackboneState make_backbone(const EncoderConfig& cfg, std::mt19937_64& rng) {
    BackboneState s;
    s.theta[0] = EncoderBranch("theta.m1", cfg, rng);
    s.theta[1] = EncoderBranch("theta.m2", cfg, rng);
    return s;
}

BackboneState make_trainable_copy(const BackboneState& state, bool use_zero_conv) {
    if (state.theta[0].levels() == 0 || state.theta[1].levels() == 0) {
        throw std::logic_error("make_trainable_copy: stage-I encoder parameters do not exist");
    }
    BackboneState out = state;
    const char* names[2] = {"m1", "m2"};
    for (int b = 0; b < 2; ++b) {
        out.theta_f[b] = state.theta[b];
        out.theta_f[b].rename(std::string("theta_f.") + names[b]);
        out.theta_z[b] = ZeroConvSet(std::string("theta_z.") + names[b], state.theta[b].config().widths);
    }
    out.has_copy = true;
    out.use_zero_conv = use_zero_conv;
    return out;
}

FeaturePyramid encode(const EncoderBranch& branch, const Tensor& img) { return branch.encode(img); }

std::array<FeaturePyramid, 2> cd_forward(const BackboneState& state, const Tensor& m1, const Tensor& m2,
                                         CdTrace* trace) {
    const Tensor* inputs[2] = {&m1, &m2};
    std::array<FeaturePyramid, 2> out;
    for (int b = 0; b < 2; ++b) {
        out[b] = state.theta[b].encode(*inputs[b], trace != nullptr ? &trace->frozen[b] : nullptr);
        if (!state.has_copy) continue;
        FeaturePyramid copy = state.theta_f[b].encode(*inputs[b], trace != nullptr ? &trace->copy[b] : nullptr);
        for (std::size_t j = 0; j < copy.size(); ++j) {
            if (state.use_zero_conv) out[b][j] += state.theta_z[b].levels[j].forward(copy[j]);
            else out[b][j] += copy[j];
        }
        if (trace != nullptr) trace->copy_out[b] = std::move(copy);
    }
    return out;
}

void cd_backward(BackboneState& state, const CdTrace& trace, const std::array<FeaturePyramid, 2>& grad,
                 const BackboneGrads& which) {
    for (int b = 0; b < 2; ++b) {
        if (which.theta) state.theta[b].backward(trace.frozen[b], grad[b]);
        if (!state.has_copy) continue;
        const bool need_copy_grad = which.theta_f;
        if (!state.use_zero_conv) {
            if (need_copy_grad) state.theta_f[b].backward(trace.copy[b], grad[b]);
            continue;
        }
        FeaturePyramid grad_copy;
        for (std::size_t j = 0; j < grad[b].size(); ++j) {
            grad_copy.push_back(
                state.theta_z[b].levels[j].backward(trace.copy_out[b][j], grad[b][j], which.theta_z, need_copy_grad));
        }
        if (need_copy_grad) state.theta_f[b].backward(trace.copy[b], grad_copy);
    }
}

}  // namespace cola
