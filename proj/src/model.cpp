#include "cola/model.hpp"

#include <stdexcept>

#include "cola/digest.hpp"
#include "cola/random.hpp"

namespace cola {

std::string_view to_string(Group g) {
    switch (g) {
        case Group::theta: return "theta";
        case Group::theta_f: return "theta_f";
        case Group::theta_z: return "theta_z";
        case Group::omega: return "omega";
        case Group::decoder: return "decoder";
    }
    return "?";
}

Group parse_group(std::string_view name) {
    if (name == "theta") return Group::theta;
    if (name == "theta_f") return Group::theta_f;
    if (name == "theta_z") return Group::theta_z;
    if (name == "omega" || name == "prompt") return Group::omega;
    if (name == "decoder") return Group::decoder;
    throw std::invalid_argument("unknown parameter group '" + std::string(name) + "'");
}

bool ModelState::has_group(Group g) const {
    switch (g) {
        case Group::theta: return backbone.theta[0].levels() > 0;
        case Group::theta_f: return backbone.has_copy;
        case Group::theta_z: return backbone.has_copy && backbone.use_zero_conv;
        case Group::omega: return config.use_lqa;
        case Group::decoder: return decoder.levels() > 0;
    }
    return false;
}

std::vector<Param*> ModelState::params(Group g) {
    std::vector<Param*> out;
    if (!has_group(g)) return out;
    auto append = [&](std::vector<Param*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    switch (g) {
        case Group::theta:
            append(backbone.theta[0].params());
            append(backbone.theta[1].params());
            break;
        case Group::theta_f:
            append(backbone.theta_f[0].params());
            append(backbone.theta_f[1].params());
            break;
        case Group::theta_z:
            append(backbone.theta_z[0].params());
            append(backbone.theta_z[1].params());
            break;
        case Group::omega: out.push_back(&prompt.omega); break;
        case Group::decoder: append(decoder.params()); break;
    }
    return out;
}

std::vector<const Param*> ModelState::params(Group g) const {
    std::vector<const Param*> out;
    for (Param* p : const_cast<ModelState*>(this)->params(g)) out.push_back(p);
    return out;
}

std::vector<Param*> ModelState::all_params() {
    std::vector<Param*> out;
    for (Group g : kAllGroups) {
        auto ps = params(g);
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

void ModelState::zero_grad() {
    for (Param* p : all_params()) p->zero_grad();
}

ModelState make_model(const ModelConfig& config) {
    ModelState s;
    s.config = config;
    std::mt19937_64 rng(mix_seed(config.init_seed, 0xB0DEULL));
    s.backbone = make_backbone(config.encoder, rng);
    DecoderConfig dc;
    dc.widths = config.encoder.widths;
    dc.reduction = config.cbam_reduction;
    dc.min_hidden = config.cbam_min_hidden;
    s.decoder = Decoder(dc, rng);
    s.prompt = LearnablePrompt(config.embedder.dim);
    attach_embedder(s);
    return s;
}

void attach_embedder(ModelState& state) {
    state.embedder = std::make_shared<StubEmbedder>(state.config.embedder);
    state.text_embedding = state.embedder->embed_text(state.config.prompt_text);
}

std::string group_digest(const ModelState& state, Group g) {
    Sha256 h;
    h.update(to_string(g));
    for (const Param* p : state.params(g)) {
        h.update(p->name);
        for (int d : p->shape) h.update(&d, sizeof d);
        h.update(std::span<const double>(p->value));
    }
    return h.hex();
}

void freeze(ModelState& state, Group g) {
    if (!state.has_group(g)) throw std::logic_error("freeze: group '" + std::string(to_string(g)) + "' does not exist");
    state.frozen[g] = group_digest(state, g);
    if (g == Group::omega) state.prompt.trainable = false;
}

bool assert_frozen(const ModelState& state, Group g) {
    const auto it = state.frozen.find(g);
    if (it == state.frozen.end()) {
        throw std::logic_error("assert_frozen: group '" + std::string(to_string(g)) + "' was never frozen");
    }
    return group_digest(state, g) == it->second;
}

void make_trainable_copy(ModelState& state, const CopyOptions& opts) {
    if (state.backbone.has_copy) throw std::logic_error("make_trainable_copy: model already has a trainable copy");
    for (Group g : kAllGroups)
        if (state.has_group(g)) state.stage1_digests[g] = group_digest(state, g);
    state.backbone = make_trainable_copy(state.backbone, opts.zero_conv);
    state.stage = 2;
    if (opts.freeze) {
        freeze(state, Group::theta);
        freeze(state, Group::decoder);
        if (state.has_group(Group::omega)) freeze(state, Group::omega);
    }
}

FusionWeights model_fusion_weights(const ModelState& state, const ModalityImage& m1, const ModalityImage& m2) {
    if (!state.config.use_lqa) return {};
    return lqa_forward(state.embedder->embed_image(m1), state.embedder->embed_image(m2), state.text_embedding,
                       state.prompt.omega.value)
        .beta;
}

SaliencyMap forward(const ModelState& state, const DualModalSample& sample, ForwardTrace* trace) {
    auto branch = cd_forward(state.backbone, sample.m1.pixels, sample.m2.pixels,
                             trace != nullptr ? &trace->backbone : nullptr);
    FusionWeights beta;
    if (state.config.use_lqa) {
        LqaTrace lt = lqa_forward(state.embedder->embed_image(sample.m1), state.embedder->embed_image(sample.m2),
                                  state.text_embedding, state.prompt.omega.value);
        beta = lt.beta;
        if (trace != nullptr) trace->lqa = std::move(lt);
    }
    const FeaturePyramid fused = fuse(branch[0], branch[1], beta);
    SaliencyMap pred = state.decoder.decode(fused, trace != nullptr ? &trace->decoder : nullptr);
    if (trace != nullptr) {
        trace->branch = std::move(branch);
        trace->beta = beta;
        trace->pred = pred;
    }
    return pred;
}

void backward(ModelState& state, const ForwardTrace& trace, const SaliencyMap& grad_pred) {
    const FeaturePyramid d_fused = state.decoder.backward(trace.decoder, grad_pred, state.is_trainable(Group::decoder));

    const BackboneGrads which{state.is_trainable(Group::theta), state.is_trainable(Group::theta_f),
                              state.is_trainable(Group::theta_z)};
    const bool need_branch = which.theta || which.theta_f || which.theta_z;
    const bool need_omega = state.is_trainable(Group::omega);

    std::array<FeaturePyramid, 2> d_branch;
    double d_beta[2] = {0.0, 0.0};
    const double beta[2] = {trace.beta.beta_m1, trace.beta.beta_m2};
    for (std::size_t j = 0; j < d_fused.size(); ++j) {
        for (int b = 0; b < 2; ++b) {
            if (need_omega) d_beta[b] += dot(d_fused[j], trace.branch[b][j]);
            if (need_branch) {
                Tensor g = d_fused[j];
                g *= beta[b];
                d_branch[b].push_back(std::move(g));
            }
        }
    }
    if (need_omega) lqa_backward(trace.lqa, d_beta[0], d_beta[1], state.prompt.omega.grad);
    if (need_branch) cd_backward(state.backbone, trace.backbone, d_branch, which);
}

SaliencyMap predict(const ModelState& state, const DualModalSample& sample, Condition condition) {
    return forward(state, apply_condition(sample, condition));
}

}  // namespace cola
