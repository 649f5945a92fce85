#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cola/backbone.hpp"
#include "cola/data.hpp"
#include "cola/decoder.hpp"
#include "cola/lqa.hpp"

namespace cola {

enum class Group { theta, theta_f, theta_z, omega, decoder };

inline constexpr Group kAllGroups[] = {Group::theta, Group::theta_f, Group::theta_z, Group::omega, Group::decoder};

std::string_view to_string(Group g);
/// Accepts the group names above plus "prompt" as an alias of omega.
Group parse_group(std::string_view name);

struct ModelConfig {
    EncoderConfig encoder;
    int cbam_reduction = 16;
    int cbam_min_hidden = 4;
    /// When false the fusion weights are fixed at (0.5, 0.5).
    bool use_lqa = true;
    std::string prompt_text{kDefaultPromptText};
    StubEmbedderOptions embedder;
    std::uint64_t init_seed = 7;
    int image_size = 64;
};

class ModelState {
public:
    ModelConfig config;
    BackboneState backbone;
    Decoder decoder;
    LearnablePrompt prompt;
    std::shared_ptr<const VisionLanguageEmbedder> embedder;
    Embedding text_embedding;
    int stage = 1;
    /// Digests captured when a group was frozen.
    std::map<Group, std::string> frozen;
    /// Stage-I digests carried by stage-II states.
    std::map<Group, std::string> stage1_digests;

    std::vector<Param*> params(Group g);
    std::vector<const Param*> params(Group g) const;
    std::vector<Param*> all_params();
    bool has_group(Group g) const;
    bool is_frozen(Group g) const { return frozen.contains(g); }
    bool is_trainable(Group g) const { return has_group(g) && !is_frozen(g); }
    void zero_grad();
};

/// Fresh stage-I model; weights drawn from config.init_seed, omega = 0.
ModelState make_model(const ModelConfig& config);

/// Rebuilds the embedder and cached text embedding from config (after deserialization).
void attach_embedder(ModelState& state);

/// SHA-256 over names, shapes and value bytes of every parameter in the group.
std::string group_digest(const ModelState& state, Group g);

void freeze(ModelState& state, Group g);
/// True iff the group's current digest equals the digest stored at freeze time.
/// Throws std::logic_error for a group that was never frozen.
bool assert_frozen(const ModelState& state, Group g);

struct CopyOptions {
    bool zero_conv = true;
    bool freeze = true;
};

/// Stage-II initialization: records stage-I digests, value-copies theta into
/// theta_f, adds zero convolutions and (when opts.freeze) freezes theta, omega and decoder.
void make_trainable_copy(ModelState& state, const CopyOptions& opts = {});

struct ForwardTrace {
    CdTrace backbone;
    std::array<FeaturePyramid, 2> branch;
    LqaTrace lqa;
    FusionWeights beta;
    Decoder::Trace decoder;
    SaliencyMap pred;
};

/// Full forward graph on an already-conditioned sample.
SaliencyMap forward(const ModelState& state, const DualModalSample& sample, ForwardTrace* trace = nullptr);

/// Accumulates Param::grad for every trainable group given dL/dpred.
void backward(ModelState& state, const ForwardTrace& trace, const SaliencyMap& grad_pred);

/// Applies the condition and runs the forward graph.
SaliencyMap predict(const ModelState& state, const DualModalSample& sample, Condition condition);

FusionWeights model_fusion_weights(const ModelState& state, const ModalityImage& m1, const ModalityImage& m2);

}  // namespace cola
