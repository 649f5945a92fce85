#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "cola/layers.hpp"
#include "cola/tensor.hpp"

namespace cola {

/// g_1..g_n, shallowest first. Level j has spatial size input / 2^j.
using FeaturePyramid = std::vector<Tensor>;

enum class NormKind { none, layer };

struct EncoderConfig {
    std::vector<int> widths{16, 32, 64, 128, 256};
    NormKind norm = NormKind::layer;
    int in_channels = 3;

    int levels() const { return static_cast<int>(widths.size()); }
};

/// One modality branch: `levels` stages of [3x3 conv (no bias) -> norm -> ReLU -> 2x2 average pool].
class EncoderBranch {
public:
    struct StageTrace {
        Tensor input;
        LayerNorm::Cache norm;
        Tensor pre_relu;
    };
    struct Trace {
        std::vector<StageTrace> stages;
    };

    EncoderBranch() = default;
    EncoderBranch(std::string name, const EncoderConfig& cfg, std::mt19937_64& rng);

    FeaturePyramid encode(const Tensor& img, Trace* trace = nullptr) const;

    /// Back-propagates per-level output gradients and accumulates parameter gradients.
    void backward(const Trace& trace, const FeaturePyramid& grad_levels);

    std::vector<Param*> params();
    std::vector<const Param*> params() const;
    int levels() const { return static_cast<int>(stages_.size()); }
    const EncoderConfig& config() const { return cfg_; }
    /// Renames every parameter with a new prefix (used for value copies).
    void rename(const std::string& prefix);

private:
    struct Stage {
        Conv2d conv;
        LayerNorm norm;
    };

    EncoderConfig cfg_;
    std::vector<Stage> stages_;
};

/// 1x1 channel-preserving convolutions, one per pyramid level, weights and biases zero at construction.
struct ZeroConvSet {
    std::vector<Conv2d> levels;

    ZeroConvSet() = default;
    ZeroConvSet(const std::string& prefix, const std::vector<int>& widths);

    std::vector<Param*> params();
    std::vector<const Param*> params() const;
};

/// Frozen branches (theta), trainable copies (theta_f) and zero convolutions (theta_z), one per modality.
struct BackboneState {
    std::array<EncoderBranch, 2> theta;
    std::array<EncoderBranch, 2> theta_f;
    std::array<ZeroConvSet, 2> theta_z;
    bool has_copy = false;
    bool use_zero_conv = false;
};

BackboneState make_backbone(const EncoderConfig& cfg, std::mt19937_64& rng);

/// Value copy of theta into theta_f and fresh zero convolutions. Throws if theta is empty.
BackboneState make_trainable_copy(const BackboneState& state, bool use_zero_conv = true);

FeaturePyramid encode(const EncoderBranch& branch, const Tensor& img);

struct CdTrace {
    std::array<EncoderBranch::Trace, 2> frozen;
    std::array<EncoderBranch::Trace, 2> copy;
    std::array<FeaturePyramid, 2> copy_out;
};

/// Which backbone groups receive gradients in cd_backward.
struct BackboneGrads {
    bool theta = true;
    bool theta_f = true;
    bool theta_z = true;
};

/// Per modality and level: out_j = F_j(x; theta) + Z_j(F_j(x; theta_f)).
/// Without a copy the second term is absent; without zero convs Z is the identity.
std::array<FeaturePyramid, 2> cd_forward(const BackboneState& state, const Tensor& m1, const Tensor& m2,
                                         CdTrace* trace = nullptr);

void cd_backward(BackboneState& state, const CdTrace& trace, const std::array<FeaturePyramid, 2>& grad,
                 const BackboneGrads& which);

}  // namespace cola
