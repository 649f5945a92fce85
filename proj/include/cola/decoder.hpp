#pragma once

#include <random>
#include <vector>

#include "cola/backbone.hpp"
#include "cola/data.hpp"
#include "cola/layers.hpp"
#include "cola/lqa.hpp"

namespace cola {

/// Convex per-level combination beta_m1 * g^m1 + beta_m2 * g^m2 with one beta pair for all levels.
FeaturePyramid fuse(const FeaturePyramid& m1, const FeaturePyramid& m2, const FusionWeights& w);

/// Channel attention (shared MLP over average- and max-pooled descriptors)
/// followed by spatial attention (7x7 conv over channel-mean and channel-max maps).
class CbamBlock {
public:
    struct Trace {
        Tensor input;
        Tensor avg, max;                 // C x 1 x 1
        std::vector<int> max_index;      // argmax pixel per channel
        Tensor hidden_avg, hidden_max;   // pre-ReLU
        Tensor channel_gate;             // C x 1 x 1
        Tensor gated;                    // x * channel_gate
        Tensor pooled;                   // 2 x H x W
        std::vector<int> max_channel;    // argmax channel per pixel
        Tensor spatial_gate;             // 1 x H x W
    };

    CbamBlock() = default;
    CbamBlock(const std::string& name, int channels, int reduction, int min_hidden, std::mt19937_64& rng);

    Tensor forward(const Tensor& x, Trace* trace = nullptr) const;
    Tensor backward(const Trace& trace, const Tensor& grad_out, bool param_grads);

    std::vector<Param*> params();
    int channels() const { return channels_; }
    int hidden() const { return mlp_in.out_channels(); }

    Conv2d mlp_in;   // C -> hidden, 1x1
    Conv2d mlp_out;  // hidden -> C, 1x1
    Conv2d spatial;  // 2 -> 1, 7x7

private:
    int channels_ = 0;
};

Tensor cbam(const CbamBlock& block, const Tensor& feature);

struct DecoderConfig {
    std::vector<int> widths{16, 32, 64, 128, 256};
    int reduction = 16;
    int min_hidden = 4;
};

/// Top-down decoder: h <- g_n; h <- g_j + up2(relu(conv_{j+1}(cbam_{j+1}(h)))) for j = n-1..1;
/// then sigmoid(head(relu(conv_1(cbam_1(h))))) upsampled x2 to the input resolution.
class Decoder {
public:
    struct LevelTrace {
        CbamBlock::Trace cbam;
        Tensor attended;
        Tensor pre_relu;
    };
    struct Trace {
        std::vector<LevelTrace> levels;
        Tensor head_input;
        Tensor prob;  // sigmoid(head) before the final upsample
    };

    Decoder() = default;
    Decoder(const DecoderConfig& cfg, std::mt19937_64& rng);

    SaliencyMap decode(const FeaturePyramid& fused, Trace* trace = nullptr) const;
    /// Returns dL/dg_j for every level; accumulates parameter gradients when param_grads.
    FeaturePyramid backward(const Trace& trace, const SaliencyMap& grad_pred, bool param_grads);

    std::vector<Param*> params();
    int levels() const { return static_cast<int>(convs.size()); }

    std::vector<CbamBlock> cbams;
    std::vector<Conv2d> convs;
    Conv2d head;
};

SaliencyMap decode(const Decoder& decoder, const FeaturePyramid& fused);

}  // namespace cola
