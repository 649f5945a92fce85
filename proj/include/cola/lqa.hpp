#pragma once

// Language-driven quality assessment: a vision-language embedder scores each
// modality against a prompted quality sentence and the scores become fusion
// weights.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cola/data.hpp"
#include "cola/layers.hpp"

namespace cola {

inline constexpr int kEmbeddingDim = 512;
inline constexpr double kAlphaFloor = 1e-6;
inline constexpr std::string_view kDefaultPromptText = "A photo of high quality.";

struct Embedding {
    std::vector<double> vector;

    std::size_t dim() const { return vector.size(); }
};

struct LearnablePrompt {
    Param omega;
    bool trainable = true;

    explicit LearnablePrompt(int dim = kEmbeddingDim) : omega("omega", {dim}) {}
};

struct QualityScores {
    double alpha_m1 = 0.0;
    double alpha_m2 = 0.0;
};

struct FusionWeights {
    double beta_m1 = 0.5;
    double beta_m2 = 0.5;
};

class VisionLanguageEmbedder {
public:
    virtual ~VisionLanguageEmbedder() = default;
    virtual Embedding embed_image(const ModalityImage& img) const = 0;
    virtual Embedding embed_text(std::string_view text) const = 0;
    virtual int dim() const = 0;
};

struct StubEmbedderOptions {
    std::uint64_t seed = 2024;
    int dim = kEmbeddingDim;
    int grid = 4;
    /// Scale of the mean-absolute-Laplacian feature appended before projection.
    double sharpness_weight = 10.0;
    /// Weight of the direction shared by all image and text embeddings.
    double anchor_weight = 3.0;
};

/// Deterministic stand-in for a pretrained vision-language model.
///
/// Image path: per-channel average pooling to a grid x grid layout, a scaled
/// sharpness feature, a fixed seeded Gaussian projection to `dim`, plus a
/// shared anchor direction, L2-normalized. Text path: each lower-cased token
/// hashes to a seeded Gaussian vector; the sum plus the anchor is L2-normalized.
/// The anchor keeps image/text cosines positive, as they are for real
/// contrastive models whose embeddings occupy a narrow cone.
class StubEmbedder final : public VisionLanguageEmbedder {
public:
    explicit StubEmbedder(const StubEmbedderOptions& opts = {});

    Embedding embed_image(const ModalityImage& img) const override;
    Embedding embed_text(std::string_view text) const override;
    int dim() const override { return opts_.dim; }
    const StubEmbedderOptions& options() const { return opts_; }

    /// Mean absolute 4-neighbour Laplacian of the channel-mean image (interior pixels).
    static double sharpness(const ModalityImage& img);

private:
    StubEmbedderOptions opts_;
    std::vector<double> projection_;  // dim x features, row-major
    std::vector<double> anchor_;
    int features_ = 0;
};

std::shared_ptr<const VisionLanguageEmbedder> stub_embedder(std::uint64_t seed);

/// text_embedding + omega, element-wise, without renormalization.
Embedding apply_prompt(const Embedding& text_embedding, std::span<const double> omega);
Embedding apply_prompt(const Embedding& text_embedding, const LearnablePrompt& prompt);

/// Cosine similarity; throws on zero-norm or mismatched inputs.
double quality_score(const Embedding& image_embedding, const Embedding& prompted_text_embedding);

/// Clamps each score to kAlphaFloor from below and normalizes to a convex pair.
FusionWeights fusion_weights(const QualityScores& alpha);

FusionWeights lqa_assess(const ModalityImage& m1, const ModalityImage& m2, const VisionLanguageEmbedder& embedder,
                         const LearnablePrompt& prompt, std::string_view fixed_text = kDefaultPromptText);

/// Forward record for differentiating the fusion weights with respect to omega.
struct LqaTrace {
    Embedding image_m1;
    Embedding image_m2;
    Embedding prompted;
    QualityScores alpha;
    FusionWeights beta;
};

LqaTrace lqa_forward(const Embedding& image_m1, const Embedding& image_m2, const Embedding& text,
                     std::span<const double> omega);

/// Accumulates dL/domega given dL/dbeta_m1 and dL/dbeta_m2.
void lqa_backward(const LqaTrace& trace, double grad_beta_m1, double grad_beta_m2, std::span<double> omega_grad);

}  // namespace cola
