#include "cola/lqa.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "cola/random.hpp"

namespace cola {

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void normalize(std::vector<double>& v) {
    const double n = norm2(v);
    if (n == 0.0) throw std::runtime_error("cannot normalize a zero embedding");
    for (double& x : v) x /= n;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

}  // namespace

StubEmbedder::StubEmbedder(const StubEmbedderOptions& opts) : opts_(opts) {
    if (opts.dim <= 0 || opts.grid <= 0) throw std::invalid_argument("StubEmbedder: dim and grid must be positive");
    features_ = 3 * opts.grid * opts.grid + 1;
    std::mt19937_64 rng(mix_seed(opts.seed, 0x1317ULL));
    const double stddev = 1.0 / std::sqrt(static_cast<double>(opts.dim));
    projection_.resize(static_cast<std::size_t>(opts.dim) * features_);
    for (double& p : projection_) p = gaussian(rng, stddev);
    anchor_.resize(static_cast<std::size_t>(opts.dim));
    for (double& a : anchor_) a = gaussian(rng, 1.0);
    normalize(anchor_);
}

double StubEmbedder::sharpness(const ModalityImage& img) {
    const int h = img.height();
    const int w = img.width();
    if (h < 3 || w < 3) return 0.0;
    const Tensor& px = img.pixels;
    auto gray = [&](int y, int x) {
        double s = 0.0;
        for (int c = 0; c < px.channels(); ++c) s += px.at(c, y, x);
        return s / px.channels();
    };
    double total = 0.0;
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x)
            total += std::abs(gray(y - 1, x) + gray(y + 1, x) + gray(y, x - 1) + gray(y, x + 1) - 4.0 * gray(y, x));
    return total / (static_cast<double>(h - 2) * (w - 2));
}

Embedding StubEmbedder::embed_image(const ModalityImage& img) const {
    if (img.pixels.channels() != 3) throw std::invalid_argument("embed_image: expected 3 channels");
    const int g = opts_.grid;
    const int h = img.height();
    const int w = img.width();
    if (h < g || w < g) throw std::invalid_argument("embed_image: image smaller than pooling grid");

    std::vector<double> f(static_cast<std::size_t>(features_), 0.0);
    for (int c = 0; c < 3; ++c)
        for (int gy = 0; gy < g; ++gy)
            for (int gx = 0; gx < g; ++gx) {
                const int y0 = gy * h / g;
                const int y1 = (gy + 1) * h / g;
                const int x0 = gx * w / g;
                const int x1 = (gx + 1) * w / g;
                double s = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) s += img.pixels.at(c, y, x);
                f[static_cast<std::size_t>((c * g + gy) * g + gx)] = s / ((y1 - y0) * (x1 - x0));
            }
    f.back() = opts_.sharpness_weight * sharpness(img);

    Embedding e;
    e.vector.resize(static_cast<std::size_t>(opts_.dim));
    for (int d = 0; d < opts_.dim; ++d) {
        const double* row = projection_.data() + static_cast<std::size_t>(d) * features_;
        double s = opts_.anchor_weight * anchor_[static_cast<std::size_t>(d)];
        for (int k = 0; k < features_; ++k) s += row[k] * f[static_cast<std::size_t>(k)];
        e.vector[static_cast<std::size_t>(d)] = s;
    }
    normalize(e.vector);
    return e;
}

Embedding StubEmbedder::embed_text(std::string_view text) const {
    Embedding e;
    e.vector.assign(static_cast<std::size_t>(opts_.dim), 0.0);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(opts_.dim));
    for (const auto& token : tokenize(text)) {
        std::mt19937_64 rng(mix_seed(opts_.seed, fnv1a(token)));
        for (double& v : e.vector) v += gaussian(rng, stddev);
    }
    for (std::size_t d = 0; d < e.vector.size(); ++d) e.vector[d] += opts_.anchor_weight * anchor_[d];
    normalize(e.vector);
    return e;
}

std::shared_ptr<const VisionLanguageEmbedder> stub_embedder(std::uint64_t seed) {
    StubEmbedderOptions opts;
    opts.seed = seed;
    return std::make_shared<StubEmbedder>(opts);
}

Embedding apply_prompt(const Embedding& text_embedding, std::span<const double> omega) {
    if (omega.size() != text_embedding.dim()) {
        throw std::invalid_argument("apply_prompt: dimension mismatch (" + std::to_string(text_embedding.dim()) +
                                    " vs " + std::to_string(omega.size()) + ")");
    }
    Embedding out = text_embedding;
    for (std::size_t i = 0; i < omega.size(); ++i) out.vector[i] += omega[i];
    return out;
}

Embedding apply_prompt(const Embedding& text_embedding, const LearnablePrompt& prompt) {
    return apply_prompt(text_embedding, prompt.omega.value);
}

double quality_score(const Embedding& image_embedding, const Embedding& prompted_text_embedding) {
    if (image_embedding.dim() != prompted_text_embedding.dim()) throw std::invalid_argument("quality_score: dimension mismatch");
    const double na = norm2(image_embedding.vector);
    const double nb = norm2(prompted_text_embedding.vector);
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("quality_score: zero-norm embedding");
    double d = 0.0;
    for (std::size_t i = 0; i < image_embedding.dim(); ++i) d += image_embedding.vector[i] * prompted_text_embedding.vector[i];
    return std::clamp(d / (na * nb), -1.0, 1.0);
}

FusionWeights fusion_weights(const QualityScores& alpha) {
    const double a1 = std::max(alpha.alpha_m1, kAlphaFloor);
    const double a2 = std::max(alpha.alpha_m2, kAlphaFloor);
    const double sum = a1 + a2;
    return {a1 / sum, a2 / sum};
}

FusionWeights lqa_assess(const ModalityImage& m1, const ModalityImage& m2, const VisionLanguageEmbedder& embedder,
                         const LearnablePrompt& prompt, std::string_view fixed_text) {
    const Embedding text = embedder.embed_text(fixed_text);
    return lqa_forward(embedder.embed_image(m1), embedder.embed_image(m2), text, prompt.omega.value).beta;
}

LqaTrace lqa_forward(const Embedding& image_m1, const Embedding& image_m2, const Embedding& text,
                     std::span<const double> omega) {
    LqaTrace t;
    t.image_m1 = image_m1;
    t.image_m2 = image_m2;
    t.prompted = apply_prompt(text, omega);
    t.alpha = {quality_score(image_m1, t.prompted), quality_score(image_m2, t.prompted)};
    t.beta = fusion_weights(t.alpha);
    return t;
}

void lqa_backward(const LqaTrace& trace, double grad_beta_m1, double grad_beta_m2, std::span<double> omega_grad) {
    const double a1 = std::max(trace.alpha.alpha_m1, kAlphaFloor);
    const double a2 = std::max(trace.alpha.alpha_m2, kAlphaFloor);
    const double s2 = (a1 + a2) * (a1 + a2);
    // beta_k = a_k / (a1 + a2)
    const double d_beta1 = grad_beta_m1 - grad_beta_m2;
    const double grad_a1 = trace.alpha.alpha_m1 > kAlphaFloor ? d_beta1 * a2 / s2 : 0.0;
    const double grad_a2 = trace.alpha.alpha_m2 > kAlphaFloor ? -d_beta1 * a1 / s2 : 0.0;
    if (grad_a1 == 0.0 && grad_a2 == 0.0) return;

    const auto& u = trace.prompted.vector;
    const double nu = norm2(u);
    auto accumulate = [&](const Embedding& e, double cosine, double g) {
        if (g == 0.0) return;
        const double ne = norm2(e.vector);
        // d cos(e, u) / du = e / (|e||u|) - cos * u / |u|^2
        for (std::size_t i = 0; i < u.size(); ++i)
            omega_grad[i] += g * (e.vector[i] / (ne * nu) - cosine * u[i] / (nu * nu));
    };
    accumulate(trace.image_m1, trace.alpha.alpha_m1, grad_a1);
    accumulate(trace.image_m2, trace.alpha.alpha_m2, grad_a2);
}

}  // namespace cola
