#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cola/tensor.hpp"

namespace cola {

enum class ModalityTag { m1, m2 };

/// 3-channel image with values in [0, 1].
struct ModalityImage {
    Tensor pixels;
    ModalityTag tag = ModalityTag::m1;

    int height() const { return pixels.height(); }
    int width() const { return pixels.width(); }
};

/// Single-channel map with values in [0, 1]. Ground-truth maps are binary.
struct SaliencyMap {
    Tensor values;

    SaliencyMap() = default;
    SaliencyMap(int height, int width, double fill = 0.0) : values(1, height, width, fill) {}
    explicit SaliencyMap(Tensor t);

    int height() const { return values.height(); }
    int width() const { return values.width(); }
    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;
};

struct DualModalSample {
    ModalityImage m1;
    ModalityImage m2;
    SaliencyMap gt;
    std::string id;
    bool noisy = false;
};

enum class Condition { complete, missing_m1, missing_m2 };

inline constexpr Condition kAllConditions[] = {Condition::complete, Condition::missing_m1, Condition::missing_m2};

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view name);

struct ConditionDistribution {
    double p_complete = 1.0 / 3.0;
    double p_missing_m1 = 1.0 / 3.0;
    double p_missing_m2 = 1.0 / 3.0;

    /// Throws std::invalid_argument unless every probability is >= 0 and they sum to 1 within 1e-9.
    void validate() const;
};

enum class Split { train, test };

struct Dataset {
    std::vector<DualModalSample> samples;
    Split split = Split::train;

    std::size_t size() const { return samples.size(); }
};

/// Throws if the image has non-finite or out-of-range pixels or a spatial size
/// that is not divisible by `divisor`.
void validate_image(const ModalityImage& img, int divisor = 1);
void validate_sample(const DualModalSample& s);

DualModalSample apply_condition(const DualModalSample& sample, Condition c);

Condition sample_condition(std::mt19937_64& rng, const ConditionDistribution& dist);

enum class NoiseKind { gaussian, salt_pepper, blackout_blocks };

NoiseKind parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseKind kind);

/// Corrupted copy of `img`, clipped to [0, 1]. `level` is the standard deviation
/// for gaussian, the per-pixel replacement probability for salt_pepper and the
/// per-block blackout probability (8x8 blocks) for blackout_blocks.
ModalityImage inject_noise(const ModalityImage& img, NoiseKind kind, double level, std::uint64_t seed);
ModalityImage inject_noise(const ModalityImage& img, std::string_view kind, double level, std::uint64_t seed);

struct SynthOptions {
    std::uint64_t seed = 7;
    int n_samples = 200;
    int size = 64;
    double noise_fraction = 0.3;
    Split split = Split::train;
};

/// Deterministic synthetic dual-modal dataset: 1-3 salient shapes per sample,
/// textured color in modality 1 and soft intensity blobs in modality 2, plus
/// per-modality background clutter that is absent from the ground truth.
/// Exactly round(noise_fraction * n_samples) samples carry one corrupted modality.
Dataset synth_dataset(const SynthOptions& opts);

struct DatasetLayout {
    std::string m1_dir = "RGB";
    std::string m2_dir = "T";
    std::string gt_dir = "GT";
    int size = 64;
};

/// Reads `<root>/{m1_dir,m2_dir,gt_dir}/<name>.png`, resizes to layout.size and
/// binarizes ground truth at 0.5. Samples are sorted by name.
Dataset load_dataset(const std::filesystem::path& root, const DatasetLayout& layout, Split split = Split::test);

/// Writes the dataset as 8-bit PNGs in the same layout.
void save_dataset(const Dataset& data, const std::filesystem::path& root, const DatasetLayout& layout);

/// SHA-256 over ids and pixel bytes; used to identify generated datasets.
std::string dataset_digest(const Dataset& data);

/// round(255 * p) per pixel, single channel PNG.
void write_saliency_png(const SaliencyMap& map, const std::filesystem::path& path);

}  // namespace cola
