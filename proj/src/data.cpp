#include "cola/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cola/digest.hpp"
#include "cola/random.hpp"

namespace cola {

namespace fs = std::filesystem;

SaliencyMap::SaliencyMap(Tensor t) : values(std::move(t)) {
    if (values.channels() != 1) throw std::invalid_argument("saliency map must have exactly one channel");
}

std::string_view to_string(Condition c) {
    switch (c) {
        case Condition::complete: return "complete";
        case Condition::missing_m1: return "missing_m1";
        case Condition::missing_m2: return "missing_m2";
    }
    return "?";
}

Condition parse_condition(std::string_view name) {
    for (Condition c : kAllConditions)
        if (to_string(c) == name) return c;
    throw std::invalid_argument("unknown condition '" + std::string(name) + "'");
}

void ConditionDistribution::validate() const {
    for (double p : {p_complete, p_missing_m1, p_missing_m2}) {
        if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument("condition probabilities must be finite and >= 0");
    }
    if (std::abs(p_complete + p_missing_m1 + p_missing_m2 - 1.0) > 1e-9) {
        throw std::invalid_argument("condition probabilities must sum to 1");
    }
}

void validate_image(const ModalityImage& img, int divisor) {
    if (img.pixels.channels() != 3) throw std::invalid_argument("modality image must have 3 channels");
    if (img.height() % divisor != 0 || img.width() % divisor != 0) {
        throw std::invalid_argument("image size " + to_string(img.pixels.shape()) + " is not divisible by " +
                                    std::to_string(divisor));
    }
    for (double v : img.pixels.values()) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw std::invalid_argument("pixel value outside [0,1]");
    }
}

void validate_sample(const DualModalSample& s) {
    validate_image(s.m1);
    validate_image(s.m2);
    if (s.m1.pixels.shape() != s.m2.pixels.shape()) throw std::invalid_argument("modalities differ in size");
    if (s.gt.height() != s.m1.height() || s.gt.width() != s.m1.width()) {
        throw std::invalid_argument("ground truth differs in size from the modalities");
    }
    for (double v : s.gt.values.values()) {
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("ground truth must be binary");
    }
}

DualModalSample apply_condition(const DualModalSample& sample, Condition c) {
    DualModalSample out = sample;
    if (c == Condition::missing_m1) out.m1.pixels.fill(0.0);
    if (c == Condition::missing_m2) out.m2.pixels.fill(0.0);
    return out;
}

Condition sample_condition(std::mt19937_64& rng, const ConditionDistribution& dist) {
    dist.validate();
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < dist.p_complete) return Condition::complete;
    if (u < dist.p_complete + dist.p_missing_m1) return Condition::missing_m1;
    // Guard against rounding when p_missing_m2 == 0.
    if (dist.p_missing_m2 == 0.0) return dist.p_missing_m1 > 0.0 ? Condition::missing_m1 : Condition::complete;
    return Condition::missing_m2;
}

NoiseKind parse_noise_kind(std::string_view name) {
    if (name == "gaussian") return NoiseKind::gaussian;
    if (name == "salt_pepper") return NoiseKind::salt_pepper;
    if (name == "blackout_blocks") return NoiseKind::blackout_blocks;
    throw std::invalid_argument("unknown noise kind '" + std::string(name) + "'");
}

std::string_view to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::salt_pepper: return "salt_pepper";
        case NoiseKind::blackout_blocks: return "blackout_blocks";
    }
    return "?";
}

ModalityImage inject_noise(const ModalityImage& img, NoiseKind kind, double level, std::uint64_t seed) {
    if (!(level >= 0.0)) throw std::invalid_argument("noise level must be >= 0");
    ModalityImage out = img;
    if (level == 0.0) return out;
    std::mt19937_64 rng(mix_seed(seed));
    Tensor& px = out.pixels;
    const int h = px.height();
    const int w = px.width();
    switch (kind) {
        case NoiseKind::gaussian:
            for (double& v : px.values()) v = std::clamp(v + gaussian(rng, level), 0.0, 1.0);
            break;
        case NoiseKind::salt_pepper:
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (uniform(rng, 0.0, 1.0) >= level) continue;
                    const double v = uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : 1.0;
                    for (int c = 0; c < px.channels(); ++c) px.at(c, y, x) = v;
                }
            }
            break;
        case NoiseKind::blackout_blocks: {
            constexpr int block = 8;
            for (int by = 0; by < h; by += block) {
                for (int bx = 0; bx < w; bx += block) {
                    if (uniform(rng, 0.0, 1.0) >= level) continue;
                    for (int c = 0; c < px.channels(); ++c)
                        for (int y = by; y < std::min(h, by + block); ++y)
                            for (int x = bx; x < std::min(w, bx + block); ++x) px.at(c, y, x) = 0.0;
                }
            }
            break;
        }
    }
    return out;
}

ModalityImage inject_noise(const ModalityImage& img, std::string_view kind, double level, std::uint64_t seed) {
    return inject_noise(img, parse_noise_kind(kind), level, seed);
}

namespace {

struct Blob {
    enum class Kind { disk, ellipse, rect, triangle } kind;
    double cx, cy, rx, ry, angle;

    bool contains(double x, double y) const {
        const double dx = x - cx;
        const double dy = y - cy;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double u = c * dx + s * dy;
        const double v = -s * dx + c * dy;
        switch (kind) {
            case Kind::disk: return dx * dx + dy * dy <= rx * rx;
            case Kind::ellipse: return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
            case Kind::rect: return std::abs(u) <= rx && std::abs(v) <= ry;
            case Kind::triangle: {
                // Isosceles triangle with apex at v = -ry and base at v = +ry.
                if (v < -ry || v > ry) return false;
                const double half_width = rx * (v + ry) / (2.0 * ry);
                return std::abs(u) <= half_width;
            }
        }
        return false;
    }
};

Blob random_blob(std::mt19937_64& rng, int size) {
    Blob b{};
    b.kind = static_cast<Blob::Kind>(uniform_int(rng, 0, 3));
    const double r_min = 0.08 * size;
    const double r_max = 0.19 * size;
    b.rx = uniform(rng, r_min, r_max);
    b.ry = b.kind == Blob::Kind::disk ? b.rx : uniform(rng, r_min, r_max);
    b.cx = uniform(rng, b.rx, size - b.rx);
    b.cy = uniform(rng, b.ry, size - b.ry);
    b.angle = uniform(rng, 0.0, std::numbers::pi);
    return b;
}

Tensor mask_of(const std::vector<Blob>& blobs, int size) {
    Tensor m(1, size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (const Blob& b : blobs)
                if (b.contains(x + 0.5, y + 0.5)) {
                    m.at(0, y, x) = 1.0;
                    break;
                }
    return m;
}

void box_blur3(Tensor& t) {
    Tensor src = t;
    for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < t.height(); ++y)
            for (int x = 0; x < t.width(); ++x) {
                double s = 0.0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy;
                        const int xx = x + dx;
                        if (yy < 0 || yy >= t.height() || xx < 0 || xx >= t.width()) continue;
                        s += src.at(c, yy, xx);
                        ++n;
                    }
                t.at(c, y, x) = s / n;
            }
}

struct Texture {
    double fx, fy, phase, amplitude;
    double at(int x, int y) const { return amplitude * std::sin(fx * x + fy * y + phase); }
};

Texture random_texture(std::mt19937_64& rng) {
    const double period = uniform(rng, 3.0, 7.0);
    const double theta = uniform(rng, 0.0, std::numbers::pi);
    const double k = 2.0 * std::numbers::pi / period;
    return {k * std::cos(theta), k * std::sin(theta), uniform(rng, 0.0, 2.0 * std::numbers::pi), uniform(rng, 0.06, 0.12)};
}

void paint_textured(Tensor& img, const Tensor& mask, const double color[3], const Texture& tex) {
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (mask.at(0, y, x) == 0.0) continue;
            const double t = tex.at(x, y);
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = std::clamp(color[c] + t, 0.0, 1.0);
        }
}

// Object color pushed away from the local background mean so it stays visible.
void contrasting_color(std::mt19937_64& rng, const double bg[3], double out[3]) {
    for (int c = 0; c < 3; ++c) {
        const double delta = uniform(rng, 0.22, 0.4);
        const double up = bg[c] + delta;
        const double down = bg[c] - delta;
        if (up > 0.95) out[c] = down;
        else if (down < 0.05) out[c] = up;
        else out[c] = uniform(rng, 0.0, 1.0) < 0.5 ? up : down;
    }
}

DualModalSample synth_sample(std::mt19937_64& rng, int size) {
    const double inv = 1.0 / size;
    Tensor gt;
    std::vector<Blob> salient;
    for (;;) {
        salient.clear();
        const int n = uniform_int(rng, 1, 3);
        for (int i = 0; i < n; ++i) salient.push_back(random_blob(rng, size));
        gt = mask_of(salient, size);
        double mean = 0.0;
        for (double v : gt.values()) mean += v;
        mean /= static_cast<double>(gt.size());
        if (mean > 0.0 && mean < 0.5) break;
    }

    // Modality 1: smooth color background with a weak low-frequency pattern.
    Tensor m1(3, size, size);
    double bg[3];
    double grad_x[3];
    double grad_y[3];
    for (int c = 0; c < 3; ++c) {
        bg[c] = uniform(rng, 0.25, 0.65);
        grad_x[c] = uniform(rng, -0.15, 0.15);
        grad_y[c] = uniform(rng, -0.15, 0.15);
    }
    const double wave_f = uniform(rng, 0.05, 0.2);
    const double wave_phase = uniform(rng, 0.0, 6.28);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                m1.at(c, y, x) = std::clamp(bg[c] + grad_x[c] * (x * inv - 0.5) + grad_y[c] * (y * inv - 0.5) +
                                                0.04 * std::sin(wave_f * (x + y) + wave_phase),
                                            0.0, 1.0);

    // Modality 2: dim smooth intensity field, replicated to three channels.
    Tensor m2(3, size, size);
    const double level = uniform(rng, 0.1, 0.3);
    const double gx2 = uniform(rng, -0.1, 0.1);
    const double gy2 = uniform(rng, -0.1, 0.1);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) m2.at(c, y, x) = level + gx2 * (x * inv - 0.5) + gy2 * (y * inv - 0.5);

    // Clutter: shapes visible in a single modality only, painted under the salient objects.
    const int clutter_m1 = uniform_int(rng, 0, 2);
    for (int i = 0; i < clutter_m1; ++i) {
        const Tensor mask = mask_of({random_blob(rng, size)}, size);
        double color[3];
        contrasting_color(rng, bg, color);
        paint_textured(m1, mask, color, random_texture(rng));
    }
    Tensor hot(1, size, size);
    const int clutter_m2 = uniform_int(rng, 0, 2);
    for (int i = 0; i < clutter_m2; ++i) {
        const Tensor mask = mask_of({random_blob(rng, size)}, size);
        const double peak = uniform(rng, 0.55, 0.9);
        for (std::size_t k = 0; k < mask.size(); ++k)
            if (mask[k] > 0.0) hot[k] = peak;
    }
    for (const Blob& b : salient) {
        const Tensor mask = mask_of({b}, size);
        double color[3];
        contrasting_color(rng, bg, color);
        paint_textured(m1, mask, color, random_texture(rng));
        const double peak = uniform(rng, 0.55, 0.9);
        for (std::size_t k = 0; k < mask.size(); ++k)
            if (mask[k] > 0.0) hot[k] = peak;
    }
    box_blur3(hot);
    box_blur3(hot);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double h = hot.at(0, y, x);
                if (h > 0.0) m2.at(c, y, x) = std::clamp(std::max(m2.at(c, y, x), h), 0.0, 1.0);
                else m2.at(c, y, x) = std::clamp(m2.at(c, y, x), 0.0, 1.0);
            }

    DualModalSample s;
    s.m1 = {std::move(m1), ModalityTag::m1};
    s.m2 = {std::move(m2), ModalityTag::m2};
    s.gt = SaliencyMap(std::move(gt));
    return s;
}

std::string sample_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "syn_%05zu", index);
    return buf;
}

}  // namespace

Dataset synth_dataset(const SynthOptions& opts) {
    if (opts.n_samples < 1) throw std::invalid_argument("synth_dataset: n_samples must be >= 1");
    if (opts.size <= 0 || opts.size % 16 != 0) throw std::invalid_argument("synth_dataset: size must be divisible by 16");
    if (!(opts.noise_fraction >= 0.0 && opts.noise_fraction <= 1.0)) {
        throw std::invalid_argument("synth_dataset: noise_fraction must be in [0,1]");
    }
    const std::uint64_t split_stream = opts.split == Split::train ? 0x7472ULL : 0x7465ULL;
    const std::uint64_t base = mix_seed(opts.seed, split_stream);

    Dataset data;
    data.split = opts.split;
    data.samples.resize(static_cast<std::size_t>(opts.n_samples));

    // Each sample owns its RNG stream, so generation order does not matter.
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < opts.n_samples; ++i) {
        std::mt19937_64 rng(mix_seed(base, static_cast<std::uint64_t>(i)));
        DualModalSample s = synth_sample(rng, opts.size);
        s.id = sample_id(static_cast<std::size_t>(i));
        data.samples[static_cast<std::size_t>(i)] = std::move(s);
    }

    const auto n_noisy = static_cast<std::size_t>(std::llround(opts.noise_fraction * opts.n_samples));
    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 pick(mix_seed(base, 0xbadULL));
    std::shuffle(order.begin(), order.end(), pick);
    for (std::size_t k = 0; k < n_noisy; ++k) {
        DualModalSample& s = data.samples[order[k]];
        std::mt19937_64 rng(mix_seed(base, 0x10000ULL + order[k]));
        const auto kind = static_cast<NoiseKind>(uniform_int(rng, 0, 2));
        double level = 0.0;
        switch (kind) {
            case NoiseKind::gaussian: level = uniform(rng, 0.15, 0.35); break;
            case NoiseKind::salt_pepper: level = uniform(rng, 0.2, 0.6); break;
            case NoiseKind::blackout_blocks: level = uniform(rng, 0.3, 0.6); break;
        }
        const std::uint64_t noise_seed = rng();
        ModalityImage& target = uniform_int(rng, 0, 1) == 0 ? s.m1 : s.m2;
        target = inject_noise(target, kind, level, noise_seed);
        s.noisy = true;
    }
    return data;
}

namespace {

cv::Mat read_image(const fs::path& p, int flags) {
    cv::Mat m = cv::imread(p.string(), flags);
    if (m.empty()) throw std::runtime_error("unreadable image: " + p.string());
    return m;
}

cv::Mat resize_to(const cv::Mat& m, int size) {
    if (m.rows == size && m.cols == size) return m;
    cv::Mat out;
    const int interp = (m.rows > size || m.cols > size) ? cv::INTER_AREA : cv::INTER_LINEAR;
    cv::resize(m, out, cv::Size(size, size), 0, 0, interp);
    return out;
}

ModalityImage to_modality(const cv::Mat& bgr, ModalityTag tag) {
    ModalityImage img{Tensor(3, bgr.rows, bgr.cols), tag};
    for (int y = 0; y < bgr.rows; ++y)
        for (int x = 0; x < bgr.cols; ++x) {
            const auto& px = bgr.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) img.pixels.at(c, y, x) = px[2 - c] / 255.0;
        }
    return img;
}

std::set<std::string> png_stems(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("missing dataset directory: " + dir.string());
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") names.insert(e.path().stem().string());
    return names;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void write_png(const cv::Mat& m, const fs::path& p) {
    if (!cv::imwrite(p.string(), m)) throw std::runtime_error("failed to write " + p.string());
}

}  // namespace

Dataset load_dataset(const fs::path& root, const DatasetLayout& layout, Split split) {
    const auto m1_names = png_stems(root / layout.m1_dir);
    const auto m2_names = png_stems(root / layout.m2_dir);
    const auto gt_names = png_stems(root / layout.gt_dir);
    std::set<std::string> all;
    all.insert(m1_names.begin(), m1_names.end());
    all.insert(m2_names.begin(), m2_names.end());
    all.insert(gt_names.begin(), gt_names.end());
    for (const auto& name : all) {
        if (!m1_names.contains(name) || !m2_names.contains(name) || !gt_names.contains(name)) {
            throw std::runtime_error("orphan sample '" + name + "': missing counterpart in one of " + layout.m1_dir +
                                     "/" + layout.m2_dir + "/" + layout.gt_dir);
        }
    }
    if (all.empty()) throw std::runtime_error("empty dataset at " + root.string());

    Dataset data;
    data.split = split;
    for (const auto& name : all) {
        const std::string file = name + ".png";
        DualModalSample s;
        s.id = name;
        s.m1 = to_modality(resize_to(read_image(root / layout.m1_dir / file, cv::IMREAD_COLOR), layout.size),
                           ModalityTag::m1);
        s.m2 = to_modality(resize_to(read_image(root / layout.m2_dir / file, cv::IMREAD_COLOR), layout.size),
                           ModalityTag::m2);
        const cv::Mat g = resize_to(read_image(root / layout.gt_dir / file, cv::IMREAD_GRAYSCALE), layout.size);
        s.gt = SaliencyMap(g.rows, g.cols);
        for (int y = 0; y < g.rows; ++y)
            for (int x = 0; x < g.cols; ++x) s.gt.values.at(0, y, x) = g.at<std::uint8_t>(y, x) / 255.0 >= 0.5 ? 1.0 : 0.0;
        data.samples.push_back(std::move(s));
    }
    return data;
}

void write_saliency_png(const SaliencyMap& map, const fs::path& path) {
    cv::Mat m(map.height(), map.width(), CV_8UC1);
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) m.at<std::uint8_t>(y, x) = to_byte(map.values.at(0, y, x));
    write_png(m, path);
}

void save_dataset(const Dataset& data, const fs::path& root, const DatasetLayout& layout) {
    for (const auto& dir : {layout.m1_dir, layout.m2_dir, layout.gt_dir}) fs::create_directories(root / dir);
    auto write_rgb = [](const ModalityImage& img, const fs::path& p) {
        cv::Mat m(img.height(), img.width(), CV_8UC3);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                auto& px = m.at<cv::Vec3b>(y, x);
                for (int c = 0; c < 3; ++c) px[2 - c] = to_byte(img.pixels.at(c, y, x));
            }
        write_png(m, p);
    };
    for (const auto& s : data.samples) {
        const std::string file = s.id + ".png";
        write_rgb(s.m1, root / layout.m1_dir / file);
        write_rgb(s.m2, root / layout.m2_dir / file);
        write_saliency_png(s.gt, root / layout.gt_dir / file);
    }
}

std::string dataset_digest(const Dataset& data) {
    Sha256 h;
    for (const auto& s : data.samples) {
        h.update(s.id);
        h.update(s.m1.pixels.values());
        h.update(s.m2.pixels.values());
        h.update(s.gt.values.values());
    }
    return h.hex();
}

}  // namespace cola
