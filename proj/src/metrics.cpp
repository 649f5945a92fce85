#include "cola/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cola/model.hpp"

namespace cola {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_pair(const SaliencyMap& pred, const SaliencyMap& gt, const char* what) {
    require_same_shape(pred.values, gt.values, what);
    if (pred.size() == 0) throw std::invalid_argument(std::string(what) + ": empty map");
}

bool is_fg(double g) { return g >= 0.5; }

// Pixel counts per prediction bin floor(256 p): pred >= k/256 iff bin >= k, exactly.
struct Histogram {
    std::array<std::size_t, 256> all{};
    std::array<std::size_t, 256> fg{};
    std::size_t gt_fg = 0;
    std::size_t n = 0;
};

Histogram histogram(const SaliencyMap& pred, const SaliencyMap& gt) {
    Histogram h;
    h.n = pred.size();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int bin = std::clamp(static_cast<int>(std::floor(pred[i] * 256.0)), 0, 255);
        ++h.all[static_cast<std::size_t>(bin)];
        if (is_fg(gt[i])) {
            ++h.fg[static_cast<std::size_t>(bin)];
            ++h.gt_fg;
        }
    }
    return h;
}

double f_from_counts(double tp, double positives, double gt_fg, double beta2) {
    const double precision = positives > 0.0 ? tp / positives : 0.0;
    const double recall = gt_fg > 0.0 ? tp / gt_fg : 0.0;
    const double denom = beta2 * precision + recall;
    return denom > 0.0 ? (1.0 + beta2) * precision * recall / denom : 0.0;
}

// Enhanced alignment of a binary map given confusion counts.
double e_from_counts(double tp, double fp, double fn, double tn) {
    const double n = tp + fp + fn + tn;
    const double g = tp + fn;
    const double p = tp + fp;
    if (g == 0.0) return (n - p) / n;
    if (g == n) return p / n;
    const double mu_p = p / n;
    const double mu_g = g / n;
    auto enhanced = [&](double fm, double gt) {
        const double a = fm - mu_p;
        const double b = gt - mu_g;
        const double align = 2.0 * a * b / (a * a + b * b + kEps);
        return (align + 1.0) * (align + 1.0) / 4.0;
    };
    return (tp * enhanced(1, 1) + fp * enhanced(1, 0) + fn * enhanced(0, 1) + tn * enhanced(0, 0)) / n;
}

double object_score(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double sigma = 0.0;
    if (values.size() > 1) {
        for (double v : values) sigma += (v - mean) * (v - mean);
        sigma = std::sqrt(sigma / static_cast<double>(values.size() - 1));
    }
    return 2.0 * mean / (mean * mean + 1.0 + sigma + kEps);
}

double s_object(const SaliencyMap& pred, const SaliencyMap& gt) {
    std::vector<double> fg;
    std::vector<double> bg;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (is_fg(gt[i])) fg.push_back(pred[i]);
        else bg.push_back(1.0 - pred[i]);
    }
    const double u = static_cast<double>(fg.size()) / static_cast<double>(pred.size());
    return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

// SSIM-like score of one quadrant [y0, y1) x [x0, x1).
double quadrant_ssim(const SaliencyMap& pred, const SaliencyMap& gt, int y0, int y1, int x0, int x1) {
    const int w = pred.width();
    const double n = static_cast<double>(y1 - y0) * (x1 - x0);
    if (n == 0.0) return 0.0;
    double mx = 0.0;
    double my = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const auto i = static_cast<std::size_t>(y) * w + x;
            mx += pred[i];
            my += is_fg(gt[i]) ? 1.0 : 0.0;
        }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const auto i = static_cast<std::size_t>(y) * w + x;
            const double dx = pred[i] - mx;
            const double dy = (is_fg(gt[i]) ? 1.0 : 0.0) - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    sxx /= n - 1.0 + kEps;
    syy /= n - 1.0 + kEps;
    sxy /= n - 1.0 + kEps;
    const double alpha = 4.0 * mx * my * sxy;
    const double beta = (mx * mx + my * my) * (sxx + syy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    if (beta == 0.0) return 1.0;
    return 0.0;
}

double s_region(const SaliencyMap& pred, const SaliencyMap& gt) {
    const int h = gt.height();
    const int w = gt.width();
    // Centroid in 1-based pixel coordinates, rounded half away from zero.
    double total = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (is_fg(gt[static_cast<std::size_t>(y) * w + x])) {
                total += 1.0;
                sx += x + 1;
                sy += y + 1;
            }
    int cx = 0;
    int cy = 0;
    if (total == 0.0) {
        cx = static_cast<int>(std::round(w / 2.0));
        cy = static_cast<int>(std::round(h / 2.0));
    } else {
        cx = static_cast<int>(std::round(sx / total));
        cy = static_cast<int>(std::round(sy / total));
    }
    const double area = static_cast<double>(w) * h;
    const double w1 = static_cast<double>(cx) * cy / area;
    const double w2 = static_cast<double>(w - cx) * cy / area;
    const double w3 = static_cast<double>(cx) * (h - cy) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    return w1 * quadrant_ssim(pred, gt, 0, cy, 0, cx) + w2 * quadrant_ssim(pred, gt, 0, cy, cx, w) +
           w3 * quadrant_ssim(pred, gt, cy, h, 0, cx) + w4 * quadrant_ssim(pred, gt, cy, h, cx, w);
}

// Neumaier summation.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
        else comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace

double mae(const SaliencyMap& pred, const SaliencyMap& gt) {
    check_pair(pred, gt, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - gt[i]);
    return s / static_cast<double>(pred.size());
}

double f_measure_mean(const SaliencyMap& pred, const SaliencyMap& gt, double beta2) {
    check_pair(pred, gt, "f_measure_mean");
    const Histogram h = histogram(pred, gt);
    double tp = 0.0;
    double positives = 0.0;
    double sum = 0.0;
    for (int k = 255; k >= 1; --k) {
        tp += static_cast<double>(h.fg[static_cast<std::size_t>(k)]);
        positives += static_cast<double>(h.all[static_cast<std::size_t>(k)]);
        sum += f_from_counts(tp, positives, static_cast<double>(h.gt_fg), beta2);
    }
    return sum / kThresholds;
}

double f_measure_adaptive(const SaliencyMap& pred, const SaliencyMap& gt, double beta2) {
    check_pair(pred, gt, "f_measure_adaptive");
    double mean = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) mean += pred[i];
    const double t = std::min(2.0 * mean / static_cast<double>(pred.size()), 1.0);
    double tp = 0.0;
    double positives = 0.0;
    double g = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] >= t;
        const bool f = is_fg(gt[i]);
        positives += p;
        g += f;
        tp += p && f;
    }
    return f_from_counts(tp, positives, g, beta2);
}

double s_measure(const SaliencyMap& pred, const SaliencyMap& gt, double lambda) {
    check_pair(pred, gt, "s_measure");
    double fg = 0.0;
    double mean_pred = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        fg += is_fg(gt[i]) ? 1.0 : 0.0;
        mean_pred += pred[i];
    }
    const auto n = static_cast<double>(pred.size());
    mean_pred /= n;
    if (fg == 0.0) return 1.0 - mean_pred;
    if (fg == n) return mean_pred;
    const double q = lambda * s_object(pred, gt) + (1.0 - lambda) * s_region(pred, gt);
    return std::max(q, 0.0);
}

double e_measure_binary(const SaliencyMap& binary_pred, const SaliencyMap& gt) {
    check_pair(binary_pred, gt, "e_measure_binary");
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool p = binary_pred[i] >= 0.5;
        const bool g = is_fg(gt[i]);
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
        tn += !p && !g;
    }
    return e_from_counts(tp, fp, fn, tn);
}

double e_measure_mean(const SaliencyMap& pred, const SaliencyMap& gt) {
    check_pair(pred, gt, "e_measure_mean");
    const Histogram h = histogram(pred, gt);
    const auto n = static_cast<double>(h.n);
    const auto g = static_cast<double>(h.gt_fg);
    double tp = 0.0;
    double positives = 0.0;
    double sum = 0.0;
    for (int k = 255; k >= 1; --k) {
        tp += static_cast<double>(h.fg[static_cast<std::size_t>(k)]);
        positives += static_cast<double>(h.all[static_cast<std::size_t>(k)]);
        const double fp = positives - tp;
        const double fn = g - tp;
        sum += e_from_counts(tp, fp, fn, n - tp - fp - fn);
    }
    return sum / kThresholds;
}

double average(double full, double miss_m1, double miss_m2) { return (full + miss_m1 + miss_m2) / 3.0; }

double average_drop(double full, double miss_m1, double miss_m2) {
    return ((miss_m1 - full) + (miss_m2 - full)) / 2.0;
}

MetricSet compute_metrics(const SaliencyMap& pred, const SaliencyMap& gt, const MetricOptions& opts) {
    return {s_measure(pred, gt, opts.s_lambda), e_measure_mean(pred, gt), f_measure_mean(pred, gt, opts.f_beta2),
            mae(pred, gt)};
}

EvaluationReport evaluate(const Predictor& predictor, const Dataset& data, const MetricOptions& opts,
                          const PredictionSink& sink) {
    if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    const std::size_t n = data.size();
    std::vector<std::array<MetricSet, 3>> per_sample(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (Condition c : kAllConditions) {
            const SaliencyMap pred = predictor(data.samples[i], c);
            per_sample[i][static_cast<std::size_t>(c)] = compute_metrics(pred, data.samples[i].gt, opts);
            if (sink) sink(i, c, pred);
        }
    }

    EvaluationReport r;
    r.samples = n;
    for (std::size_t c = 0; c < 3; ++c) {
        CompensatedSum s, e, f, m;
        for (const auto& row : per_sample) {
            s.add(row[c].s_alpha);
            e.add(row[c].e_m);
            f.add(row[c].f_beta);
            m.add(row[c].mae);
        }
        const auto dn = static_cast<double>(n);
        r.conditions[c] = {s.value() / dn, e.value() / dn, f.value() / dn, m.value() / dn};
    }
    const auto& [full, m1, m2] = r.conditions;
    r.average = {average(full.s_alpha, m1.s_alpha, m2.s_alpha), average(full.e_m, m1.e_m, m2.e_m),
                 average(full.f_beta, m1.f_beta, m2.f_beta), average(full.mae, m1.mae, m2.mae)};
    r.average_drop = {average_drop(full.s_alpha, m1.s_alpha, m2.s_alpha), average_drop(full.e_m, m1.e_m, m2.e_m),
                      average_drop(full.f_beta, m1.f_beta, m2.f_beta), average_drop(full.mae, m1.mae, m2.mae)};
    return r;
}

EvaluationReport evaluate(const ModelState& state, const Dataset& data, const MetricOptions& opts,
                          const PredictionSink& sink) {
    return evaluate([&state](const DualModalSample& s, Condition c) { return predict(state, s, c); }, data, opts,
                    sink);
}

Predictor oracle_predictor() {
    return [](const DualModalSample& s, Condition) { return s.gt; };
}

namespace {

nlohmann::ordered_json metric_json(const MetricSet& m) {
    nlohmann::ordered_json j;
    j["s_alpha"] = m.s_alpha;
    j["e_m"] = m.e_m;
    j["f_beta"] = m.f_beta;
    j["mae"] = m.mae;
    return j;
}

}  // namespace

nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
    nlohmann::ordered_json j;
    j["samples"] = report.samples;
    for (Condition c : kAllConditions)
        j["conditions"][std::string(to_string(c))] = metric_json(report.conditions[static_cast<std::size_t>(c)]);
    j["average"] = metric_json(report.average);
    j["average_drop"] = metric_json(report.average_drop);
    j["config_digest"] = report.config_digest;
    j["checkpoint_digest"] = report.checkpoint_digest;
    return j;
}

std::string report_table(const EvaluationReport& report, const std::string& title) {
    std::ostringstream os;
    if (!title.empty()) os << title << '\n';
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-14s %8s %8s %8s %8s\n", "", "S_alpha", "E_m", "F_beta", "MAE");
    os << buf;
    auto row = [&](const char* name, const MetricSet& m) {
        std::snprintf(buf, sizeof buf, "%-14s %8.4f %8.4f %8.4f %8.4f\n", name, m.s_alpha, m.e_m, m.f_beta, m.mae);
        os << buf;
    };
    row("Complete", report.conditions[0]);
    row("Missing m1", report.conditions[1]);
    row("Missing m2", report.conditions[2]);
    row("Average", report.average);
    row("Average Drop", report.average_drop);
    return os.str();
}

}  // namespace cola
