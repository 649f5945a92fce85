#pragma once

#include <array>
#include <functional>
#include <string>

#include <json.hpp>

#include "cola/data.hpp"

namespace cola {

class ModelState;

inline constexpr double kFBeta2 = 0.3;
inline constexpr int kThresholds = 255;

/// Mean absolute error.
double mae(const SaliencyMap& pred, const SaliencyMap& gt);

/// Mean over thresholds k/256, k = 1..255, of the F-measure of (pred >= t) against gt.
double f_measure_mean(const SaliencyMap& pred, const SaliencyMap& gt, double beta2 = kFBeta2);

/// F-measure at threshold min(2 * mean(pred), 1).
double f_measure_adaptive(const SaliencyMap& pred, const SaliencyMap& gt, double beta2 = kFBeta2);

/// Structure measure: lambda * object term + (1 - lambda) * region term.
double s_measure(const SaliencyMap& pred, const SaliencyMap& gt, double lambda = 0.5);

/// Mean over the same 255 thresholds of the enhanced-alignment score.
double e_measure_mean(const SaliencyMap& pred, const SaliencyMap& gt);

/// Enhanced-alignment score of an already binary map.
double e_measure_binary(const SaliencyMap& binary_pred, const SaliencyMap& gt);

double average(double full, double miss_m1, double miss_m2);
double average_drop(double full, double miss_m1, double miss_m2);

struct MetricSet {
    double s_alpha = 0.0;
    double e_m = 0.0;
    double f_beta = 0.0;
    double mae = 0.0;

    friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

struct MetricOptions {
    double f_beta2 = kFBeta2;
    double s_lambda = 0.5;
};

MetricSet compute_metrics(const SaliencyMap& pred, const SaliencyMap& gt, const MetricOptions& opts = {});

struct EvaluationReport {
    /// Indexed by Condition: complete, missing_m1, missing_m2.
    std::array<MetricSet, 3> conditions;
    MetricSet average;
    MetricSet average_drop;
    std::size_t samples = 0;
    std::string config_digest;
    std::string checkpoint_digest;
};

using Predictor = std::function<SaliencyMap(const DualModalSample&, Condition)>;
/// Optional sink for every prediction (sample index, condition, map); called in sample order.
using PredictionSink = std::function<void(std::size_t, Condition, const SaliencyMap&)>;

/// Per-image metrics under all three conditions, averaged over the dataset with
/// compensated summation in sample order.
EvaluationReport evaluate(const Predictor& predictor, const Dataset& data, const MetricOptions& opts = {},
                          const PredictionSink& sink = {});
EvaluationReport evaluate(const ModelState& state, const Dataset& data, const MetricOptions& opts = {},
                          const PredictionSink& sink = {});

/// Predicts the ground truth under every condition.
Predictor oracle_predictor();

nlohmann::ordered_json report_to_json(const EvaluationReport& report);
/// Aligned text table: one row per condition plus Average and Average Drop.
std::string report_table(const EvaluationReport& report, const std::string& title = {});

}  // namespace cola
