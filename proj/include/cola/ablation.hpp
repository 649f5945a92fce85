#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cola/config.hpp"
#include "cola/metrics.hpp"

namespace cola {

/// One row of an ablation matrix. `additional_training` false means the row
/// reports the stage-I model as is; otherwise a stage-II run with the toggles follows.
struct AblationRow {
    std::string label;
    bool lqa = true;
    bool additional_training = true;
    bool copy = false;
    bool zero_conv = false;
    bool freeze = false;
    bool modality_dropout = false;
};

inline constexpr std::string_view kAblationMatrices[] = {"components", "cd", "complete"};

/// Rows of the named matrix; throws std::invalid_argument for an unknown name.
std::vector<AblationRow> ablation_matrix(std::string_view name);

/// The run config a row trains with: the base config with the row's toggles applied.
RunConfig row_config(const RunConfig& base, const AblationRow& row);

struct AblationResult {
    AblationRow row;
    Json config;
    EvaluationReport report;
};

using AblationProgress = std::function<void(const AblationRow&)>;

/// Trains and evaluates every row. Stage-I models are shared between rows with the same LQA setting.
std::vector<AblationResult> run_ablation(std::string_view matrix, const RunConfig& base, const Dataset& train,
                                         const Dataset& test, const AblationProgress& progress = {});

Json ablation_to_json(std::string_view matrix, const std::vector<AblationResult>& results);
/// Toggle columns, then S/E/F/MAE per condition and the Average block.
std::string ablation_table(std::string_view matrix, const std::vector<AblationResult>& results);

}  // namespace cola
