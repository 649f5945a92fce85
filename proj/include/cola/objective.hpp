#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "cola/data.hpp"
#include "cola/layers.hpp"

namespace cola {

inline constexpr double kPredClamp = 1e-7;
inline constexpr double kIouSmooth = 1e-6;

struct LossReport {
    double bce = 0.0;
    double iou = 0.0;
    double total = 0.0;
};

/// Mean pixel-wise binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double bce_loss(const SaliencyMap& pred, const SaliencyMap& gt);

/// Soft IoU loss: 1 - (sum(p*g) + s) / (sum(p + g - p*g) + s), s = 1e-6.
double iou_loss(const SaliencyMap& pred, const SaliencyMap& gt);

LossReport total_loss(const SaliencyMap& pred, const SaliencyMap& gt);

/// dL_total/dpred, scaled by `scale` (e.g. 1/batch).
SaliencyMap total_loss_grad(const SaliencyMap& pred, const SaliencyMap& gt, double scale = 1.0);

struct GradCheckOptions {
    double step = 1e-3;
    std::size_t samples = 20;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
};

/// Central-difference check of analytic gradients.
///
/// `loss` evaluates the scalar objective at the current parameter values.
/// `loss_and_grad` must zero and then fill Param::grad for every entry of `params`.
/// Entries are drawn round-robin across `params`, a random index within each.
/// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckResult grad_check(const std::function<double()>& loss, const std::function<void()>& loss_and_grad,
                           std::span<Param* const> params, const GradCheckOptions& opts = {});

}  // namespace cola
