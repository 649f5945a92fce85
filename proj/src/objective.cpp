#include "cola/objective.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace cola {

namespace {

void check_pair(const SaliencyMap& pred, const SaliencyMap& gt) {
    require_same_shape(pred.values, gt.values, "loss");
    if (pred.size() == 0) throw std::invalid_argument("loss: empty map");
}

double clamp_pred(double p) { return std::clamp(p, kPredClamp, 1.0 - kPredClamp); }

}  // namespace

double bce_loss(const SaliencyMap& pred, const SaliencyMap& gt) {
    check_pair(pred, gt);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = clamp_pred(pred[i]);
        const double g = gt[i];
        s -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    }
    return s / static_cast<double>(pred.size());
}

double iou_loss(const SaliencyMap& pred, const SaliencyMap& gt) {
    check_pair(pred, gt);
    double inter = 0.0;
    double uni = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred[i];
        const double g = gt[i];
        inter += p * g;
        uni += p + g - p * g;
    }
    return 1.0 - (inter + kIouSmooth) / (uni + kIouSmooth);
}

LossReport total_loss(const SaliencyMap& pred, const SaliencyMap& gt) {
    LossReport r;
    r.bce = bce_loss(pred, gt);
    r.iou = iou_loss(pred, gt);
    r.total = r.bce + r.iou;
    return r;
}

SaliencyMap total_loss_grad(const SaliencyMap& pred, const SaliencyMap& gt, double scale) {
    check_pair(pred, gt);
    const auto n = static_cast<double>(pred.size());
    double inter = kIouSmooth;
    double uni = kIouSmooth;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += pred[i] * gt[i];
        uni += pred[i] + gt[i] - pred[i] * gt[i];
    }
    SaliencyMap grad(pred.height(), pred.width());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred[i];
        const double g = gt[i];
        double d_bce = 0.0;
        if (p > kPredClamp && p < 1.0 - kPredClamp) d_bce = (-g / p + (1.0 - g) / (1.0 - p)) / n;
        // L_iou = 1 - I / U, dI/dp = g, dU/dp = 1 - g
        const double d_iou = -(g * uni - inter * (1.0 - g)) / (uni * uni);
        grad[i] = scale * (d_bce + d_iou);
    }
    return grad;
}

GradCheckResult grad_check(const std::function<double()>& loss, const std::function<void()>& loss_and_grad,
                           std::span<Param* const> params, const GradCheckOptions& opts) {
    if (!(opts.step > 0.0) || !std::isfinite(opts.step)) throw std::invalid_argument("grad_check: step must be positive");
    if (params.empty()) throw std::invalid_argument("grad_check: no parameters");

    loss_and_grad();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const Param* p : params) analytic.push_back(p->grad);

    std::mt19937_64 rng(opts.seed);
    GradCheckResult result;
    for (std::size_t k = 0; k < opts.samples; ++k) {
        const std::size_t which = k % params.size();
        Param& p = *params[which];
        const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
        const double saved = p.value[idx];
        p.value[idx] = saved + opts.step;
        const double up = loss();
        p.value[idx] = saved - opts.step;
        const double down = loss();
        p.value[idx] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) throw std::runtime_error("grad_check: non-finite loss");
        const double numeric = (up - down) / (2.0 * opts.step);
        const double a = analytic[which][idx];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
        ++result.checked;
    }
    return result;
}

}  // namespace cola
