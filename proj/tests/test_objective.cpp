#include <doctest.h>

#include <cmath>

#include "cola/objective.hpp"
#include "support.hpp"

using namespace cola;

TEST_CASE("bce and iou on hand-computed maps") {
    SaliencyMap gt(1, 2);
    gt[0] = 1.0;
    SaliencyMap pred(1, 2);
    pred[0] = 0.8;
    pred[1] = 0.4;
    CHECK(bce_loss(pred, gt) == doctest::Approx(-(std::log(0.8) + std::log(0.6)) / 2.0).epsilon(1e-14));
    // inter 0.8, union 0.8 + 0.4 + 1 - 0.8 = 1.4
    CHECK(iou_loss(pred, gt) == doctest::Approx(1.0 - (0.8 + 1e-6) / (1.4 + 1e-6)).epsilon(1e-14));
    const LossReport r = total_loss(pred, gt);
    CHECK(r.total == r.bce + r.iou);

    CHECK(iou_loss(gt, gt) == doctest::Approx(0.0).scale(1e-12));
    CHECK(bce_loss(gt, gt) < 1e-6);
    // Clamping keeps the loss finite on confident mistakes.
    SaliencyMap wrong(1, 2);
    wrong[1] = 1.0;
    CHECK(std::isfinite(bce_loss(wrong, gt)));
    CHECK_THROWS_AS(bce_loss(SaliencyMap(2, 2), gt), std::invalid_argument);
}

TEST_CASE("total_loss_grad matches central differences") {
    const SaliencyMap gt = test::random_mask(6, 5, 1);
    SaliencyMap pred = test::random_map(6, 5, 2);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = 0.05 + 0.9 * pred[i];
    const SaliencyMap g = total_loss_grad(pred, gt, 0.5);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        SaliencyMap up = pred, down = pred;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double numeric = 0.5 * (total_loss(up, gt).total - total_loss(down, gt).total) / 2e-6;
        CHECK(g[i] == doctest::Approx(numeric).epsilon(1e-6).scale(1e-6));
    }
}

TEST_CASE("grad_check detects a wrong gradient") {
    Param p("p", {3});
    p.value = {0.3, -0.2, 0.5};
    Param* ps[] = {&p};
    auto loss = [&] { return p.value[0] * p.value[0] + 3.0 * p.value[1] + std::sin(p.value[2]); };
    auto good = [&] {
        p.zero_grad();
        p.grad = {2.0 * p.value[0], 3.0, std::cos(p.value[2])};
    };
    auto bad = [&] {
        good();
        p.grad[1] = 2.0;
    };
    const GradCheckResult ok = grad_check(loss, good, ps, {1e-4, 9, 1});
    CHECK(ok.checked == 9);
    CHECK(ok.max_relative_error < 1e-7);
    CHECK(grad_check(loss, bad, ps, {1e-4, 9, 1}).max_relative_error > 0.1);
    // Parameter values are restored afterwards.
    CHECK(p.value == std::vector<double>{0.3, -0.2, 0.5});
}
