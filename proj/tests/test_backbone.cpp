#include <doctest.h>

#include "cola/backbone.hpp"
#include "support.hpp"

using namespace cola;

namespace {

EncoderConfig small_config() {
    EncoderConfig c;
    c.widths = {4, 8, 8};
    return c;
}

double max_abs(const FeaturePyramid& p) {
    double m = 0.0;
    for (const auto& t : p)
        for (double v : t.values()) m = std::max(m, std::abs(v));
    return m;
}

bool all_grads_zero(const std::vector<Param*>& ps) {
    for (const Param* p : ps)
        for (double g : p->grad)
            if (g != 0.0) return false;
    return true;
}

}  // namespace

TEST_CASE("encode produces the contracted pyramid") {
    std::mt19937_64 rng(1);
    const EncoderBranch branch("theta.m1", EncoderConfig{}, rng);
    const Tensor img = test::random_tensor(3, 64, 64, 2, 0.0, 1.0);
    const FeaturePyramid p = encode(branch, img);
    REQUIRE(p.size() == 5);
    const int sizes[] = {32, 16, 8, 4, 2};
    const int widths[] = {16, 32, 64, 128, 256};
    for (int j = 0; j < 5; ++j) {
        CHECK(p[j].height() == sizes[j]);
        CHECK(p[j].width() == sizes[j]);
        CHECK(p[j].channels() == widths[j]);
    }
    const FeaturePyramid again = encode(branch, img);
    for (int j = 0; j < 5; ++j) CHECK(p[j] == again[j]);

    CHECK(max_abs(encode(branch, Tensor(3, 64, 64))) == 0.0);
    CHECK_THROWS_AS(encode(branch, Tensor(3, 48, 48)), std::invalid_argument);
    CHECK_THROWS_AS(encode(branch, Tensor(1, 64, 64)), std::invalid_argument);
}

TEST_CASE("bias-free ReLU encoder is positively homogeneous") {
    EncoderConfig cfg = small_config();
    cfg.norm = NormKind::none;
    std::mt19937_64 rng(3);
    const EncoderBranch branch("theta.m1", cfg, rng);
    Tensor img = test::random_tensor(3, 16, 16, 4, 0.0, 1.0);
    const FeaturePyramid base = encode(branch, img);
    img *= 2.5;
    const FeaturePyramid scaled = encode(branch, img);
    for (std::size_t j = 0; j < base.size(); ++j)
        for (std::size_t i = 0; i < base[j].size(); ++i) CHECK(scaled[j][i] == doctest::Approx(2.5 * base[j][i]));
}

TEST_CASE("make_trainable_copy") {
    std::mt19937_64 rng(5);
    const BackboneState s1 = make_backbone(small_config(), rng);
    CHECK_THROWS_AS(make_trainable_copy(BackboneState{}), std::logic_error);

    BackboneState s2 = make_trainable_copy(s1);
    CHECK(s2.has_copy);
    const Tensor img = test::random_tensor(3, 16, 16, 6, 0.0, 1.0);
    for (int b = 0; b < 2; ++b) {
        const FeaturePyramid a = encode(s2.theta[b], img);
        const FeaturePyramid c = encode(s2.theta_f[b], img);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == c[j]);
        for (const Param* p : s2.theta_z[b].params())
            for (double v : p->value) CHECK(v == 0.0);
        CHECK(s2.theta_f[b].params()[0]->name.rfind("theta_f.", 0) == 0);
    }

    // No aliasing between the copy and the original.
    const auto before = s2.theta[0].params()[0]->value;
    s2.theta_f[0].params()[0]->value[0] += 1.0;
    CHECK(s2.theta[0].params()[0]->value == before);
}

TEST_CASE("cd_forward") {
    std::mt19937_64 rng(7);
    const BackboneState s1 = make_backbone(small_config(), rng);
    BackboneState s2 = make_trainable_copy(s1);
    const Tensor m1 = test::random_tensor(3, 16, 16, 8, 0.0, 1.0);
    const Tensor m2 = test::random_tensor(3, 16, 16, 9, 0.0, 1.0);

    SUBCASE("zero convolutions annihilate the copy at initialization") {
        const auto out = cd_forward(s2, m1, m2);
        const auto frozen = cd_forward(s1, m1, m2);
        for (int b = 0; b < 2; ++b)
            for (std::size_t j = 0; j < out[b].size(); ++j) CHECK(out[b][j] == frozen[b][j]);
    }
    SUBCASE("identity zero convolution adds the copy") {
        Conv2d& z = s2.theta_z[0].levels[1];
        for (int c = 0; c < z.in_channels(); ++c) z.weight.value[static_cast<std::size_t>(c * z.in_channels() + c)] = 1.0;
        s2.theta_f[0].params()[0]->value[3] += 0.2;
        const auto out = cd_forward(s2, m1, m2);
        const FeaturePyramid f = encode(s2.theta[0], m1);
        const FeaturePyramid c = encode(s2.theta_f[0], m1);
        Tensor expected = f[1];
        expected += c[1];
        CHECK(out[0][1] == expected);
        CHECK(out[0][0] == f[0]);
    }
    SUBCASE("without zero convolutions the copy is added directly") {
        BackboneState plain = make_trainable_copy(s1, false);
        const auto out = cd_forward(plain, m1, m2);
        const FeaturePyramid f = encode(plain.theta[1], m2);
        for (std::size_t j = 0; j < f.size(); ++j)
            for (std::size_t i = 0; i < f[j].size(); ++i) CHECK(out[1][j][i] == 2.0 * f[j][i]);
    }
}

TEST_CASE("cd_forward on a hand-set 1-channel 2x2 branch") {
    EncoderConfig cfg;
    cfg.widths = {1};
    cfg.in_channels = 1;
    cfg.norm = NormKind::none;
    std::mt19937_64 rng(0);
    BackboneState s = make_trainable_copy(make_backbone(cfg, rng));
    // Centre tap only: frozen weight 2, copy weight -1; zero conv weight 3, bias 0.25.
    for (int b = 0; b < 2; ++b) {
        auto& wf = s.theta[b].params()[0]->value;
        auto& wc = s.theta_f[b].params()[0]->value;
        std::fill(wf.begin(), wf.end(), 0.0);
        std::fill(wc.begin(), wc.end(), 0.0);
        wf[4] = 2.0;
        wc[4] = -1.0;
        s.theta_z[b].levels[0].weight.value[0] = 3.0;
        s.theta_z[b].levels[0].bias.value[0] = 0.25;
    }
    Tensor x(1, 2, 2);
    x[0] = 1.0;
    x[1] = -2.0;
    x[2] = 3.0;
    x[3] = 4.0;
    // frozen: relu(2x) = [2,0,6,8] -> 4; copy: relu(-x) = [0,2,0,0] -> 0.5; 4 + 3 * 0.5 + 0.25
    const auto out = cd_forward(s, x, x);
    CHECK(out[0][0][0] == doctest::Approx(5.75).epsilon(1e-12));
    CHECK(out[1][0][0] == doctest::Approx(5.75).epsilon(1e-12));
}

TEST_CASE("cd_backward gradient partition") {
    std::mt19937_64 rng(11);
    BackboneState s = make_trainable_copy(make_backbone(small_config(), rng));
    const Tensor m1 = test::random_tensor(3, 16, 16, 12, 0.0, 1.0);
    const Tensor m2 = test::random_tensor(3, 16, 16, 13, 0.0, 1.0);
    CdTrace trace;
    const auto out = cd_forward(s, m1, m2, &trace);
    std::array<FeaturePyramid, 2> grad;
    for (int b = 0; b < 2; ++b)
        for (std::size_t j = 0; j < out[b].size(); ++j)
            grad[b].push_back(test::random_tensor(out[b][j].channels(), out[b][j].height(), out[b][j].width(), 100 + j));

    cd_backward(s, trace, grad, BackboneGrads{false, true, true});
    for (int b = 0; b < 2; ++b) {
        CHECK(all_grads_zero(s.theta[b].params()));
        // Zero weights block the path into the copy at initialization...
        CHECK(all_grads_zero(s.theta_f[b].params()));
        // ...but the zero convolutions themselves receive gradient.
        CHECK_FALSE(all_grads_zero(s.theta_z[b].params()));
    }

    // Once the zero convolutions move, the copy receives gradient too.
    for (auto& c : s.theta_z[0].levels) c.weight.value[0] = 0.5;
    CdTrace t2;
    cd_forward(s, m1, m2, &t2);
    cd_backward(s, t2, grad, BackboneGrads{false, true, true});
    CHECK_FALSE(all_grads_zero(s.theta_f[0].params()));
    CHECK(all_grads_zero(s.theta[0].params()));
}
