#include <doctest.h>

#include <omp.h>

#include "cola/kernels.hpp"
#include "support.hpp"

using namespace cola;
namespace ref = cola::kernels::reference;

namespace {

struct ConvCase {
    int in, out, h, w, k;
    bool bias;
};

const ConvCase kCases[] = {
    {3, 8, 16, 16, 3, false}, {8, 4, 5, 7, 3, true}, {2, 1, 9, 6, 7, true}, {6, 6, 4, 4, 1, true},
    {1, 3, 2, 2, 3, false},   {4, 2, 1, 1, 7, true},
};

}  // namespace

TEST_CASE("conv2d matches the serial reference") {
    std::uint64_t seed = 1;
    for (const auto& c : kCases) {
        const Tensor x = test::random_tensor(c.in, c.h, c.w, ++seed);
        const auto w = test::random_vector(static_cast<std::size_t>(c.out * c.in * c.k * c.k), ++seed);
        const auto b = c.bias ? test::random_vector(static_cast<std::size_t>(c.out), ++seed) : std::vector<double>{};
        const Tensor fast = kernels::conv2d(x, w, b, c.out, c.k);
        const Tensor slow = ref::conv2d(x, w, b, c.out, c.k);
        CHECK(max_abs_diff(fast, slow) < 1e-12);

        const Tensor g = test::random_tensor(c.out, c.h, c.w, ++seed);
        CHECK(max_abs_diff(kernels::conv2d_input_grad(g, w, c.in, c.k), ref::conv2d_input_grad(g, w, c.in, c.k)) <
              1e-12);

        std::vector<double> wg_fast(w.size(), 0.5), wg_slow(w.size(), 0.5);
        std::vector<double> bg_fast(b.size(), 0.25), bg_slow(b.size(), 0.25);
        kernels::conv2d_param_grad(x, g, c.k, wg_fast, bg_fast);
        ref::conv2d_param_grad(x, g, c.k, wg_slow, bg_slow);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(wg_fast[i] == doctest::Approx(wg_slow[i]).epsilon(1e-12));
        for (std::size_t i = 0; i < b.size(); ++i) CHECK(bg_fast[i] == doctest::Approx(bg_slow[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d input gradient is the adjoint of the forward map") {
    const Tensor x = test::random_tensor(3, 6, 5, 11);
    const Tensor g = test::random_tensor(4, 6, 5, 12);
    const auto w = test::random_vector(4 * 3 * 9, 13);
    const double lhs = dot(kernels::conv2d(x, w, {}, 4, 3), g);
    const double rhs = dot(x, kernels::conv2d_input_grad(g, w, 3, 3));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("conv2d hand-computed 3x3 case") {
    // Single channel, kernel with only the centre-left tap set: out(y,x) = 2 * in(y, x-1).
    Tensor x(1, 2, 3);
    for (std::size_t i = 0; i < 6; ++i) x[i] = static_cast<double>(i + 1);
    std::vector<double> w(9, 0.0);
    w[3] = 2.0;
    const std::vector<double> b{0.5};
    const Tensor y = kernels::conv2d(x, w, b, 1, 3);
    const double expected[] = {0.5, 2.5, 4.5, 0.5, 8.5, 10.5};
    for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == expected[i]);
}

TEST_CASE("pooling and upsampling match the reference and are adjoint pairs") {
    const Tensor x = test::random_tensor(3, 8, 6, 21);
    CHECK(max_abs_diff(kernels::avg_pool2(x), ref::avg_pool2(x)) < 1e-15);
    const Tensor gp = test::random_tensor(3, 4, 3, 22);
    CHECK(max_abs_diff(kernels::avg_pool2_grad(gp), ref::avg_pool2_grad(gp)) < 1e-15);
    CHECK(dot(kernels::avg_pool2(x), gp) == doctest::Approx(dot(x, kernels::avg_pool2_grad(gp))).epsilon(1e-13));

    const Tensor s = test::random_tensor(2, 3, 5, 23);
    CHECK(max_abs_diff(kernels::upsample2(s), ref::upsample2(s)) < 1e-15);
    const Tensor gu = test::random_tensor(2, 6, 10, 24);
    CHECK(max_abs_diff(kernels::upsample2_grad(gu), ref::upsample2_grad(gu)) < 1e-14);
    CHECK(dot(kernels::upsample2(s), gu) == doctest::Approx(dot(s, kernels::upsample2_grad(gu))).epsilon(1e-13));
}

TEST_CASE("bilinear upsampling uses half-pixel centres") {
    Tensor x(1, 1, 2);
    x[0] = 0.0;
    x[1] = 4.0;
    const Tensor y = kernels::upsample2(x);
    // Output centres map to source positions -0.25 (clamped), 0.25, 0.75, 1.25 (clamped).
    CHECK(y[0] == 0.0);
    CHECK(y[1] == doctest::Approx(1.0));
    CHECK(y[2] == doctest::Approx(3.0));
    CHECK(y[3] == 4.0);
    // A constant map stays constant.
    const Tensor c = kernels::upsample2(Tensor(2, 3, 3, 0.7));
    for (double v : c.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("kernel results do not depend on the thread count") {
    const Tensor x = test::random_tensor(8, 12, 12, 31);
    const auto w = test::random_vector(16 * 8 * 9, 32);
    const auto b = test::random_vector(16, 33);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const Tensor one = kernels::conv2d(x, w, b, 16, 3);
    omp_set_num_threads(4);
    const Tensor four = kernels::conv2d(x, w, b, 16, 3);
    omp_set_num_threads(saved);
    CHECK(one == four);
}

TEST_CASE("kernel argument validation") {
    const Tensor x(2, 4, 4);
    CHECK_THROWS_AS(kernels::conv2d(x, std::vector<double>(2 * 2 * 4), {}, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(kernels::conv2d(x, std::vector<double>(5), {}, 2, 3), std::invalid_argument);
    CHECK_THROWS_AS(kernels::avg_pool2(Tensor(1, 3, 4)), std::invalid_argument);
}
