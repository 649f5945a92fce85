// OpenMP kernels against the serial reference at encoder-like shapes.
//   ./bench_kernels --benchmark_filter=conv

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cola/kernels.hpp"
#include "cola/random.hpp"

using namespace cola;

namespace {

Tensor random_tensor(int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor t(c, h, w);
    for (double& v : t.values()) v = uniform(rng, -1.0, 1.0);
    return t;
}

std::vector<double> random_weights(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = uniform(rng, -0.1, 0.1);
    return v;
}

// Args: in channels, out channels, spatial size.
template <bool Parallel>
void conv_forward(benchmark::State& st) {
    const int cin = static_cast<int>(st.range(0)), cout = static_cast<int>(st.range(1)), s = static_cast<int>(st.range(2));
    const Tensor x = random_tensor(cin, s, s, 1);
    const auto w = random_weights(static_cast<std::size_t>(cout * cin * 9), 2);
    for (auto _ : st) {
        Tensor y = Parallel ? kernels::conv2d(x, w, {}, cout, 3) : kernels::reference::conv2d(x, w, {}, cout, 3);
        benchmark::DoNotOptimize(y.values().data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(cout) * cin * 9 * s * s);
}

template <bool Parallel>
void conv_input_grad(benchmark::State& st) {
    const int cin = static_cast<int>(st.range(0)), cout = static_cast<int>(st.range(1)), s = static_cast<int>(st.range(2));
    const Tensor g = random_tensor(cout, s, s, 3);
    const auto w = random_weights(static_cast<std::size_t>(cout * cin * 9), 2);
    for (auto _ : st) {
        Tensor dx = Parallel ? kernels::conv2d_input_grad(g, w, cin, 3) : kernels::reference::conv2d_input_grad(g, w, cin, 3);
        benchmark::DoNotOptimize(dx.values().data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(cout) * cin * 9 * s * s);
}

template <bool Parallel>
void conv_param_grad(benchmark::State& st) {
    const int cin = static_cast<int>(st.range(0)), cout = static_cast<int>(st.range(1)), s = static_cast<int>(st.range(2));
    const Tensor x = random_tensor(cin, s, s, 1);
    const Tensor g = random_tensor(cout, s, s, 3);
    std::vector<double> dw(static_cast<std::size_t>(cout * cin * 9));
    for (auto _ : st) {
        if (Parallel)
            kernels::conv2d_param_grad(x, g, 3, dw, {});
        else
            kernels::reference::conv2d_param_grad(x, g, 3, dw, {});
        benchmark::DoNotOptimize(dw.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(cout) * cin * 9 * s * s);
}

template <bool Parallel>
void pool_upsample(benchmark::State& st) {
    const int c = static_cast<int>(st.range(0)), s = static_cast<int>(st.range(1));
    const Tensor x = random_tensor(c, s, s, 4);
    for (auto _ : st) {
        Tensor y = Parallel ? kernels::upsample2(kernels::avg_pool2(x))
                            : kernels::reference::upsample2(kernels::reference::avg_pool2(x));
        benchmark::DoNotOptimize(y.values().data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(c) * s * s);
}

// Desk encoder levels: 3->8 at 64, 16->32 at 16, 64->128 at 4.
void conv_shapes(benchmark::internal::Benchmark* b) {
    b->Args({3, 8, 64})->Args({16, 32, 16})->Args({64, 128, 4})->Args({32, 64, 32});
}

}  // namespace

BENCHMARK(conv_forward<true>)->Name("conv_forward/omp")->Apply(conv_shapes);
BENCHMARK(conv_forward<false>)->Name("conv_forward/reference")->Apply(conv_shapes);
BENCHMARK(conv_input_grad<true>)->Name("conv_input_grad/omp")->Apply(conv_shapes);
BENCHMARK(conv_input_grad<false>)->Name("conv_input_grad/reference")->Apply(conv_shapes);
BENCHMARK(conv_param_grad<true>)->Name("conv_param_grad/omp")->Apply(conv_shapes);
BENCHMARK(conv_param_grad<false>)->Name("conv_param_grad/reference")->Apply(conv_shapes);
BENCHMARK(pool_upsample<true>)->Name("pool_upsample/omp")->Args({32, 64});
BENCHMARK(pool_upsample<false>)->Name("pool_upsample/reference")->Args({32, 64});

BENCHMARK_MAIN();
