#include <benchmark/benchmark.h>

#include "csda/ops.hpp"
#include "csda/rng.hpp"

using namespace csda;

namespace {

template <class T>
void conv_forward(benchmark::State& state) {
    const int cin = static_cast<int>(state.range(0));
    const int cout = static_cast<int>(state.range(1));
    const int hw = static_cast<int>(state.range(2));
    Rng rng(1);
    auto x = Tensor<T>::uniform({8, cin, hw, hw}, T(1), rng);
    auto k = Tensor<T>::uniform({cout, cin, 3, 3}, T(1), rng);
    auto b = Tensor<T>::zeros({cout});
    for (auto _ : state) {
        Tape<T> tape(false);
        auto y = conv2d(tape, x, k, b, 1, 1);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * 8 * cin * cout * 9 * hw * hw);
}

template <class T>
void conv_forward_backward(benchmark::State& state) {
    const int cin = static_cast<int>(state.range(0));
    const int cout = static_cast<int>(state.range(1));
    const int hw = static_cast<int>(state.range(2));
    Rng rng(1);
    auto x = Tensor<T>::uniform({8, cin, hw, hw}, T(1), rng, true);
    auto k = Tensor<T>::uniform({cout, cin, 3, 3}, T(1), rng, true);
    auto b = Tensor<T>::zeros({cout}, true);
    for (auto _ : state) {
        Tape<T> tape;
        auto y = conv2d(tape, x, k, b, 1, 1);
        auto loss = sum(tape, y);
        x.zero_grad();
        k.zero_grad();
        b.zero_grad();
        tape.backward(loss);
        benchmark::DoNotOptimize(k.grad_data());
    }
}

}  // namespace

// decoder-shaped convs at full resolution (tap path) and mid-depth (im2col)
BENCHMARK(conv_forward<float>)->Args({48, 16, 64})->Args({96, 32, 32})->Args({384, 128, 8});
BENCHMARK(conv_forward<double>)->Args({48, 16, 64})->Args({96, 32, 32})->Args({384, 128, 8});
BENCHMARK(conv_forward_backward<float>)->Args({48, 16, 64})->Args({96, 32, 32});
BENCHMARK(conv_forward_backward<double>)->Args({48, 16, 64})->Args({96, 32, 32});

BENCHMARK_MAIN();
