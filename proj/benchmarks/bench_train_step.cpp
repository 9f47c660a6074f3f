#include <benchmark/benchmark.h>

#include "csda/losses.hpp"
#include "csda/model.hpp"
#include "csda/rng.hpp"
#include "csda/train.hpp"

using namespace csda;

namespace {

// One full optimizer step of the default-width U-Net at 64x64, batch 8:
// forward, weighted soft-IoU loss, backward, adam.
template <class T>
void train_step(benchmark::State& state) {
    auto model = SegModel<T>::build(6, {16, 32, 64, 128, 256}, 3);
    AdamOptimizer<T> opt(model.params(), 1e-3);
    Rng rng(9);
    auto x = Tensor<T>::uniform({8, 1, 64, 64}, T(0.5), rng);
    std::vector<std::vector<std::uint8_t>> rasters(8, std::vector<std::uint8_t>(64 * 64));
    for (auto& r : rasters)
        for (auto& v : r) v = static_cast<std::uint8_t>(rng.uniform_index(6));
    std::vector<const std::vector<std::uint8_t>*> ptrs;
    for (const auto& r : rasters) ptrs.push_back(&r);
    auto gt = one_hot_labels<T>(ptrs, 64, 64, 6);
    const std::vector<double> w(6, 1.0);
    for (auto _ : state) {
        Tape<T> tape;
        auto fwd = model.forward_segment(tape, x);
        auto loss = soft_iou_loss(tape, fwd.probs, gt, w);
        model.params().zero_grads();
        tape.backward(loss);
        opt.step();
        benchmark::DoNotOptimize(loss.scalar());
    }
    state.SetItemsProcessed(state.iterations() * 8);
}

}  // namespace

BENCHMARK(train_step<float>)->Unit(benchmark::kMillisecond);
BENCHMARK(train_step<double>)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
