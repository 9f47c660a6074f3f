#include <benchmark/benchmark.h>

#include "csda/camera.hpp"
#include "csda/render.hpp"

using namespace csda;

namespace {

void render_view(benchmark::State& state) {
    const int wh = static_cast<int>(state.range(0));
    const auto mesh = build_surrogate_tshirt(0.5, 0.7, 0.2, 0.15, 40);
    const auto st = simulate_hang(mesh, 25, 0.8, 0.1, 0.0, 250);
    Aabb box;
    for (const auto& p : st.positions) box.expand(p);
    const auto ring = camera_ring(box.center(), 1.2, 36, 420.0 * wh / 256.0, wh, wh);
    std::size_t cam = 0;
    for (auto _ : state) {
        auto img = render(st, mesh, ring[cam++ % ring.size()]);
        benchmark::DoNotOptimize(img.depth.data());
    }
}

}  // namespace

BENCHMARK(render_view)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
