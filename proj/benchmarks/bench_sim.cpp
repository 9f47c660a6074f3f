#include <benchmark/benchmark.h>

#include "csda/cloth.hpp"

using namespace csda;

namespace {

void sim_step(benchmark::State& state) {
    const auto mesh = build_surrogate_tshirt(0.5, 0.7, 0.2, 0.15, 40);
    ClothState st;
    st.positions = mesh.vertices;
    st.velocities.assign(mesh.vertices.size(), Vec3{});
    st.pinned_vertex = 0;
    st.time_step = 1.0 / 60.0 / 96.0;
    st.damping = 1e-4;
    for (auto _ : state) {
        step(st, mesh, {});
        benchmark::DoNotOptimize(st.positions.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mesh.springs.size()));
}

void sim_full_hang(benchmark::State& state) {
    const auto mesh = build_surrogate_tshirt(0.5, 0.7, 0.2, 0.15, 40);
    for (auto _ : state) {
        const auto st = simulate_hang(mesh, 17, 0.4, 0.1, -0.05, 250);
        benchmark::DoNotOptimize(st.positions.data());
    }
}

}  // namespace

BENCHMARK(sim_step);
BENCHMARK(sim_full_hang)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
