/// Simulator step throughput on heterogeneous grids.
#include <benchmark/benchmark.h>

#include "azmi/leaksim.hpp"

using namespace azmi;

namespace {

void BM_simulate_scenario(benchmark::State& state) {
    const int hw = static_cast<int>(state.range(0));
    const int steps = static_cast<int>(state.range(1));
    const auto model = sim::generate_heterogeneity(9, hw, hw, 4.0, 0.0, 0.5, 0.1);
    sim::ScenarioSpec spec;
    for (int r = hw / 2; r < hw; ++r)
        if (model.is_active({r, hw / 2})) {
            spec.leak_cell = {r, hw / 2};
            break;
        }
    spec.rate_value = 8.0;
    spec.n_steps = steps;
    spec.diffusivity_scale = 0.012;
    spec.dt = 0.9 * sim::stability_dt(model, spec.diffusivity_scale, 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(sim::simulate_scenario(model, spec));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(hw) * hw * steps);
}

}  // namespace

BENCHMARK(BM_simulate_scenario)->Args({32, 200})->Args({160, 50})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
