/// Forward/backward throughput of the hot layers at desk and paper scales.
#include <benchmark/benchmark.h>

#include "azmi/layers.hpp"
#include "azmi/rng.hpp"

using namespace azmi;
using namespace azmi::nn;

namespace {

template <typename T>
void randomize(ParamStore<T>& store, Rng& rng) {
    for (auto& p : store)
        for (auto& v : p.value.vec()) v = static_cast<T>(0.1 * rng.normal());
}

void BM_conv2d_forward_backward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    Rng rng(1);
    ParamStore<float> store;
    Conv2d<float> conv(store, "c", hw, hw, 2, 32);
    randomize(store, rng);
    Tensor<float> x({n, hw, hw, 2});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    for (auto _ : state) {
        store.zero_grads();
        Tensor<float> out = conv.forward(store, x);
        benchmark::DoNotOptimize(conv.backward(store, out));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * hw * hw);
}

void BM_tconv2d_forward_backward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    Rng rng(2);
    ParamStore<float> store;
    TransposedConv2d<float> tconv(store, "t", hw, hw, 64, 64);
    randomize(store, rng);
    Tensor<float> x({n, hw, hw, 64});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    for (auto _ : state) {
        store.zero_grads();
        Tensor<float> out = tconv.forward(store, x);
        benchmark::DoNotOptimize(tconv.backward(store, out));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * hw * hw);
}

void BM_dense_forward_backward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int din = static_cast<int>(state.range(1));
    const int dout = static_cast<int>(state.range(2));
    Rng rng(3);
    ParamStore<float> store;
    Dense<float> fc(store, "fc", din, dout);
    randomize(store, rng);
    Tensor<float> x({n, din});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    for (auto _ : state) {
        store.zero_grads();
        Tensor<float> out = fc.forward(store, x);
        benchmark::DoNotOptimize(fc.backward(store, out));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * din * dout);
}

}  // namespace

BENCHMARK(BM_conv2d_forward_backward)->Args({128, 32})->Args({32, 160});
BENCHMARK(BM_tconv2d_forward_backward)->Args({128, 8})->Args({16, 40});
BENCHMARK(BM_dense_forward_backward)
    ->Args({128, 4096, 16})
    ->Args({128, 7, 4096});
