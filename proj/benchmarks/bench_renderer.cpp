// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <lumos/renderer.hpp>

#include "bench_common.hpp"

namespace {

using namespace lumos;

void BM_RenderForward(benchmark::State& state) {
    const GaussianScene scene = bench::bench_scene(static_cast<int>(state.range(0)), 1);
    const CameraView cam = bench::bench_camera(static_cast<int>(state.range(1)));
    const RenderOptions opts;
    for (auto _ : state) {
        auto out = render<float>(scene, cam, opts);
        benchmark::DoNotOptimize(out.rgb.data.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderForward)
    ->Args({100, 128})
    ->Args({300, 128})
    ->Args({1000, 128})
    ->Args({300, 256})
    ->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
    const GaussianScene scene = bench::bench_scene(static_cast<int>(state.range(0)), 1);
    const CameraView cam = bench::bench_camera(128);
    const RenderOptions opts;
    Image<float> w_rgb(128, 128, 3, 0.5f);
    RenderUpstream<float> up;
    up.rgb = &w_rgb;
    for (auto _ : state) {
        auto grads = render_backward(scene, cam, opts, up);
        benchmark::DoNotOptimize(grads.center.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderBackward)->Arg(100)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

} // namespace
