// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <lumos/voxel.hpp>

#include "bench_common.hpp"

namespace {

using namespace lumos;

void BM_Voxelize(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::vector<float> pts(n * 3), feats(n * 4);
    for (float& v : pts) {
        v = static_cast<float>(bench::urand(rng, -2, 2));
    }
    for (float& v : feats) {
        v = static_cast<float>(bench::urand(rng, -1, 1));
    }
    for (auto _ : state) {
        auto vr = voxelize<float>(std::span<const float>(pts), {},
                                  std::span<const float>(feats), 4, 0.25,
                                  Eigen::Vector3d(-2, -2, -2));
        benchmark::DoNotOptimize(vr.grid.features.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Voxelize)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

} // namespace
