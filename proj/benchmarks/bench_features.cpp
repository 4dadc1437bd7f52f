// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <lumos/features.hpp>
#include <lumos/metrics.hpp>

#include "bench_common.hpp"

namespace {

using namespace lumos;

void BM_PyramidExtract(benchmark::State& state) {
    std::mt19937_64 rng(5);
    const int size = static_cast<int>(state.range(0));
    Image<float> img(size, size, 3);
    for (float& v : img.data) {
        v = static_cast<float>(bench::urand(rng, 0, 1));
    }
    const FeatureExtractor<float> ex(ExtractorSpec{});
    for (auto _ : state) {
        auto pyr = ex.extract(img);
        benchmark::DoNotOptimize(pyr[0].data.data());
    }
}
BENCHMARK(BM_PyramidExtract)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
    std::mt19937_64 rng(6);
    const int size = static_cast<int>(state.range(0));
    Image<float> a(size, size, 3), b(size, size, 3);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] = static_cast<float>(bench::urand(rng, 0, 1));
        b.data[i] = static_cast<float>(bench::urand(rng, 0, 1));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(ssim(a, b));
    }
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

} // namespace
