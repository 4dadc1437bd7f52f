// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

int main(int argc, char** argv) {
    ::benchmark::Initialize(&argc, argv);
    if (::benchmark::ReportUnrecognizedArguments(argc, argv)) {
        return 1;
    }
    ::benchmark::RunSpecifiedBenchmarks();
    ::benchmark::Shutdown();
    return 0;
}
