// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include <lumos/image.hpp>

namespace lumos {

enum class DegradeMode {
    LowLight,
    OverExposure,
};

struct DegradeParams {
    double exposure = 1.0;
    double gamma = 1.0;
    DegradeMode mode = DegradeMode::LowLight;
};

/// Sampling bounds for one scene-level parameter draw.
/// Low-light defaults are exposure in [0.05, 0.1] and gamma in [1.3, 1.4];
/// over-exposure defaults mirror the low-light severity with exposure in
/// [3, 5] and gamma in [0.7, 0.8].
struct DegradeConfig {
    double exposure_min = 0.05;
    double exposure_max = 0.1;
    double gamma_min = 1.3;
    double gamma_max = 1.4;
    DegradeMode mode = DegradeMode::LowLight;
    std::uint64_t seed = 0;

    static DegradeConfig low_light_defaults(std::uint64_t seed = 0);
    static DegradeConfig over_exposure_defaults(std::uint64_t seed = 0);

    void validate() const;
};

/// One draw per scene; every view of the scene shares the result.
DegradeParams sample_params(const DegradeConfig& config, std::mt19937_64& rng);

/// out = clamp01(exposure * v) ^ gamma, per channel in linear light.
ImageLinear darken(const ImageLinear& img, const DegradeParams& p);

/// out = clamp01((exposure * v) ^ gamma); the clip at 1 models saturation.
ImageLinear overexpose(const ImageLinear& img, const DegradeParams& p);

/// Exact inverse of darken on unclipped pixels: v = out^(1/gamma) / exposure.
ImageLinear undegrade(const ImageLinear& img, const DegradeParams& p);

} // namespace lumos
