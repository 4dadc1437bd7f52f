// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/degrade.hpp>

#include <algorithm>
#include <cmath>

namespace lumos {

DegradeConfig DegradeConfig::low_light_defaults(std::uint64_t seed) {
    DegradeConfig c;
    c.exposure_min = 0.05;
    c.exposure_max = 0.1;
    c.gamma_min = 1.3;
    c.gamma_max = 1.4;
    c.mode = DegradeMode::LowLight;
    c.seed = seed;
    return c;
}

DegradeConfig DegradeConfig::over_exposure_defaults(std::uint64_t seed) {
    DegradeConfig c;
    c.exposure_min = 3.0;
    c.exposure_max = 5.0;
    c.gamma_min = 0.7;
    c.gamma_max = 0.8;
    c.mode = DegradeMode::OverExposure;
    c.seed = seed;
    return c;
}

void DegradeConfig::validate() const {
    if (!(exposure_min > 0.0) || !(exposure_min <= exposure_max)) {
        throw InvalidArgument("exposure bounds must satisfy 0 < min <= max");
    }
    if (!(gamma_min > 0.0) || !(gamma_min <= gamma_max)) {
        throw InvalidArgument("gamma bounds must satisfy 0 < min <= max");
    }
}

DegradeParams sample_params(const DegradeConfig& config, std::mt19937_64& rng) {
    config.validate();
    DegradeParams p;
    p.mode = config.mode;
    // Degenerate intervals bypass the distribution so min==max is exact.
    if (config.exposure_min == config.exposure_max) {
        p.exposure = config.exposure_min;
    } else {
        std::uniform_real_distribution<double> d(config.exposure_min, config.exposure_max);
        p.exposure = d(rng);
    }
    if (config.gamma_min == config.gamma_max) {
        p.gamma = config.gamma_min;
    } else {
        std::uniform_real_distribution<double> d(config.gamma_min, config.gamma_max);
        p.gamma = d(rng);
    }
    return p;
}

namespace {

template <typename Fn>
ImageLinear map_pixels(const ImageLinear& img, Fn&& fn) {
    ImageLinear out;
    out.height = img.height;
    out.width = img.width;
    out.channels = img.channels;
    out.data.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        out.data[i] = static_cast<float>(fn(static_cast<double>(img.data[i])));
    }
    return out;
}

} // namespace

ImageLinear darken(const ImageLinear& img, const DegradeParams& p) {
    if (p.mode != DegradeMode::LowLight) {
        throw InvalidArgument("darken requires low_light params");
    }
    return map_pixels(img, [&](double v) {
        return std::pow(std::clamp(p.exposure * v, 0.0, 1.0), p.gamma);
    });
}

ImageLinear overexpose(const ImageLinear& img, const DegradeParams& p) {
    if (p.mode != DegradeMode::OverExposure) {
        throw InvalidArgument("overexpose requires over_exposure params");
    }
    return map_pixels(img, [&](double v) {
        return std::clamp(std::pow(std::max(p.exposure * v, 0.0), p.gamma), 0.0, 1.0);
    });
}

ImageLinear undegrade(const ImageLinear& img, const DegradeParams& p) {
    if (p.exposure == 0.0 || p.gamma == 0.0) {
        throw InvalidArgument("undegrade requires non-zero exposure and gamma");
    }
    return map_pixels(img, [&](double v) {
        return std::pow(std::max(v, 0.0), 1.0 / p.gamma) / p.exposure;
    });
}

} // namespace lumos
