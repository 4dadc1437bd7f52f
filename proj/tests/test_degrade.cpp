// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <lumos/degrade.hpp>

#include "testutil.hpp"

using namespace lumos;

namespace {

ImageLinear single_pixel(double r, double g, double b) {
    ImageLinear img(1, 1, 3);
    img.data = {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
    return img;
}

ImageLinear random_image(std::mt19937_64& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
    ImageLinear img(h, w, 3);
    for (float& v : img.data) {
        v = static_cast<float>(test::urand(rng, lo, hi));
    }
    return img;
}

DegradeParams low(double e, double g) {
    return DegradeParams{e, g, DegradeMode::LowLight};
}

} // namespace

TEST(DegradeSampler, DegenerateIntervalIsExact) {
    DegradeConfig cfg;
    cfg.exposure_min = cfg.exposure_max = 0.07;
    cfg.gamma_min = cfg.gamma_max = 1.35;
    std::mt19937_64 rng(1);
    const DegradeParams p = sample_params(cfg, rng);
    EXPECT_DOUBLE_EQ(p.exposure, 0.07);
    EXPECT_DOUBLE_EQ(p.gamma, 1.35);
}

TEST(DegradeSampler, MonteCarloMean) {
    const DegradeConfig cfg = DegradeConfig::low_light_defaults(42);
    std::mt19937_64 rng(cfg.seed);
    double mean = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        mean += sample_params(cfg, rng).exposure;
    }
    mean /= n;
    EXPECT_NEAR(mean, 0.075, 0.002);
}

TEST(DegradeSampler, DeterministicGivenSeed) {
    const DegradeConfig cfg = DegradeConfig::low_light_defaults(9);
    std::mt19937_64 rng_a(cfg.seed), rng_b(cfg.seed);
    const DegradeParams a = sample_params(cfg, rng_a);
    const DegradeParams b = sample_params(cfg, rng_b);
    EXPECT_DOUBLE_EQ(a.exposure, b.exposure);
    EXPECT_DOUBLE_EQ(a.gamma, b.gamma);
}

TEST(DegradeSampler, InvalidBoundsRejected) {
    DegradeConfig cfg;
    cfg.exposure_min = 0.2;
    cfg.exposure_max = 0.1;
    std::mt19937_64 rng(0);
    EXPECT_THROW(sample_params(cfg, rng), InvalidArgument);
    cfg = DegradeConfig{};
    cfg.gamma_min = 0.0;
    EXPECT_THROW(sample_params(cfg, rng), InvalidArgument);
}

TEST(Darken, PinnedScalarValue) {
    // 0.5 at exposure 0.1, gamma 1.3: (0.05)^1.3 = exp(1.3 ln 0.05)
    const ImageLinear out = darken(single_pixel(0.5, 0.5, 0.5), low(0.1, 1.3));
    const double expected = 0.020354526576845219; // frozen from the scalar oracle
    EXPECT_NEAR(std::exp(1.3 * std::log(0.05)), expected, 1e-12);
    for (float v : out.data) {
        EXPECT_NEAR(v, expected, 1e-7);
    }
}

TEST(Darken, IdentityParams) {
    std::mt19937_64 rng(3);
    const ImageLinear img = random_image(rng, 4, 5);
    const ImageLinear out = darken(img, low(1.0, 1.0));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        EXPECT_NEAR(out.data[i], img.data[i], 1e-7);
    }
}

TEST(Darken, BlackFixedPoint) {
    const ImageLinear out = darken(single_pixel(0, 0, 0), low(0.07, 1.33));
    for (float v : out.data) {
        EXPECT_EQ(v, 0.0f);
    }
}

TEST(Darken, ModeMismatchRejected) {
    DegradeParams p{4.0, 0.8, DegradeMode::OverExposure};
    EXPECT_THROW(darken(single_pixel(0.5, 0.5, 0.5), p), InvalidArgument);
    EXPECT_THROW(overexpose(single_pixel(0.5, 0.5, 0.5), low(0.1, 1.3)), InvalidArgument);
}

TEST(Darken, MonotoneInParams) {
    std::mt19937_64 rng(11);
    const ImageLinear img = random_image(rng, 6, 6);
    for (int trial = 0; trial < 20; ++trial) {
        const double e1 = test::urand(rng, 0.05, 0.9);
        const double e2 = test::urand(rng, 0.05, 0.9);
        const double g1 = test::urand(rng, 1.0, 2.0);
        const double g2 = test::urand(rng, 1.0, 2.0);
        const ImageLinear lo_e = darken(img, low(std::min(e1, e2), g1));
        const ImageLinear hi_e = darken(img, low(std::max(e1, e2), g1));
        const ImageLinear hi_g = darken(img, low(e1, std::max(g1, g2)));
        const ImageLinear lo_g = darken(img, low(e1, std::min(g1, g2)));
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            EXPECT_LE(lo_e.data[i], hi_e.data[i] + 1e-7f);
            EXPECT_LE(hi_g.data[i], lo_g.data[i] + 1e-7f);
        }
    }
}

TEST(Darken, DarkensPixelwise) {
    std::mt19937_64 rng(13);
    const ImageLinear img = random_image(rng, 5, 5);
    const ImageLinear out = darken(img, low(0.6, 1.2));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        EXPECT_LE(out.data[i], img.data[i] + 1e-7f);
    }
}

TEST(Darken, CommutesWithChannelPermutation) {
    std::mt19937_64 rng(17);
    const ImageLinear img = random_image(rng, 4, 4);
    ImageLinear swapped = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            std::swap(swapped.at(y, x, 0), swapped.at(y, x, 2));
        }
    }
    const DegradeParams p = low(0.08, 1.37);
    const ImageLinear a = darken(swapped, p);
    ImageLinear b = darken(img, p);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            std::swap(b.at(y, x, 0), b.at(y, x, 2));
        }
    }
    EXPECT_EQ(a.data, b.data);
}

TEST(Overexpose, SaturationClip) {
    DegradeParams p{4.0, 0.8, DegradeMode::OverExposure};
    const ImageLinear out = overexpose(single_pixel(0.5, 0.5, 0.5), p);
    for (float v : out.data) {
        EXPECT_FLOAT_EQ(v, 1.0f);
    }
}

TEST(Overexpose, PureExposureScaling) {
    DegradeParams p{2.0, 1.0, DegradeMode::OverExposure};
    const ImageLinear out = overexpose(single_pixel(0.1, 0.1, 0.1), p);
    for (float v : out.data) {
        EXPECT_NEAR(v, 0.2, 1e-7);
    }
}

TEST(Overexpose, PinnedScalarValue) {
    DegradeParams p{3.0, 0.77, DegradeMode::OverExposure};
    const ImageLinear out = overexpose(single_pixel(0.2, 0.2, 0.2), p);
    const double expected = 0.67480215802094345; // frozen from the scalar oracle
    EXPECT_NEAR(std::exp(0.77 * std::log(0.6)), expected, 1e-12);
    for (float v : out.data) {
        EXPECT_NEAR(v, expected, 1e-6);
    }
}

TEST(Overexpose, OutputAlwaysInUnitRange) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const ImageLinear img = random_image(rng, 6, 6, 0.0, 2.0);
        DegradeParams p{test::urand(rng, 1.0, 6.0), test::urand(rng, 0.5, 1.0),
                        DegradeMode::OverExposure};
        const ImageLinear out = overexpose(img, p);
        for (float v : out.data) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}

TEST(Undegrade, InvertsDarken) {
    std::mt19937_64 rng(29);
    const ImageLinear img = random_image(rng, 8, 8, 0.01, 0.99);
    const DegradeParams p = low(0.08, 1.33);
    const ImageLinear back = undegrade(darken(img, p), p);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        EXPECT_NEAR(back.data[i], img.data[i], 1e-6);
    }
}

TEST(Undegrade, PinnedInverse) {
    const double darkened = 0.020354526576845219;
    const ImageLinear out = undegrade(single_pixel(darkened, darkened, darkened), low(0.1, 1.3));
    for (float v : out.data) {
        EXPECT_NEAR(v, 0.5, 1e-5);
    }
}

TEST(Undegrade, IdentityParams) {
    std::mt19937_64 rng(31);
    const ImageLinear img = random_image(rng, 3, 3);
    const ImageLinear out = undegrade(img, low(1.0, 1.0));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        EXPECT_NEAR(out.data[i], img.data[i], 1e-6);
    }
}

TEST(Undegrade, ZeroParamsRejected) {
    EXPECT_THROW(undegrade(single_pixel(0.1, 0.1, 0.1), low(0.0, 1.3)), InvalidArgument);
    EXPECT_THROW(undegrade(single_pixel(0.1, 0.1, 0.1), low(0.1, 0.0)), InvalidArgument);
}
