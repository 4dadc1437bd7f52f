// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include <lumos/metrics.hpp>

#include "testutil.hpp"

using namespace lumos;

namespace {

Image<double> random_img(std::mt19937_64& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
    Image<double> img(h, w, 3);
    for (double& v : img.data) {
        v = test::urand(rng, lo, hi);
    }
    return img;
}

} // namespace

TEST(Psnr, IdenticalImagesHitCap) {
    std::mt19937_64 rng(1);
    const Image<double> a = random_img(rng, 8, 8);
    EXPECT_DOUBLE_EQ(psnr(a, a), 99.0);
}

TEST(Psnr, UniformOffsetPinned) {
    std::mt19937_64 rng(2);
    const Image<double> a = random_img(rng, 16, 16, 0.0, 0.8);
    Image<double> b = a;
    for (double& v : b.data) {
        v += 0.1;
    }
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Psnr, MatchesBruteForceMse) {
    std::mt19937_64 rng(3);
    const Image<double> a = random_img(rng, 9, 13);
    const Image<double> b = random_img(rng, 9, 13);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        mse += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    }
    mse /= static_cast<double>(a.data.size());
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / mse), 1e-9);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
    std::mt19937_64 rng(4);
    const Image<double> a = random_img(rng, 12, 12, 0.2, 0.8);
    double prev = 1e9;
    for (double amp : {0.01, 0.05, 0.1, 0.2}) {
        Image<double> b = a;
        std::mt19937_64 noise_rng(7);
        for (double& v : b.data) {
            v += amp * (test::urand(noise_rng, 0.5, 1.0));
        }
        const double p = psnr(a, b);
        EXPECT_LT(p, prev);
        prev = p;
    }
}

TEST(Psnr, ShapeMismatchRejected) {
    std::mt19937_64 rng(5);
    const Image<double> a = random_img(rng, 4, 4);
    const Image<double> b = random_img(rng, 4, 5);
    EXPECT_THROW(psnr(a, b), InvalidArgument);
}

TEST(Ssim, IdenticalImagesGiveOne) {
    std::mt19937_64 rng(6);
    const Image<double> a = random_img(rng, 16, 16);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesClosedForm) {
    const Image<double> a(16, 16, 3, 0.2);
    const Image<double> b(16, 16, 3, 0.8);
    const double c1 = 0.01 * 0.01;
    const double expected = (2.0 * 0.2 * 0.8 + c1) / (0.2 * 0.2 + 0.8 * 0.8 + c1);
    EXPECT_NEAR(ssim(a, b), expected, 1e-6);
}

TEST(Ssim, Symmetric) {
    std::mt19937_64 rng(7);
    const Image<double> a = random_img(rng, 14, 18);
    const Image<double> b = random_img(rng, 14, 18);
    EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
}

TEST(Ssim, RangeAndFlipInvariance) {
    std::mt19937_64 rng(8);
    const Image<double> a = random_img(rng, 15, 15);
    const Image<double> b = random_img(rng, 15, 15);
    const double s = ssim(a, b);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);

    auto flip = [](const Image<double>& img) {
        Image<double> out(img.height, img.width, img.channels);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                for (int c = 0; c < img.channels; ++c) {
                    out.at(y, x, c) = img.at(img.height - 1 - y, img.width - 1 - x, c);
                }
            }
        }
        return out;
    };
    EXPECT_NEAR(ssim(flip(a), flip(b)), s, 1e-12);

    Image<double> pa = a, pb = b;
    // PSNR is also invariant under identical flips.
    EXPECT_DOUBLE_EQ(psnr(pa, pb), psnr(flip(pa), flip(pb)));
}

TEST(Ssim, TooSmallImagesRejected) {
    const Image<double> a(8, 8, 3, 0.5);
    EXPECT_THROW(ssim(a, a), InvalidArgument);
}

TEST(MetricReportApi, PerViewAndMean) {
    std::mt19937_64 rng(9);
    std::vector<Image<double>> pred, ref;
    for (int i = 0; i < 3; ++i) {
        pred.push_back(random_img(rng, 16, 16));
        ref.push_back(pred.back());
    }
    pred[1].data[5] += 0.25;
    const MetricReport r = metric_report(pred, ref);
    ASSERT_EQ(r.psnr_per_view.size(), 3u);
    EXPECT_DOUBLE_EQ(r.psnr_per_view[0], 99.0);
    EXPECT_LT(r.psnr_per_view[1], 99.0);
    EXPECT_NEAR(r.psnr_mean,
                (r.psnr_per_view[0] + r.psnr_per_view[1] + r.psnr_per_view[2]) / 3.0, 1e-12);
}
