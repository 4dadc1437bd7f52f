// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include <lumos/renderer.hpp>
#include <lumos/sh.hpp>

#include "testutil.hpp"

using namespace lumos;

namespace {

GaussianPrimitive flat_splat(const Eigen::Vector3d& center, double opacity,
                             const Eigen::Vector3d& color, double scale) {
    GaussianPrimitive g;
    g.center = center;
    g.opacity = opacity;
    g.scale = Eigen::Vector3d::Constant(scale);
    g.sh.assign(3, 0.0);
    for (int c = 0; c < 3; ++c) {
        g.sh[static_cast<std::size_t>(c)] = (color[c] - 0.5) / kSh0;
    }
    return g;
}

} // namespace

TEST(EvalSh, ZeroCoefficientsGiveGray) {
    std::vector<double> coeffs(3 * 16, 0.0);
    for (const auto& dir : {std::array<double, 3>{0, 0, 1}, std::array<double, 3>{1, 0, 0},
                            std::array<double, 3>{0.577350269, 0.577350269, 0.577350269}}) {
        const auto rgb = eval_sh(3, coeffs.data(), dir);
        for (double c : rgb) {
            EXPECT_DOUBLE_EQ(c, 0.5);
        }
    }
}

TEST(EvalSh, DegreeZeroIsViewIndependent) {
    std::vector<double> coeffs = {0.4, -0.7, 1.1};
    const auto a = eval_sh(0, coeffs.data(), {0, 0, 1});
    const auto b = eval_sh(0, coeffs.data(), {0.6, -0.64, 0.48});
    for (int c = 0; c < 3; ++c) {
        EXPECT_DOUBLE_EQ(a[c], b[c]);
    }
}

TEST(EvalSh, DcSolvesForFullRed) {
    // Y00 * c + 0.5 = 1  =>  c = 0.5 / Y00 = 1.7725 (within print precision)
    std::vector<double> coeffs(3, 0.0);
    coeffs[0] = 0.5 / kSh0;
    EXPECT_NEAR(coeffs[0], 1.7725, 1e-4);
    const auto rgb = eval_sh(0, coeffs.data(), {0, 0, 1});
    EXPECT_NEAR(rgb[0], 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(rgb[1], 0.5);
    EXPECT_DOUBLE_EQ(rgb[2], 0.5);
}

TEST(EvalSh, NegativeValuesClampToZero) {
    std::vector<double> coeffs(3, 0.0);
    coeffs[0] = -10.0;
    const auto rgb = eval_sh(0, coeffs.data(), {0, 0, 1});
    EXPECT_DOUBLE_EQ(rgb[0], 0.0);
}

TEST(EvalSh, DegreeOutOfRangeRejected) {
    std::vector<double> coeffs(3 * 25, 0.0);
    EXPECT_THROW(eval_sh(4, coeffs.data(), {0, 0, 1}), InvalidArgument);
    EXPECT_THROW(eval_sh(-1, coeffs.data(), {0, 0, 1}), InvalidArgument);
}

TEST(ShBasis, GradMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::Vector3d d(test::urand(rng, -1, 1), test::urand(rng, -1, 1),
                          test::urand(rng, -1, 1));
        d.normalize();
        double basis[16], dbasis[48];
        sh_basis_grad(3, std::array<double, 3>{d.x(), d.y(), d.z()}, basis, dbasis);
        const double h = 1e-6;
        for (int axis = 0; axis < 3; ++axis) {
            // The analytic gradient treats dir as free coordinates, so the
            // FD probe perturbs without renormalizing.
            std::array<double, 3> dp{d.x(), d.y(), d.z()};
            std::array<double, 3> dm{d.x(), d.y(), d.z()};
            dp[static_cast<std::size_t>(axis)] += h;
            dm[static_cast<std::size_t>(axis)] -= h;
            double bp[16], bm[16];
            sh_basis(3, dp, bp);
            sh_basis(3, dm, bm);
            for (int k = 0; k < 16; ++k) {
                const double fd = (bp[k] - bm[k]) / (2 * h);
                EXPECT_NEAR(dbasis[k * 3 + axis], fd, 1e-6)
                    << "basis " << k << " axis " << axis;
            }
        }
    }
}

TEST(ProjectGaussian, IsotropicAxisClosedForm) {
    const CameraView cam = test::test_camera(64, 64, 100.0);
    RenderOptions opts;
    opts.lowpass = 0.3;
    GaussianPrimitive g = flat_splat({0, 0, 2.0}, 0.8, {1, 0, 0}, 0.1);
    // Any rotation: isotropic covariance is rotation invariant.
    g.rotation = Eigen::Vector4d(0.3, -0.5, 0.2, 0.9).normalized();
    const auto p = project_gaussian<double>(g, cam, opts);
    ASSERT_TRUE(p.has_value());
    const double expected = std::pow(100.0 * 0.1 / 2.0, 2.0) + 0.3;
    EXPECT_NEAR(p->cov2d[0], expected, 1e-9);
    EXPECT_NEAR(p->cov2d[2], expected, 1e-9);
    EXPECT_NEAR(p->cov2d[1], 0.0, 1e-9);
    EXPECT_DOUBLE_EQ(p->z_cam, 2.0);
    EXPECT_DOUBLE_EQ(p->mean2d[0], 32.0);
    EXPECT_DOUBLE_EQ(p->mean2d[1], 32.0);
}

TEST(ProjectGaussian, IdentityRotationDiagonalCovariance) {
    const CameraView cam = test::test_camera(64, 64, 50.0);
    RenderOptions opts;
    opts.lowpass = 0.0;
    GaussianPrimitive g = flat_splat({0, 0, 4.0}, 0.8, {1, 1, 1}, 1.0);
    g.scale = Eigen::Vector3d(0.2, 0.4, 0.8);
    const auto p = project_gaussian<double>(g, cam, opts);
    ASSERT_TRUE(p.has_value());
    // On the optical axis with identity rotation the screen covariance is
    // diag((f sx / z)^2, (f sy / z)^2).
    EXPECT_NEAR(p->cov2d[0], std::pow(50.0 * 0.2 / 4.0, 2), 1e-9);
    EXPECT_NEAR(p->cov2d[2], std::pow(50.0 * 0.4 / 4.0, 2), 1e-9);
    EXPECT_NEAR(p->cov2d[1], 0.0, 1e-12);
}

TEST(ProjectGaussian, DepthClipsToSkip) {
    const CameraView cam = test::test_camera();
    RenderOptions opts;
    opts.near_clip = 0.5;
    opts.far_clip = 10.0;
    GaussianPrimitive g = flat_splat({0, 0, 0.2}, 0.8, {1, 1, 1}, 0.1);
    EXPECT_FALSE(project_gaussian<double>(g, cam, opts).has_value());
    g.center.z() = 50.0;
    EXPECT_FALSE(project_gaussian<double>(g, cam, opts).has_value());
    g.center.z() = 5.0;
    EXPECT_TRUE(project_gaussian<double>(g, cam, opts).has_value());
}

TEST(Render, EmptySceneGivesBackground) {
    GaussianScene scene;
    const CameraView cam = test::test_camera(16, 12);
    RenderOptions opts;
    opts.background = Eigen::Vector3d(0.2, 0.4, 0.6);
    const auto out = render<double>(scene, cam, opts);
    for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 16; ++x) {
            EXPECT_DOUBLE_EQ(out.rgb.at(y, x, 0), 0.2);
            EXPECT_DOUBLE_EQ(out.rgb.at(y, x, 1), 0.4);
            EXPECT_DOUBLE_EQ(out.rgb.at(y, x, 2), 0.6);
            EXPECT_DOUBLE_EQ(out.alpha.at(y, x, 0), 0.0);
            EXPECT_DOUBLE_EQ(out.depth.at(y, x, 0), 0.0);
        }
    }
}

TEST(Render, SingleSplatClosedFormAtCenterPixel) {
    // Principal point at the center of pixel (32, 32): the splat's mean
    // lands exactly on that pixel center, so alpha there equals opacity.
    CameraView cam = test::test_camera(64, 64, 80.0);
    cam.cx = 32.5;
    cam.cy = 32.5;
    RenderOptions opts;
    opts.background = Eigen::Vector3d(0.1, 0.1, 0.1);
    GaussianScene scene;
    scene.sh_degree = 0;
    scene.primitives.push_back(flat_splat({0, 0, 3.0}, 0.9, {1.0, 0.6, 0.3}, 0.3));
    const auto out = render<double>(scene, cam, opts);
    const double a = out.alpha.at(32, 32, 0);
    EXPECT_NEAR(a, 0.9, 1e-12);
    EXPECT_NEAR(out.rgb.at(32, 32, 0), a * 1.0 + (1 - a) * 0.1, 1e-12);
    EXPECT_NEAR(out.rgb.at(32, 32, 1), a * 0.6 + (1 - a) * 0.1, 1e-12);
    EXPECT_NEAR(out.rgb.at(32, 32, 2), a * 0.3 + (1 - a) * 0.1, 1e-12);
    EXPECT_NEAR(out.depth.at(32, 32, 0), 3.0, 1e-12);
}

TEST(Render, TwoSplatCompositingByHand) {
    CameraView cam = test::test_camera(64, 64, 80.0);
    cam.cx = 32.5;
    cam.cy = 32.5;
    RenderOptions opts; // black background
    GaussianScene scene;
    scene.sh_degree = 0;
    scene.primitives.push_back(flat_splat({0, 0, 1.0}, 0.5, {0.9, 0.1, 0.2}, 0.2));
    scene.primitives.push_back(flat_splat({0, 0, 2.0}, 0.5, {0.1, 0.8, 0.4}, 0.4));
    const auto out = render<double>(scene, cam, opts);
    // 0.5 c1 + 0.25 c2 (+ 0.25 * black background)
    EXPECT_NEAR(out.rgb.at(32, 32, 0), 0.5 * 0.9 + 0.25 * 0.1, 1e-12);
    EXPECT_NEAR(out.rgb.at(32, 32, 1), 0.5 * 0.1 + 0.25 * 0.8, 1e-12);
    EXPECT_NEAR(out.rgb.at(32, 32, 2), 0.5 * 0.2 + 0.25 * 0.4, 1e-12);
    EXPECT_NEAR(out.alpha.at(32, 32, 0), 0.75, 1e-12);
    // Expected depth: (1 * 0.5 + 2 * 0.25) / 0.75
    EXPECT_NEAR(out.depth.at(32, 32, 0), 1.0 / 0.75, 1e-12);
}

TEST(Render, AlphaMonotoneUnderAppending) {
    std::mt19937_64 rng(21);
    GaussianScene scene = test::random_scene(rng, 12, 0);
    const CameraView cam = test::test_camera();
    const RenderOptions opts;
    GaussianScene partial;
    partial.sh_degree = scene.sh_degree;
    Image<double> prev_alpha(cam.height, cam.width, 1);
    for (const GaussianPrimitive& g : scene.primitives) {
        partial.primitives.push_back(g);
        const auto out = render<double>(partial, cam, opts);
        for (std::size_t i = 0; i < out.alpha.data.size(); ++i) {
            EXPECT_GE(out.alpha.data[i], prev_alpha.data[i] - 1e-12);
            EXPECT_LE(out.alpha.data[i], 1.0);
        }
        prev_alpha = out.alpha;
    }
}

TEST(Render, DisjointFootprintsAreOrderIndependent) {
    GaussianScene scene;
    scene.sh_degree = 0;
    scene.primitives.push_back(flat_splat({-1.2, 0, 3.0}, 0.8, {1, 0, 0}, 0.05));
    scene.primitives.push_back(flat_splat({1.2, 0, 3.0}, 0.8, {0, 1, 0}, 0.05));
    const CameraView cam = test::test_camera();
    const RenderOptions opts;
    const auto a = render<double>(scene, cam, opts);
    std::swap(scene.primitives[0], scene.primitives[1]);
    const auto b = render<double>(scene, cam, opts);
    EXPECT_EQ(a.rgb.data, b.rgb.data);
    EXPECT_EQ(a.alpha.data, b.alpha.data);
}

TEST(Render, RigidEquivarianceDegreeZero) {
    std::mt19937_64 rng(22);
    const GaussianScene scene = test::random_scene(rng, 20, 0);
    const CameraView cam = test::test_camera();
    const RenderOptions opts;

    const Eigen::Matrix3d r =
        Eigen::AngleAxisd(0.8, Eigen::Vector3d(0.2, 1.0, -0.5).normalized())
            .toRotationMatrix();
    const Eigen::Vector3d t(0.7, -1.1, 0.4);
    const GaussianScene moved = test::transform_scene(scene, r, t);
    const CameraView cam_moved = test::transform_camera(cam, r, t);

    const auto base = render<double>(scene, cam, opts);
    const auto eq = render<double>(moved, cam_moved, opts);
    for (std::size_t i = 0; i < base.rgb.data.size(); ++i) {
        EXPECT_NEAR(base.rgb.data[i], eq.rgb.data[i], 1e-5);
    }
    for (std::size_t i = 0; i < base.alpha.data.size(); ++i) {
        EXPECT_NEAR(base.alpha.data[i], eq.alpha.data[i], 1e-5);
        EXPECT_NEAR(base.depth.data[i], eq.depth.data[i], 1e-5);
    }
}

TEST(Render, TranslationEquivarianceDegreeThree) {
    // Pure translations leave per-splat view directions unchanged, so
    // view-dependent color survives without rotating SH coefficients.
    std::mt19937_64 rng(23);
    const GaussianScene scene = test::random_scene(rng, 10, 3);
    const CameraView cam = test::test_camera();
    const RenderOptions opts;
    const Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    const Eigen::Vector3d t(2.5, -0.3, 1.8);
    const auto base = render<double>(scene, cam, opts);
    const auto eq = render<double>(test::transform_scene(scene, r, t),
                                   test::transform_camera(cam, r, t), opts);
    for (std::size_t i = 0; i < base.rgb.data.size(); ++i) {
        EXPECT_NEAR(base.rgb.data[i], eq.rgb.data[i], 1e-6);
    }
}

TEST(Render, DeterministicAcrossRuns) {
    std::mt19937_64 rng(24);
    const GaussianScene scene = test::random_scene(rng, 25, 2);
    const CameraView cam = test::test_camera();
    const RenderOptions opts;
    const auto a = render<float>(scene, cam, opts);
    const auto b = render<float>(scene, cam, opts);
    ASSERT_EQ(a.rgb.data.size(), b.rgb.data.size());
    EXPECT_EQ(std::memcmp(a.rgb.data.data(), b.rgb.data.data(),
                          a.rgb.data.size() * sizeof(float)),
              0);
    EXPECT_EQ(std::memcmp(a.depth.data.data(), b.depth.data.data(),
                          a.depth.data.size() * sizeof(float)),
              0);
}

TEST(Render, VanishingOpacityApproachesBackground) {
    std::mt19937_64 rng(25);
    GaussianScene scene = test::random_scene(rng, 15, 1);
    for (GaussianPrimitive& g : scene.primitives) {
        g.opacity = 1e-13; // below the footprint floor, everything culls
    }
    const CameraView cam = test::test_camera();
    RenderOptions opts;
    opts.background = Eigen::Vector3d(0.3, 0.5, 0.7);
    const auto out = render<double>(scene, cam, opts);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            EXPECT_DOUBLE_EQ(out.rgb.at(y, x, 0), 0.3);
            EXPECT_DOUBLE_EQ(out.alpha.at(y, x, 0), 0.0);
        }
    }
}

TEST(Render, AlphaClampAtLimit) {
    CameraView cam = test::test_camera(64, 64, 80.0);
    cam.cx = 32.5;
    cam.cy = 32.5;
    const RenderOptions opts;
    GaussianScene scene;
    scene.sh_degree = 0;
    scene.primitives.push_back(flat_splat({0, 0, 3.0}, 0.9999, {1, 1, 1}, 0.3));
    const auto out = render<double>(scene, cam, opts);
    // Per-splat alpha saturates at 0.999 even for near-opaque primitives.
    EXPECT_DOUBLE_EQ(out.alpha.at(32, 32, 0), 0.999);
}
