// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include <lumos/geometry.hpp>
#include <lumos/synth.hpp>

#include "testutil.hpp"

using namespace lumos;

namespace {

DepthMap<double> random_depth(std::mt19937_64& rng, int h, int w) {
    DepthMap<double> d(h, w);
    for (double& z : d.z) {
        z = test::urand(rng, 1.0, 6.0);
    }
    return d;
}

PointMap random_points(std::mt19937_64& rng, int s, int h, int w) {
    PointMap pm(s, h, w);
    for (double& v : pm.xyz) {
        v = test::urand(rng, -2.0, 2.0);
    }
    std::fill(pm.mask.begin(), pm.mask.end(), 1);
    return pm;
}

} // namespace

TEST(Project, PrincipalAxisPoint) {
    const CameraView cam = test::test_camera(100, 80, 50.0);
    const auto p = project(Eigen::Vector3d(0, 0, 5), cam);
    ASSERT_TRUE(p.has_value());
    EXPECT_DOUBLE_EQ(p->u, cam.cx);
    EXPECT_DOUBLE_EQ(p->v, cam.cy);
    EXPECT_DOUBLE_EQ(p->z_cam, 5.0);
}

TEST(Project, PinnedPinholeValues) {
    CameraView cam = test::test_camera(10, 10, 1.0);
    cam.cx = 0.0;
    cam.cy = 0.0;
    const auto p = project(Eigen::Vector3d(2, 3, 4), cam);
    ASSERT_TRUE(p.has_value());
    EXPECT_DOUBLE_EQ(p->u, 0.5);
    EXPECT_DOUBLE_EQ(p->v, 0.75);
    EXPECT_DOUBLE_EQ(p->z_cam, 4.0);
}

TEST(Project, BehindCameraSignalled) {
    const CameraView cam = test::test_camera();
    EXPECT_FALSE(project(Eigen::Vector3d(0, 0, 0), cam).has_value());
    EXPECT_FALSE(project(Eigen::Vector3d(1, 1, -2), cam).has_value());
}

TEST(Backproject, PrincipalPointRay) {
    // The pixel whose center hits the principal point maps to (0, 0, z).
    CameraView cam = test::test_camera(64, 64, 100.0);
    cam.cx = 10.5;
    cam.cy = 20.5;
    DepthMap<double> d(64, 64);
    d.at(20, 10) = 2.0;
    const PointMap pm = backproject(d, cam);
    const std::size_t site = pm.site(0, 20, 10);
    ASSERT_TRUE(pm.mask[site]);
    EXPECT_NEAR(pm.xyz[site * 3 + 0], 0.0, 1e-12);
    EXPECT_NEAR(pm.xyz[site * 3 + 1], 0.0, 1e-12);
    EXPECT_NEAR(pm.xyz[site * 3 + 2], 2.0, 1e-12);
}

TEST(Backproject, PinnedPinholeFormula) {
    CameraView cam = test::test_camera(256, 256, 100.0);
    cam.cx = 50.0;
    cam.cy = 50.0;
    DepthMap<double> d(256, 256);
    d.at(49, 149) = 1.0;
    const PointMap pm = backproject(d, cam);
    const std::size_t site = pm.site(0, 49, 149);
    ASSERT_TRUE(pm.mask[site]);
    // x: (149.5 - 50) / 100 = 0.995; y: (49.5 - 50) / 100 = -0.005
    EXPECT_NEAR(pm.xyz[site * 3 + 0], 0.995, 1e-12);
    EXPECT_NEAR(pm.xyz[site * 3 + 1], -0.005, 1e-12);
    EXPECT_NEAR(pm.xyz[site * 3 + 2], 1.0, 1e-12);
}

TEST(Backproject, InvalidDepthMasked) {
    const CameraView cam = test::test_camera(8, 8, 10.0);
    DepthMap<double> d(8, 8); // all zeros
    const PointMap pm = backproject(d, cam);
    for (std::uint8_t m : pm.mask) {
        EXPECT_EQ(m, 0);
    }
}

TEST(Backproject, DimMismatchRejected) {
    const CameraView cam = test::test_camera(8, 8, 10.0);
    DepthMap<double> d(4, 8);
    EXPECT_THROW(backproject(d, cam), InvalidArgument);
}

TEST(Backproject, ProjectRoundtrip) {
    std::mt19937_64 rng(5);
    CameraView cam = test::test_camera(32, 24, 40.0);
    cam.w2c = look_at(Eigen::Vector3d(1.5, -0.7, -3.0), Eigen::Vector3d(0.1, 0.2, 0.0));
    const DepthMap<double> d = random_depth(rng, 24, 32);
    const PointMap pm = backproject(d, cam);
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 32; ++x) {
            const std::size_t site = pm.site(0, y, x);
            ASSERT_TRUE(pm.mask[site]);
            const Eigen::Vector3d p(pm.xyz[site * 3], pm.xyz[site * 3 + 1],
                                    pm.xyz[site * 3 + 2]);
            const auto proj = project(p, cam);
            ASSERT_TRUE(proj.has_value());
            EXPECT_NEAR(proj->u, x + 0.5, 1e-4);
            EXPECT_NEAR(proj->v, y + 0.5, 1e-4);
            EXPECT_NEAR(proj->z_cam, d.at(y, x), 1e-9);
        }
    }
}

TEST(Backproject, TransformsCovariantly) {
    // backproject with pose w2c * T equals T^-1 applied to backproject(w2c).
    std::mt19937_64 rng(6);
    CameraView cam = test::test_camera(16, 16, 20.0);
    cam.w2c = look_at(Eigen::Vector3d(0.5, 1.0, -4.0), Eigen::Vector3d::Zero());
    const DepthMap<double> d = random_depth(rng, 16, 16);

    Eigen::Matrix4d tf = Eigen::Matrix4d::Identity();
    tf.topLeftCorner<3, 3>() =
        Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    tf.topRightCorner<3, 1>() = Eigen::Vector3d(0.3, -0.4, 0.9);

    CameraView cam_t = cam;
    cam_t.w2c = cam.w2c * tf;

    const PointMap base = backproject(d, cam);
    const PointMap moved = backproject(d, cam_t);
    const Eigen::Matrix4d tf_inv = tf.inverse();
    for (std::size_t site = 0; site < base.mask.size(); ++site) {
        ASSERT_TRUE(base.mask[site] && moved.mask[site]);
        const Eigen::Vector4d p(base.xyz[site * 3], base.xyz[site * 3 + 1],
                                base.xyz[site * 3 + 2], 1.0);
        const Eigen::Vector4d expected = tf_inv * p;
        for (int c = 0; c < 3; ++c) {
            EXPECT_NEAR(moved.xyz[site * 3 + c], expected[c], 1e-9);
        }
    }
}

TEST(DistillLoss, IdenticalMapsGiveZero) {
    std::mt19937_64 rng(7);
    const PointMap pm = random_points(rng, 2, 4, 4);
    const auto r = distill_loss(pm, pm);
    EXPECT_DOUBLE_EQ(r.value, 0.0);
    for (double g : r.grad) {
        EXPECT_DOUBLE_EQ(g, 0.0);
    }
}

TEST(DistillLoss, UniformOffsetNormalization) {
    // +0.1 on every coordinate of a 2x2 map: three coordinates per site sum
    // to 0.3, averaged over sites stays 0.3. Brute force cross-check.
    std::mt19937_64 rng(8);
    PointMap teacher = random_points(rng, 1, 2, 2);
    PointMap student = teacher;
    for (double& v : student.xyz) {
        v += 0.1;
    }
    const auto r = distill_loss(student, teacher);
    EXPECT_NEAR(r.value, 0.3, 1e-12);

    double brute = 0.0;
    std::size_t sites = 0;
    for (std::size_t site = 0; site < teacher.mask.size(); ++site) {
        ++sites;
        for (int c = 0; c < 3; ++c) {
            brute += std::abs(student.xyz[site * 3 + c] - teacher.xyz[site * 3 + c]);
        }
    }
    brute /= static_cast<double>(sites);
    EXPECT_NEAR(r.value, brute, 1e-15);
}

TEST(DistillLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    const PointMap teacher = random_points(rng, 1, 3, 3);
    PointMap student = random_points(rng, 1, 3, 3);
    const auto analytic = distill_loss(student, teacher);
    const double h = 1e-6;
    for (std::size_t i = 0; i < student.xyz.size(); ++i) {
        const double orig = student.xyz[i];
        student.xyz[i] = orig + h;
        const double fp = distill_loss(student, teacher, false).value;
        student.xyz[i] = orig - h;
        const double fm = distill_loss(student, teacher, false).value;
        student.xyz[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        EXPECT_NEAR(analytic.grad[i], fd, 1e-4);
    }
}

TEST(DistillLoss, SymmetricValue) {
    std::mt19937_64 rng(10);
    const PointMap a = random_points(rng, 2, 3, 3);
    const PointMap b = random_points(rng, 2, 3, 3);
    EXPECT_DOUBLE_EQ(distill_loss(a, b, false).value, distill_loss(b, a, false).value);
}

TEST(DistillLoss, MaskedSitesExcluded) {
    std::mt19937_64 rng(11);
    PointMap teacher = random_points(rng, 1, 2, 2);
    PointMap student = teacher;
    student.xyz[0] += 5.0;      // site 0, coordinate x
    teacher.mask[0] = 0;        // but site 0 is masked out
    student.mask[0] = 0;
    const auto r = distill_loss(student, teacher);
    EXPECT_NEAR(r.value, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(r.grad[0], 0.0);
}

TEST(DistillLoss, ErrorsOnShapeMaskAndEmpty) {
    std::mt19937_64 rng(12);
    const PointMap a = random_points(rng, 1, 2, 2);
    const PointMap b = random_points(rng, 1, 2, 3);
    EXPECT_THROW(distill_loss(a, b, false), InvalidArgument);

    PointMap c = random_points(rng, 1, 2, 2);
    c.mask[1] = 0;
    EXPECT_THROW(distill_loss(a, c, false), InvalidArgument);

    PointMap empty_a = a, empty_b = a;
    std::fill(empty_a.mask.begin(), empty_a.mask.end(), 0);
    std::fill(empty_b.mask.begin(), empty_b.mask.end(), 0);
    EXPECT_THROW(distill_loss(empty_a, empty_b, false), InvalidArgument);
}

TEST(DownsampleNearest, CeilDimsAndTopLeftSample) {
    std::mt19937_64 rng(13);
    const PointMap pm = random_points(rng, 1, 5, 7);
    const PointMap d2 = downsample_nearest(pm, 2);
    EXPECT_EQ(d2.height, 3);
    EXPECT_EQ(d2.width, 4);
    EXPECT_DOUBLE_EQ(d2.xyz[d2.site(0, 1, 1) * 3], pm.xyz[pm.site(0, 2, 2) * 3]);
    const PointMap d4 = downsample_nearest(pm, 4);
    EXPECT_EQ(d4.height, 2);
    EXPECT_EQ(d4.width, 2);
    EXPECT_DOUBLE_EQ(d4.xyz[d4.site(0, 1, 1) * 3 + 2], pm.xyz[pm.site(0, 4, 4) * 3 + 2]);
}

TEST(PointMapTensors, RoundtripThroughLumt) {
    std::mt19937_64 rng(14);
    PointMap pm = random_points(rng, 2, 3, 4);
    pm.mask[3] = 0;
    const TensorF xyz = point_map_to_tensor(pm);
    const TensorF mask = point_map_mask_to_tensor(pm);
    const PointMap back = point_map_from_tensors<double>(xyz, &mask);
    EXPECT_EQ(back.views, pm.views);
    EXPECT_EQ(back.mask, pm.mask);
    for (std::size_t i = 0; i < pm.xyz.size(); ++i) {
        EXPECT_NEAR(back.xyz[i], pm.xyz[i], 1e-6);
    }
}
