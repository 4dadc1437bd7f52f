// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include <lumos/errors.hpp>

namespace lumos {

/// Pinhole camera with a rigid world-to-camera transform.
/// Convention: +x right, +y down, +z forward (points in front of the camera
/// have positive z in camera frame).
struct CameraView {
    int width = 0;
    int height = 0;
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    Eigen::Matrix4d w2c = Eigen::Matrix4d::Identity();

    Eigen::Matrix3d rotation() const { return w2c.topLeftCorner<3, 3>(); }
    Eigen::Vector3d translation() const { return w2c.topRightCorner<3, 1>(); }
    Eigen::Vector3d camera_center() const {
        return -rotation().transpose() * translation();
    }

    // Throws InvalidArgument on non-positive focal lengths, degenerate sizes,
    // or a rotation block that is not orthonormal (1e-5) with det +1.
    void validate() const;
};

std::vector<CameraView> cameras_load(const std::filesystem::path& path);
void cameras_save(const std::vector<CameraView>& cams, const std::filesystem::path& path);

} // namespace lumos
