// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <lumos/camera.hpp>
#include <lumos/scene.hpp>

namespace lumos {

/// Deterministic random-scene fixture: primitives inside a box, cameras on a
/// ring looking at the box centroid. Stands in for external capture data in
/// end-to-end tests.
struct SynthConfig {
    std::uint64_t seed = 0;
    int n_primitives = 300;
    int views = 6; // clamped to [4, 8]
    int width = 128;
    int height = 128;
    Eigen::Vector3d bbox_min = Eigen::Vector3d(-1, -1, -1);
    Eigen::Vector3d bbox_max = Eigen::Vector3d(1, 1, 1);
    int sh_degree = 1;

    void validate() const;
};

struct SynthScene {
    GaussianScene scene;
    std::vector<CameraView> cameras;
};

SynthScene gen_scene(const SynthConfig& cfg);

/// Rigid look-at pose in the +x right / +y down / +z forward convention.
Eigen::Matrix4d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up = Eigen::Vector3d(0, 1, 0));

} // namespace lumos
