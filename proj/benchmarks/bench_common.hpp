// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include <lumos/camera.hpp>
#include <lumos/scene.hpp>

namespace lumos::bench {

inline double urand(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline CameraView bench_camera(int size) {
    CameraView cam;
    cam.width = size;
    cam.height = size;
    cam.fx = 0.9 * size;
    cam.fy = 0.9 * size;
    cam.cx = 0.5 * size;
    cam.cy = 0.5 * size;
    cam.w2c = Eigen::Matrix4d::Identity();
    return cam;
}

inline GaussianScene bench_scene(int n, int degree, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    GaussianScene scene;
    scene.sh_degree = degree;
    const int k = scene.sh_coeff_count();
    scene.primitives.resize(static_cast<std::size_t>(n));
    for (GaussianPrimitive& g : scene.primitives) {
        g.center = Eigen::Vector3d(urand(rng, -1, 1), urand(rng, -1, 1), urand(rng, 2, 5));
        g.opacity = urand(rng, 0.2, 0.9);
        Eigen::Vector4d q(urand(rng, -1, 1), urand(rng, -1, 1), urand(rng, -1, 1),
                          urand(rng, -1, 1));
        g.rotation = q.normalized();
        g.scale = Eigen::Vector3d(urand(rng, 0.03, 0.15), urand(rng, 0.03, 0.15),
                                  urand(rng, 0.03, 0.15));
        g.sh.assign(3u * static_cast<std::size_t>(k), 0.0);
        for (std::size_t i = 0; i < g.sh.size(); ++i) {
            g.sh[i] = urand(rng, -0.2, 0.2);
        }
    }
    return scene;
}

} // namespace lumos::bench
