// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/synth.hpp>

#include <cmath>
#include <random>

namespace lumos {

void SynthConfig::validate() const {
    if (n_primitives < 1) {
        throw InvalidArgument("n_primitives must be >= 1");
    }
    if (width < 16 || height < 16) {
        throw InvalidArgument("fixture images must be at least 16x16");
    }
    if (sh_degree < 0 || sh_degree > 3) {
        throw InvalidArgument("sh_degree must be in [0, 3]");
    }
    if (!((bbox_max - bbox_min).minCoeff() > 0.0)) {
        throw InvalidArgument("bbox must have positive extent on every axis");
    }
}

Eigen::Matrix4d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up) {
    const Eigen::Vector3d fwd = (target - eye).normalized();
    Eigen::Vector3d right = fwd.cross(up);
    if (right.norm() < 1e-9) {
        right = fwd.cross(Eigen::Vector3d(1, 0, 0)); // gaze parallel to up
    }
    right.normalize();
    const Eigen::Vector3d down = fwd.cross(right);

    Eigen::Matrix4d w2c = Eigen::Matrix4d::Identity();
    w2c.block<1, 3>(0, 0) = right.transpose();
    w2c.block<1, 3>(1, 0) = down.transpose();
    w2c.block<1, 3>(2, 0) = fwd.transpose();
    w2c.topRightCorner<3, 1>() = -w2c.topLeftCorner<3, 3>() * eye;
    return w2c;
}

SynthScene gen_scene(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const Eigen::Vector3d extent = cfg.bbox_max - cfg.bbox_min;
    const double diag = extent.norm();
    const Eigen::Vector3d centroid = 0.5 * (cfg.bbox_min + cfg.bbox_max);

    SynthScene out;
    out.scene.sh_degree = cfg.sh_degree;
    const int k = out.scene.sh_coeff_count();
    out.scene.primitives.resize(static_cast<std::size_t>(cfg.n_primitives));

    // Draw order per primitive is fixed: center, opacity, rotation, scale,
    // then SH coefficients, so a seed pins the whole scene.
    for (GaussianPrimitive& g : out.scene.primitives) {
        for (int a = 0; a < 3; ++a) {
            const double margin = 0.1 * extent[a];
            g.center[a] = uniform(cfg.bbox_min[a] + margin, cfg.bbox_max[a] - margin);
        }
        g.opacity = uniform(0.3, 0.95);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        if (q.norm() < 1e-9) {
            q = Eigen::Vector4d(1, 0, 0, 0);
        }
        g.rotation = q / q.norm();
        for (int a = 0; a < 3; ++a) {
            g.scale[a] = diag * std::exp(uniform(std::log(0.012), std::log(0.04)));
        }
        g.sh.assign(3u * static_cast<std::size_t>(k), 0.0);
        for (int c = 0; c < 3; ++c) {
            g.sh[static_cast<std::size_t>(c) * k] = uniform(-1.4, 1.4);
            for (int j = 1; j < k; ++j) {
                g.sh[static_cast<std::size_t>(c) * k + j] = uniform(-0.15, 0.15);
            }
        }
    }
    out.scene.validate();

    const int views = std::clamp(cfg.views, 4, 8);
    const double radius = 1.6 * 0.5 * diag;
    const double fov = 55.0 * M_PI / 180.0;
    const double fx = 0.5 * cfg.width / std::tan(0.5 * fov);
    for (int i = 0; i < views; ++i) {
        const double theta = 2.0 * M_PI * i / views + 0.3;
        const Eigen::Vector3d eye =
            centroid + Eigen::Vector3d(radius * std::cos(theta), 0.45 * radius,
                                       radius * std::sin(theta));
        CameraView cam;
        cam.width = cfg.width;
        cam.height = cfg.height;
        cam.fx = fx;
        cam.fy = fx;
        cam.cx = 0.5 * cfg.width;
        cam.cy = 0.5 * cfg.height;
        cam.w2c = look_at(eye, centroid);
        cam.validate();
        out.cameras.push_back(cam);
    }
    return out;
}

} // namespace lumos
