// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include <lumos/errors.hpp>

namespace lumos {

/// One anisotropic 3D Gaussian with opacity and view-dependent SH color.
/// Spherical-harmonic coefficients are stored channel-major:
/// sh[c * K + k] for channel c in {0,1,2} and basis index k in [0, K),
/// K = (degree + 1)^2. sh[c * K + 0] is the DC coefficient.
struct GaussianPrimitive {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double opacity = 1.0;
    Eigen::Vector4d rotation = Eigen::Vector4d(1, 0, 0, 0); // unit quaternion (w,x,y,z)
    Eigen::Vector3d scale = Eigen::Vector3d::Ones();        // stddevs, > 0
    std::vector<double> sh;
};

struct GaussianScene {
    int sh_degree = 0; // in [0, 3]
    std::vector<GaussianPrimitive> primitives;

    int sh_coeff_count() const { return (sh_degree + 1) * (sh_degree + 1); }
    std::size_t size() const { return primitives.size(); }

    // Checks |rotation| = 1 within 1e-6, scale > 0, opacity in [0,1], SH
    // lengths matching sh_degree, and finiteness. Throws InvalidArgument.
    void validate() const;
};

// Binary little-endian splat PLY. Per-vertex properties, in order:
// x,y,z, opacity (pre-sigmoid logit), scale_0..2 (log), rot_0..3 (w,x,y,z),
// f_dc_0..2, f_rest_* (channel-major, 3*(K-1) entries). Readers match
// properties by name, so reordered layouts from other writers also load.
void ply_write(const GaussianScene& scene, const std::filesystem::path& path);
GaussianScene ply_read(const std::filesystem::path& path);

} // namespace lumos
