// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include <lumos/camera.hpp>
#include <lumos/image.hpp>
#include <lumos/scene.hpp>

namespace lumos {

struct RenderOptions {
    Eigen::Vector3d background = Eigen::Vector3d::Zero(); // RGB in [0,1]
    double near_clip = 0.01;
    double far_clip = 1e4;
    double lowpass = 0.3;                  // screen-space dilation added to cov2d (px^2)
    double alpha_cutoff = 1.0 / 255.0;     // minimum per-splat alpha contribution
    double transmittance_floor = 1e-4;     // early stop once T drops below this

    /// Settings for gradient oracles: no alpha cutoff and no early stop, so
    /// the rendered function has no truncation discontinuities at the scale
    /// finite differences can see.
    static RenderOptions oracle() {
        RenderOptions o;
        o.alpha_cutoff = 0.0;
        o.transmittance_floor = 0.0;
        return o;
    }

    void validate() const;
};

// Expected-depth normalization floor: depth = sum(z a T) / max(alpha, this).
inline constexpr double kDepthEps = 1e-8;

template <typename T>
struct RenderOutput {
    Image<T> rgb;   // (H, W, 3) linear light, composited over the background
    Image<T> depth; // (H, W, 1) alpha-weighted expected camera depth
    Image<T> alpha; // (H, W, 1) accumulated opacity in [0, 1]
};

/// Per-primitive parameter gradients, shape-matched to the scene.
/// Rotation gradients live in the tangent space of the unit quaternion.
template <typename T>
struct SceneGrad {
    std::vector<T> center;   // N x 3
    std::vector<T> opacity;  // N
    std::vector<T> rotation; // N x 4
    std::vector<T> scale;    // N x 3
    std::vector<T> sh;       // N x 3K, channel-major per primitive

    void resize_like(const GaussianScene& scene);
    void set_zero();
    void accumulate(const SceneGrad& other); // fixed-order elementwise add
    bool all_finite() const;
};

template <typename T>
struct ProjectedGaussian {
    T mean2d[2];  // pixel coordinates of the projected center
    T cov2d[3];   // (xx, xy, yy), lowpass already added
    T z_cam;
};

/// EWA projection of one primitive into screen space. Returns nullopt when
/// the center depth falls outside [near_clip, far_clip].
template <typename T>
std::optional<ProjectedGaussian<T>> project_gaussian(const GaussianPrimitive& g,
                                                     const CameraView& cam,
                                                     const RenderOptions& opts);

/// Front-to-back alpha compositing of the scene (depth sort, ties broken by
/// primitive index). Deterministic for fixed inputs and thread budget.
template <typename T>
RenderOutput<T> render(const GaussianScene& scene, const CameraView& cam,
                       const RenderOptions& opts);

/// Upstream cotangents for render_backward; null members mean zero.
template <typename T>
struct RenderUpstream {
    const Image<T>* rgb = nullptr;   // (H, W, 3)
    const Image<T>* depth = nullptr; // (H, W, 1)
    const Image<T>* alpha = nullptr; // (H, W, 1)
};

/// Exact reverse-mode gradients of render with respect to every primitive
/// field. Replays the forward compositing decisions (cutoffs, clamps, early
/// stop) so the gradient matches the function actually rendered.
template <typename T>
SceneGrad<T> render_backward(const GaussianScene& scene, const CameraView& cam,
                             const RenderOptions& opts, const RenderUpstream<T>& upstream);

} // namespace lumos
