// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <lumos/camera.hpp>
#include <lumos/tensor.hpp>

namespace lumos {

/// Camera-frame depth per pixel; 0 flags an invalid pixel.
template <typename T>
struct DepthMap {
    int height = 0;
    int width = 0;
    std::vector<T> z;

    DepthMap() = default;
    DepthMap(int h, int w) : height(h), width(w), z(static_cast<std::size_t>(h) * w, T(0)) {}

    T& at(int y, int x) { return z[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int y, int x) const { return z[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-pixel 3D world coordinates for S views with a validity mask.
/// xyz is (S, H, W, 3) row-major; mask is (S, H, W), nonzero = valid.
/// Masked entries are excluded from every reduction.
template <typename T>
struct PointMapT {
    int views = 0;
    int height = 0;
    int width = 0;
    std::vector<T> xyz;
    std::vector<std::uint8_t> mask;

    PointMapT() = default;
    PointMapT(int s, int h, int w)
        : views(s), height(h), width(w),
          xyz(static_cast<std::size_t>(s) * h * w * 3, T(0)),
          mask(static_cast<std::size_t>(s) * h * w, 0) {}

    std::size_t site(int s, int y, int x) const {
        return (static_cast<std::size_t>(s) * height + y) * width + x;
    }
    bool same_shape(const PointMapT& o) const {
        return views == o.views && height == o.height && width == o.width;
    }
};

using PointMap = PointMapT<double>;

struct ProjectedPoint {
    double u = 0.0;
    double v = 0.0;
    double z_cam = 0.0;
};

/// Pinhole projection of a world point. Returns nullopt when the point lies
/// at or behind the camera (z_cam <= 1e-6); callers skip such points.
std::optional<ProjectedPoint> project(const Eigen::Vector3d& point_world,
                                      const CameraView& cam);

/// Back-project a depth map through the camera into world space. Pixel (x, y)
/// uses the ray through its center (x + 0.5, y + 0.5). Invalid depths (<= 0)
/// yield masked-out points.
template <typename T>
PointMapT<T> backproject(const DepthMap<T>& depth, const CameraView& cam);

/// Chain rule for backproject: accumulates dL/dz from dL/d(world point).
/// grad_points must be a single-view map shaped like backproject's output;
/// gradients land in grad_z (same H x W layout, masked pixels untouched).
template <typename T>
void backproject_backward(const PointMapT<T>& grad_points, const DepthMap<T>& depth,
                          const CameraView& cam, std::vector<T>& grad_z);

template <typename T>
struct DistillResult {
    double value = 0.0;
    std::vector<T> grad; // dL/d(student xyz), same layout as PointMapT::xyz
};

/// Mean over valid sites of the l1 norm of the student-teacher difference.
/// Normalized by the count of valid sites (not by 3x that count); a uniform
/// per-coordinate error eps therefore yields 3*eps. Gradient is
/// sign(student - teacher) / count, with subgradient 0 at ties.
template <typename T>
DistillResult<T> distill_loss(const PointMapT<T>& student, const PointMapT<T>& teacher,
                              bool with_grad = true);

/// Nearest-neighbor downsample by an integer factor (top-left sample per
/// cell), output dims are ceil(dim / factor). Matches how pyramid features
/// at coarser scales are paired with point maps.
template <typename T>
PointMapT<T> downsample_nearest(const PointMapT<T>& pm, int factor);

// LUMT bridging. xyz is stored as (S, H, W, 3); mask as (S, H, W) of 0/1.
template <typename T>
PointMapT<T> point_map_from_tensors(const TensorF& xyz, const TensorF* mask);
template <typename T>
TensorF point_map_to_tensor(const PointMapT<T>& pm);
template <typename T>
TensorF point_map_mask_to_tensor(const PointMapT<T>& pm);

template <typename T>
DepthMap<T> depth_map_from_tensor(const TensorF& t);
template <typename T>
TensorF depth_map_to_tensor(const DepthMap<T>& d);

} // namespace lumos
