// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/geometry.hpp>

#include <cmath>

namespace lumos {

std::optional<ProjectedPoint> project(const Eigen::Vector3d& point_world,
                                      const CameraView& cam) {
    if (!point_world.allFinite()) {
        throw InvalidArgument("project requires a finite point");
    }
    const Eigen::Vector3d p_cam =
        cam.rotation() * point_world + cam.translation();
    if (p_cam.z() <= 1e-6) {
        return std::nullopt;
    }
    ProjectedPoint out;
    out.u = cam.fx * p_cam.x() / p_cam.z() + cam.cx;
    out.v = cam.fy * p_cam.y() / p_cam.z() + cam.cy;
    out.z_cam = p_cam.z();
    return out;
}

template <typename T>
PointMapT<T> backproject(const DepthMap<T>& depth, const CameraView& cam) {
    if (depth.height != cam.height || depth.width != cam.width) {
        throw InvalidArgument("depth map dims do not match camera dims");
    }
    const Eigen::Matrix3d r_c2w = cam.rotation().transpose();
    const Eigen::Vector3d origin = cam.camera_center();

    PointMapT<T> pm(1, depth.height, depth.width);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const std::size_t site = pm.site(0, y, x);
            const double z = static_cast<double>(depth.at(y, x));
            if (!(z > 0.0)) {
                continue;
            }
            const double dx = (x + 0.5 - cam.cx) / cam.fx;
            const double dy = (y + 0.5 - cam.cy) / cam.fy;
            const Eigen::Vector3d p_world =
                r_c2w * Eigen::Vector3d(dx * z, dy * z, z) + origin;
            pm.xyz[site * 3 + 0] = static_cast<T>(p_world.x());
            pm.xyz[site * 3 + 1] = static_cast<T>(p_world.y());
            pm.xyz[site * 3 + 2] = static_cast<T>(p_world.z());
            pm.mask[site] = 1;
        }
    }
    return pm;
}

template <typename T>
void backproject_backward(const PointMapT<T>& grad_points, const DepthMap<T>& depth,
                          const CameraView& cam, std::vector<T>& grad_z) {
    if (grad_points.views != 1 || grad_points.height != depth.height ||
        grad_points.width != depth.width) {
        throw InvalidArgument("backproject_backward shape mismatch");
    }
    grad_z.assign(static_cast<std::size_t>(depth.height) * depth.width, T(0));
    const Eigen::Matrix3d r_c2w = cam.rotation().transpose();
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const std::size_t site = grad_points.site(0, y, x);
            if (!grad_points.mask[site] || !(static_cast<double>(depth.at(y, x)) > 0.0)) {
                continue;
            }
            const double dx = (x + 0.5 - cam.cx) / cam.fx;
            const double dy = (y + 0.5 - cam.cy) / cam.fy;
            // d(world point)/dz is constant along the pixel ray.
            const Eigen::Vector3d dp_dz = r_c2w * Eigen::Vector3d(dx, dy, 1.0);
            const double g = static_cast<double>(grad_points.xyz[site * 3 + 0]) * dp_dz.x() +
                             static_cast<double>(grad_points.xyz[site * 3 + 1]) * dp_dz.y() +
                             static_cast<double>(grad_points.xyz[site * 3 + 2]) * dp_dz.z();
            grad_z[site] = static_cast<T>(g);
        }
    }
}

template <typename T>
DistillResult<T> distill_loss(const PointMapT<T>& student, const PointMapT<T>& teacher,
                              bool with_grad) {
    if (!student.same_shape(teacher)) {
        throw InvalidArgument("distill_loss shape mismatch");
    }
    if (student.mask != teacher.mask) {
        throw InvalidArgument("distill_loss requires identical validity masks");
    }
    std::size_t count = 0;
    for (std::uint8_t m : student.mask) {
        count += m ? 1 : 0;
    }
    if (count == 0) {
        throw InvalidArgument("distill_loss has zero valid sites");
    }

    DistillResult<T> out;
    if (with_grad) {
        out.grad.assign(student.xyz.size(), T(0));
    }
    double acc = 0.0;
    const double inv_count = 1.0 / static_cast<double>(count);
    for (std::size_t site = 0; site < student.mask.size(); ++site) {
        if (!student.mask[site]) {
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            const double d = static_cast<double>(student.xyz[site * 3 + c]) -
                             static_cast<double>(teacher.xyz[site * 3 + c]);
            acc += std::abs(d);
            if (with_grad && d != 0.0) {
                out.grad[site * 3 + c] = static_cast<T>((d > 0.0 ? 1.0 : -1.0) * inv_count);
            }
        }
    }
    out.value = acc * inv_count;
    return out;
}

template <typename T>
PointMapT<T> downsample_nearest(const PointMapT<T>& pm, int factor) {
    if (factor < 1) {
        throw InvalidArgument("downsample factor must be >= 1");
    }
    if (factor == 1) {
        return pm;
    }
    const int h = (pm.height + factor - 1) / factor;
    const int w = (pm.width + factor - 1) / factor;
    PointMapT<T> out(pm.views, h, w);
    for (int s = 0; s < pm.views; ++s) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t src = pm.site(s, y * factor, x * factor);
                const std::size_t dst = out.site(s, y, x);
                out.mask[dst] = pm.mask[src];
                for (int c = 0; c < 3; ++c) {
                    out.xyz[dst * 3 + c] = pm.xyz[src * 3 + c];
                }
            }
        }
    }
    return out;
}

template <typename T>
PointMapT<T> point_map_from_tensors(const TensorF& xyz, const TensorF* mask) {
    if (xyz.rank() != 4 || xyz.dims[3] != 3) {
        throw InvalidArgument("point map tensor must be (S, H, W, 3)");
    }
    PointMapT<T> pm(static_cast<int>(xyz.dims[0]), static_cast<int>(xyz.dims[1]),
                    static_cast<int>(xyz.dims[2]));
    for (std::size_t i = 0; i < xyz.data.size(); ++i) {
        pm.xyz[i] = static_cast<T>(xyz.data[i]);
    }
    if (mask) {
        if (mask->rank() != 3 || mask->dims[0] != xyz.dims[0] || mask->dims[1] != xyz.dims[1] ||
            mask->dims[2] != xyz.dims[2]) {
            throw InvalidArgument("mask tensor must be (S, H, W) matching the point map");
        }
        for (std::size_t i = 0; i < mask->data.size(); ++i) {
            pm.mask[i] = mask->data[i] != 0.0f ? 1 : 0;
        }
    } else {
        std::fill(pm.mask.begin(), pm.mask.end(), 1);
    }
    return pm;
}

template <typename T>
TensorF point_map_to_tensor(const PointMapT<T>& pm) {
    TensorF t = TensorF::zeros({static_cast<std::size_t>(pm.views),
                                static_cast<std::size_t>(pm.height),
                                static_cast<std::size_t>(pm.width), 3});
    for (std::size_t i = 0; i < pm.xyz.size(); ++i) {
        t.data[i] = static_cast<float>(pm.xyz[i]);
    }
    return t;
}

template <typename T>
TensorF point_map_mask_to_tensor(const PointMapT<T>& pm) {
    TensorF t = TensorF::zeros({static_cast<std::size_t>(pm.views),
                                static_cast<std::size_t>(pm.height),
                                static_cast<std::size_t>(pm.width)});
    for (std::size_t i = 0; i < pm.mask.size(); ++i) {
        t.data[i] = pm.mask[i] ? 1.0f : 0.0f;
    }
    return t;
}

template <typename T>
DepthMap<T> depth_map_from_tensor(const TensorF& t) {
    if (t.rank() != 2) {
        throw InvalidArgument("depth tensor must be (H, W)");
    }
    DepthMap<T> d(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        d.z[i] = static_cast<T>(t.data[i]);
    }
    return d;
}

template <typename T>
TensorF depth_map_to_tensor(const DepthMap<T>& d) {
    TensorF t = TensorF::zeros(
        {static_cast<std::size_t>(d.height), static_cast<std::size_t>(d.width)});
    for (std::size_t i = 0; i < d.z.size(); ++i) {
        t.data[i] = static_cast<float>(d.z[i]);
    }
    return t;
}

template PointMapT<float> backproject(const DepthMap<float>&, const CameraView&);
template PointMapT<double> backproject(const DepthMap<double>&, const CameraView&);
template void backproject_backward(const PointMapT<float>&, const DepthMap<float>&,
                                   const CameraView&, std::vector<float>&);
template void backproject_backward(const PointMapT<double>&, const DepthMap<double>&,
                                   const CameraView&, std::vector<double>&);
template DistillResult<float> distill_loss(const PointMapT<float>&, const PointMapT<float>&,
                                           bool);
template DistillResult<double> distill_loss(const PointMapT<double>&, const PointMapT<double>&,
                                            bool);
template PointMapT<float> downsample_nearest(const PointMapT<float>&, int);
template PointMapT<double> downsample_nearest(const PointMapT<double>&, int);
template PointMapT<float> point_map_from_tensors<float>(const TensorF&, const TensorF*);
template PointMapT<double> point_map_from_tensors<double>(const TensorF&, const TensorF*);
template TensorF point_map_to_tensor(const PointMapT<float>&);
template TensorF point_map_to_tensor(const PointMapT<double>&);
template TensorF point_map_mask_to_tensor(const PointMapT<float>&);
template TensorF point_map_mask_to_tensor(const PointMapT<double>&);
template DepthMap<float> depth_map_from_tensor<float>(const TensorF&);
template DepthMap<double> depth_map_from_tensor<double>(const TensorF&);
template TensorF depth_map_to_tensor(const DepthMap<float>&);
template TensorF depth_map_to_tensor(const DepthMap<double>&);

} // namespace lumos
