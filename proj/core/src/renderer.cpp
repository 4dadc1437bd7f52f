// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/renderer.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <lumos/parallel.hpp>
#include <lumos/sh.hpp>

namespace lumos {

namespace {

constexpr int kTile = 16;
constexpr double kAlphaTiny = 1e-12; // footprint floor used for bounding boxes
constexpr double kAlphaClamp = 0.999;

template <typename T>
struct CamConsts {
    T w2c_r[3][3];
    T w2c_t[3];
    T fx, fy, cx, cy;
    T campos[3];

    static CamConsts from(const CameraView& cam) {
        CamConsts cc;
        const Eigen::Matrix3d r = cam.rotation();
        const Eigen::Vector3d t = cam.translation();
        const Eigen::Vector3d o = cam.camera_center();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                cc.w2c_r[i][j] = static_cast<T>(r(i, j));
            }
            cc.w2c_t[i] = static_cast<T>(t(i));
            cc.campos[i] = static_cast<T>(o(i));
        }
        cc.fx = static_cast<T>(cam.fx);
        cc.fy = static_cast<T>(cam.fy);
        cc.cx = static_cast<T>(cam.cx);
        cc.cy = static_cast<T>(cam.cy);
        return cc;
    }
};

template <typename T>
struct PreparedSplat {
    int prim = 0;
    T z = T(0);
    T u = T(0), v = T(0);
    T cov2d[3] = {T(0), T(0), T(0)};  // xx, xy, yy (lowpass included)
    T conic[3] = {T(0), T(0), T(0)};  // inverse covariance, same layout
    T opacity = T(0);
    T color[3] = {T(0), T(0), T(0)};     // clamped SH color
    T raw_color[3] = {T(0), T(0), T(0)}; // before the clamp at 0
    T p_cam[3] = {T(0), T(0), T(0)};
    T dir[3] = {T(0), T(0), T(0)}; // unit view direction, world frame
    T dir_len = T(0);
    T qn[4] = {T(1), T(0), T(0), T(0)}; // normalized quaternion (w,x,y,z)
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0; // half-open pixel bounds
};

template <typename T>
void quat_to_rotmat(const T q[4], T r[3][3]) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    r[0][0] = T(1) - T(2) * (y * y + z * z);
    r[0][1] = T(2) * (x * y - w * z);
    r[0][2] = T(2) * (x * z + w * y);
    r[1][0] = T(2) * (x * y + w * z);
    r[1][1] = T(1) - T(2) * (x * x + z * z);
    r[1][2] = T(2) * (y * z - w * x);
    r[2][0] = T(2) * (x * z - w * y);
    r[2][1] = T(2) * (y * z + w * x);
    r[2][2] = T(1) - T(2) * (x * x + y * y);
}

// World covariance in camera frame: Vc = W (R S S R^T) W^T, with
// A = R diag(scale) evaluated on the fly.
template <typename T>
void camera_covariance(const CamConsts<T>& cc, const T rot[3][3], const T scale[3],
                       T vc[3][3]) {
    T a[3][3]; // R * diag(s)
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            a[i][j] = rot[i][j] * scale[j];
        }
    }
    T sigma[3][3]; // A * A^T
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            sigma[i][j] = a[i][0] * a[j][0] + a[i][1] * a[j][1] + a[i][2] * a[j][2];
        }
    }
    T ws[3][3]; // W * Sigma
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            ws[i][j] = cc.w2c_r[i][0] * sigma[0][j] + cc.w2c_r[i][1] * sigma[1][j] +
                       cc.w2c_r[i][2] * sigma[2][j];
        }
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            vc[i][j] = ws[i][0] * cc.w2c_r[j][0] + ws[i][1] * cc.w2c_r[j][1] +
                       ws[i][2] * cc.w2c_r[j][2];
        }
    }
}

template <typename T>
bool prepare_splat(const GaussianPrimitive& g, int prim_index, int degree,
                   const CamConsts<T>& cc, const RenderOptions& opts, int width, int height,
                   PreparedSplat<T>& out) {
    out.prim = prim_index;

    // Normalized quaternion; the raw parameter may drift off the sphere
    // during optimization, the renderer always consumes the normalized one.
    T q[4] = {static_cast<T>(g.rotation[0]), static_cast<T>(g.rotation[1]),
              static_cast<T>(g.rotation[2]), static_cast<T>(g.rotation[3])};
    const T qlen = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (!(qlen > T(0))) {
        return false;
    }
    for (int i = 0; i < 4; ++i) {
        out.qn[i] = q[i] / qlen;
    }

    const T p_w[3] = {static_cast<T>(g.center.x()), static_cast<T>(g.center.y()),
                      static_cast<T>(g.center.z())};
    for (int i = 0; i < 3; ++i) {
        out.p_cam[i] = cc.w2c_r[i][0] * p_w[0] + cc.w2c_r[i][1] * p_w[1] +
                       cc.w2c_r[i][2] * p_w[2] + cc.w2c_t[i];
    }
    const T z = out.p_cam[2];
    if (!(z >= static_cast<T>(opts.near_clip)) || !(z <= static_cast<T>(opts.far_clip))) {
        return false;
    }
    out.z = z;
    out.u = cc.fx * out.p_cam[0] / z + cc.cx;
    out.v = cc.fy * out.p_cam[1] / z + cc.cy;

    T rot[3][3];
    quat_to_rotmat(out.qn, rot);
    const T scale[3] = {static_cast<T>(g.scale[0]), static_cast<T>(g.scale[1]),
                        static_cast<T>(g.scale[2])};
    T vc[3][3];
    camera_covariance(cc, rot, scale, vc);

    // J is the 2x3 perspective Jacobian at the splat center.
    const T j00 = cc.fx / z;
    const T j02 = -cc.fx * out.p_cam[0] / (z * z);
    const T j11 = cc.fy / z;
    const T j12 = -cc.fy * out.p_cam[1] / (z * z);

    const T cxx = j00 * (j00 * vc[0][0] + j02 * vc[2][0]) +
                  j02 * (j00 * vc[0][2] + j02 * vc[2][2]) + static_cast<T>(opts.lowpass);
    const T cxy = j00 * (j11 * vc[0][1] + j12 * vc[0][2]) +
                  j02 * (j11 * vc[2][1] + j12 * vc[2][2]);
    const T cyy = j11 * (j11 * vc[1][1] + j12 * vc[2][1]) +
                  j12 * (j11 * vc[1][2] + j12 * vc[2][2]) + static_cast<T>(opts.lowpass);
    out.cov2d[0] = cxx;
    out.cov2d[1] = cxy;
    out.cov2d[2] = cyy;

    const T det = cxx * cyy - cxy * cxy;
    if (!(det > T(0))) {
        return false;
    }
    out.conic[0] = cyy / det;
    out.conic[1] = -cxy / det;
    out.conic[2] = cxx / det;

    out.opacity = static_cast<T>(g.opacity);
    const T alpha_floor =
        static_cast<T>(std::max(opts.alpha_cutoff, kAlphaTiny));
    if (!(out.opacity > alpha_floor)) {
        return false;
    }

    // View direction from the camera center to the primitive center.
    T d[3] = {p_w[0] - cc.campos[0], p_w[1] - cc.campos[1], p_w[2] - cc.campos[2]};
    const T dlen = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (!(dlen > T(0))) {
        return false;
    }
    out.dir_len = dlen;
    for (int i = 0; i < 3; ++i) {
        out.dir[i] = d[i] / dlen;
    }
    T basis[kMaxShCoeffs];
    sh_basis(degree, std::array<T, 3>{out.dir[0], out.dir[1], out.dir[2]}, basis);
    const int k = (degree + 1) * (degree + 1);
    for (int c = 0; c < 3; ++c) {
        T acc = T(0);
        for (int i = 0; i < k; ++i) {
            acc += basis[i] * static_cast<T>(g.sh[static_cast<std::size_t>(c) * k + i]);
        }
        out.raw_color[c] = acc + T(0.5);
        out.color[c] = std::max(out.raw_color[c], T(0));
    }

    // Screen footprint: radius where the splat alpha falls to the floor.
    const T r_maha = std::sqrt(T(2) * std::log(out.opacity / alpha_floor));
    const T mid = (cxx + cyy) / T(2);
    const T diff = (cxx - cyy) / T(2);
    const T lambda_max = mid + std::sqrt(diff * diff + cxy * cxy);
    const T r_px = r_maha * std::sqrt(std::max(lambda_max, T(0)));

    const double ud = static_cast<double>(out.u);
    const double vd = static_cast<double>(out.v);
    const double rd = static_cast<double>(r_px);
    const double lo_x = std::max(0.0, std::floor(ud - rd - 0.5));
    const double hi_x = std::min(static_cast<double>(width), std::floor(ud + rd - 0.5) + 1.0);
    const double lo_y = std::max(0.0, std::floor(vd - rd - 0.5));
    const double hi_y = std::min(static_cast<double>(height), std::floor(vd + rd - 0.5) + 1.0);
    if (!(hi_x > lo_x) || !(hi_y > lo_y)) {
        return false;
    }
    out.x0 = static_cast<int>(lo_x);
    out.x1 = static_cast<int>(hi_x);
    out.y0 = static_cast<int>(lo_y);
    out.y1 = static_cast<int>(hi_y);
    return true;
}

// The renderer normalizes quaternions itself, so unlike the strict scene
// contract this only insists on finite fields and matching SH layouts.
// Off-sphere rotation parameters stay renderable, which keeps the function
// probeable by finite differences.
inline void validate_for_render(const GaussianScene& scene) {
    if (scene.sh_degree < 0 || scene.sh_degree > 3) {
        throw InvalidArgument("sh_degree must be in [0, 3]");
    }
    const std::size_t expected_sh = 3u * static_cast<std::size_t>(scene.sh_coeff_count());
    for (const GaussianPrimitive& g : scene.primitives) {
        if (!g.center.allFinite() || !g.rotation.allFinite() || !g.scale.allFinite() ||
            !std::isfinite(g.opacity)) {
            throw InvalidArgument("non-finite primitive field");
        }
        if (g.opacity < 0.0 || g.opacity > 1.0) {
            throw InvalidArgument("opacity must be in [0, 1]");
        }
        if (g.sh.size() != expected_sh) {
            throw InvalidArgument("sh coefficient count does not match sh_degree");
        }
    }
}

template <typename T>
struct PreparedScene {
    std::vector<PreparedSplat<T>> splats; // front-to-back
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<int>> tile_lists;
    CamConsts<T> cc;
};

template <typename T>
PreparedScene<T> prepare_scene(const GaussianScene& scene, const CameraView& cam,
                               const RenderOptions& opts) {
    opts.validate();
    cam.validate();
    PreparedScene<T> ps;
    ps.cc = CamConsts<T>::from(cam);
    ps.splats.reserve(scene.primitives.size());
    PreparedSplat<T> tmp;
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        if (prepare_splat(scene.primitives[i], static_cast<int>(i), scene.sh_degree, ps.cc,
                          opts, cam.width, cam.height, tmp)) {
            ps.splats.push_back(tmp);
        }
    }
    std::sort(ps.splats.begin(), ps.splats.end(),
              [](const PreparedSplat<T>& a, const PreparedSplat<T>& b) {
                  if (a.z != b.z) {
                      return a.z < b.z;
                  }
                  return a.prim < b.prim;
              });

    ps.tiles_x = (cam.width + kTile - 1) / kTile;
    ps.tiles_y = (cam.height + kTile - 1) / kTile;
    ps.tile_lists.assign(static_cast<std::size_t>(ps.tiles_x) * ps.tiles_y, {});
    for (std::size_t si = 0; si < ps.splats.size(); ++si) {
        const PreparedSplat<T>& s = ps.splats[si];
        const int tx0 = s.x0 / kTile;
        const int tx1 = (s.x1 - 1) / kTile;
        const int ty0 = s.y0 / kTile;
        const int ty1 = (s.y1 - 1) / kTile;
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                ps.tile_lists[static_cast<std::size_t>(ty) * ps.tiles_x + tx].push_back(
                    static_cast<int>(si));
            }
        }
    }
    return ps;
}

} // namespace

void RenderOptions::validate() const {
    if (!(near_clip > 0.0) || !(near_clip < far_clip)) {
        throw InvalidArgument("render clips must satisfy 0 < near < far");
    }
    if (lowpass < 0.0) {
        throw InvalidArgument("lowpass must be non-negative");
    }
    if (alpha_cutoff < 0.0 || transmittance_floor < 0.0) {
        throw InvalidArgument("alpha_cutoff and transmittance_floor must be non-negative");
    }
    for (int i = 0; i < 3; ++i) {
        if (!(background[i] >= 0.0) || !(background[i] <= 1.0)) {
            throw InvalidArgument("background must be RGB in [0, 1]");
        }
    }
}

template <typename T>
void SceneGrad<T>::resize_like(const GaussianScene& scene) {
    const std::size_t n = scene.primitives.size();
    const std::size_t k = static_cast<std::size_t>(scene.sh_coeff_count());
    center.assign(n * 3, T(0));
    opacity.assign(n, T(0));
    rotation.assign(n * 4, T(0));
    scale.assign(n * 3, T(0));
    sh.assign(n * 3 * k, T(0));
}

template <typename T>
void SceneGrad<T>::set_zero() {
    std::fill(center.begin(), center.end(), T(0));
    std::fill(opacity.begin(), opacity.end(), T(0));
    std::fill(rotation.begin(), rotation.end(), T(0));
    std::fill(scale.begin(), scale.end(), T(0));
    std::fill(sh.begin(), sh.end(), T(0));
}

template <typename T>
void SceneGrad<T>::accumulate(const SceneGrad<T>& other) {
    auto add = [](std::vector<T>& dst, const std::vector<T>& src) {
        if (dst.size() != src.size()) {
            throw InvalidArgument("SceneGrad accumulate shape mismatch");
        }
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += src[i];
        }
    };
    add(center, other.center);
    add(opacity, other.opacity);
    add(rotation, other.rotation);
    add(scale, other.scale);
    add(sh, other.sh);
}

template <typename T>
bool SceneGrad<T>::all_finite() const {
    auto ok = [](const std::vector<T>& v) {
        for (T x : v) {
            if (!std::isfinite(static_cast<double>(x))) {
                return false;
            }
        }
        return true;
    };
    return ok(center) && ok(opacity) && ok(rotation) && ok(scale) && ok(sh);
}

template <typename T>
std::optional<ProjectedGaussian<T>> project_gaussian(const GaussianPrimitive& g,
                                                     const CameraView& cam,
                                                     const RenderOptions& opts) {
    opts.validate();
    const CamConsts<T> cc = CamConsts<T>::from(cam);
    // Only the depth clip applies to the bare projection query; footprint
    // and opacity culling belong to rasterization.
    T q[4] = {static_cast<T>(g.rotation[0]), static_cast<T>(g.rotation[1]),
              static_cast<T>(g.rotation[2]), static_cast<T>(g.rotation[3])};
    const T qlen = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (!(qlen > T(0))) {
        throw InvalidArgument("degenerate quaternion");
    }
    for (int i = 0; i < 4; ++i) {
        q[i] /= qlen;
    }
    const T p_w[3] = {static_cast<T>(g.center.x()), static_cast<T>(g.center.y()),
                      static_cast<T>(g.center.z())};
    T p_cam[3];
    for (int i = 0; i < 3; ++i) {
        p_cam[i] = cc.w2c_r[i][0] * p_w[0] + cc.w2c_r[i][1] * p_w[1] +
                   cc.w2c_r[i][2] * p_w[2] + cc.w2c_t[i];
    }
    const T z = p_cam[2];
    if (!(z >= static_cast<T>(opts.near_clip)) || !(z <= static_cast<T>(opts.far_clip))) {
        return std::nullopt;
    }
    T rot[3][3];
    quat_to_rotmat(q, rot);
    const T scale[3] = {static_cast<T>(g.scale[0]), static_cast<T>(g.scale[1]),
                        static_cast<T>(g.scale[2])};
    T vc[3][3];
    camera_covariance(cc, rot, scale, vc);
    const T j00 = cc.fx / z;
    const T j02 = -cc.fx * p_cam[0] / (z * z);
    const T j11 = cc.fy / z;
    const T j12 = -cc.fy * p_cam[1] / (z * z);
    ProjectedGaussian<T> out;
    out.mean2d[0] = cc.fx * p_cam[0] / z + cc.cx;
    out.mean2d[1] = cc.fy * p_cam[1] / z + cc.cy;
    out.cov2d[0] = j00 * (j00 * vc[0][0] + j02 * vc[2][0]) +
                   j02 * (j00 * vc[0][2] + j02 * vc[2][2]) + static_cast<T>(opts.lowpass);
    out.cov2d[1] = j00 * (j11 * vc[0][1] + j12 * vc[0][2]) +
                   j02 * (j11 * vc[2][1] + j12 * vc[2][2]);
    out.cov2d[2] = j11 * (j11 * vc[1][1] + j12 * vc[2][1]) +
                   j12 * (j11 * vc[1][2] + j12 * vc[2][2]) + static_cast<T>(opts.lowpass);
    out.z_cam = z;
    return out;
}

template <typename T>
RenderOutput<T> render(const GaussianScene& scene, const CameraView& cam,
                       const RenderOptions& opts) {
    validate_for_render(scene);
    const PreparedScene<T> ps = prepare_scene<T>(scene, cam, opts);
    const int width = cam.width;
    const int height = cam.height;

    RenderOutput<T> out;
    out.rgb = Image<T>(height, width, 3);
    out.depth = Image<T>(height, width, 1);
    out.alpha = Image<T>(height, width, 1);

    const T bg[3] = {static_cast<T>(opts.background[0]), static_cast<T>(opts.background[1]),
                     static_cast<T>(opts.background[2])};
    const T cutoff = static_cast<T>(opts.alpha_cutoff);
    const T floor_t = static_cast<T>(opts.transmittance_floor);
    const T depth_eps = static_cast<T>(kDepthEps);

    parallel_for_chunks(static_cast<std::size_t>(height), [&](std::size_t y_begin,
                                                              std::size_t y_end, int) {
        for (std::size_t y = y_begin; y < y_end; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t tile =
                    (y / kTile) * static_cast<std::size_t>(ps.tiles_x) + (x / kTile);
                const std::vector<int>& list = ps.tile_lists[tile];
                T transmittance = T(1);
                T acc[3] = {T(0), T(0), T(0)};
                T alpha_sum = T(0);
                T depth_sum = T(0);
                for (int si : list) {
                    const PreparedSplat<T>& s = ps.splats[si];
                    if (x < s.x0 || x >= s.x1 || static_cast<int>(y) < s.y0 ||
                        static_cast<int>(y) >= s.y1) {
                        continue;
                    }
                    const T dx = static_cast<T>(x) + T(0.5) - s.u;
                    const T dy = static_cast<T>(y) + T(0.5) - s.v;
                    const T sigma = T(0.5) * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) +
                                    s.conic[1] * dx * dy;
                    if (!(sigma >= T(0))) {
                        continue;
                    }
                    T a = s.opacity * std::exp(-sigma);
                    if (a < cutoff) {
                        continue;
                    }
                    a = std::min(a, T(kAlphaClamp));
                    const T w = a * transmittance;
                    acc[0] += s.color[0] * w;
                    acc[1] += s.color[1] * w;
                    acc[2] += s.color[2] * w;
                    alpha_sum += w;
                    depth_sum += s.z * w;
                    transmittance *= (T(1) - a);
                    if (transmittance < floor_t) {
                        break;
                    }
                }
                for (int c = 0; c < 3; ++c) {
                    out.rgb.at(static_cast<int>(y), x, c) = acc[c] + transmittance * bg[c];
                }
                out.alpha.at(static_cast<int>(y), x, 0) = alpha_sum;
                out.depth.at(static_cast<int>(y), x, 0) =
                    depth_sum / std::max(alpha_sum, depth_eps);
            }
        }
    });
    return out;
}

namespace {

// Slots in the per-splat screen-space gradient accumulator.
enum ScreenGradSlot {
    kGu = 0,
    kGv,
    kGcXX, // conic entries
    kGcXY,
    kGcYY,
    kGr,
    kGg,
    kGb,
    kGo,
    kGz,
    kScreenGradStride,
};

struct Contribution {
    int si;
    double alpha;
    double transmittance; // at entry
};

} // namespace

template <typename T>
SceneGrad<T> render_backward(const GaussianScene& scene, const CameraView& cam,
                             const RenderOptions& opts, const RenderUpstream<T>& upstream) {
    validate_for_render(scene);
    const int width = cam.width;
    const int height = cam.height;
    auto check_img = [&](const Image<T>* img, int channels, const char* name) {
        if (img && (img->height != height || img->width != width || img->channels != channels)) {
            throw InvalidArgument(std::string("upstream ") + name + " dims mismatch");
        }
    };
    check_img(upstream.rgb, 3, "rgb");
    check_img(upstream.depth, 1, "depth");
    check_img(upstream.alpha, 1, "alpha");

    const PreparedScene<T> ps = prepare_scene<T>(scene, cam, opts);
    const std::size_t n_vis = ps.splats.size();

    SceneGrad<T> grads;
    grads.resize_like(scene);
    if (n_vis == 0) {
        return grads;
    }

    const T bg[3] = {static_cast<T>(opts.background[0]), static_cast<T>(opts.background[1]),
                     static_cast<T>(opts.background[2])};
    const T cutoff = static_cast<T>(opts.alpha_cutoff);
    const T floor_t = static_cast<T>(opts.transmittance_floor);

    // Per-chunk accumulation of screen-space gradients, reduced in chunk
    // order afterwards so the result is deterministic for a fixed thread
    // budget.
    const int nchunks = plan_chunks(static_cast<std::size_t>(height));
    std::vector<std::vector<double>> chunk_grads(
        static_cast<std::size_t>(nchunks),
        std::vector<double>(n_vis * kScreenGradStride, 0.0));

    parallel_for_chunks(static_cast<std::size_t>(height), [&](std::size_t y_begin,
                                                              std::size_t y_end, int chunk) {
        std::vector<double>& sg = chunk_grads[static_cast<std::size_t>(chunk)];
        std::vector<Contribution> contribs;
        contribs.reserve(64);
        for (std::size_t y = y_begin; y < y_end; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t tile =
                    (y / kTile) * static_cast<std::size_t>(ps.tiles_x) + (x / kTile);
                const std::vector<int>& list = ps.tile_lists[tile];

                // Replay of the forward pixel loop, recording contributions.
                contribs.clear();
                T transmittance = T(1);
                T alpha_sum = T(0);
                T depth_sum = T(0);
                for (int si : list) {
                    const PreparedSplat<T>& s = ps.splats[si];
                    if (x < s.x0 || x >= s.x1 || static_cast<int>(y) < s.y0 ||
                        static_cast<int>(y) >= s.y1) {
                        continue;
                    }
                    const T dx = static_cast<T>(x) + T(0.5) - s.u;
                    const T dy = static_cast<T>(y) + T(0.5) - s.v;
                    const T sigma = T(0.5) * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) +
                                    s.conic[1] * dx * dy;
                    if (!(sigma >= T(0))) {
                        continue;
                    }
                    T a = s.opacity * std::exp(-sigma);
                    if (a < cutoff) {
                        continue;
                    }
                    a = std::min(a, T(kAlphaClamp));
                    contribs.push_back({si, static_cast<double>(a),
                                        static_cast<double>(transmittance)});
                    const T w = a * transmittance;
                    alpha_sum += w;
                    depth_sum += s.z * w;
                    transmittance *= (T(1) - a);
                    if (transmittance < floor_t) {
                        break;
                    }
                }

                const int yi = static_cast<int>(y);
                double g_rgb[3] = {0.0, 0.0, 0.0};
                if (upstream.rgb) {
                    for (int c = 0; c < 3; ++c) {
                        g_rgb[c] = static_cast<double>(upstream.rgb->at(yi, x, c));
                    }
                }
                const double g_alpha_out =
                    upstream.alpha ? static_cast<double>(upstream.alpha->at(yi, x, 0)) : 0.0;
                const double g_depth_out =
                    upstream.depth ? static_cast<double>(upstream.depth->at(yi, x, 0)) : 0.0;
                if (g_rgb[0] == 0.0 && g_rgb[1] == 0.0 && g_rgb[2] == 0.0 &&
                    g_alpha_out == 0.0 && g_depth_out == 0.0) {
                    continue;
                }

                const double a_sum = static_cast<double>(alpha_sum);
                const double d_sum = static_cast<double>(depth_sum);
                const double t_end = static_cast<double>(transmittance);
                const double denom = std::max(a_sum, kDepthEps);
                const double g_depth_sum = g_depth_out / denom;
                const double g_alpha_sum =
                    g_alpha_out - (a_sum > kDepthEps ? g_depth_out * d_sum / (denom * denom)
                                                     : 0.0);
                const double g_t_end =
                    g_rgb[0] * static_cast<double>(bg[0]) +
                    g_rgb[1] * static_cast<double>(bg[1]) +
                    g_rgb[2] * static_cast<double>(bg[2]);

                // Reverse sweep with suffix sums over later contributions.
                double suffix_rgb[3] = {0.0, 0.0, 0.0};
                double suffix_alpha = 0.0;
                double suffix_depth = 0.0;
                for (std::size_t ci = contribs.size(); ci-- > 0;) {
                    const Contribution& cb = contribs[ci];
                    const PreparedSplat<T>& s = ps.splats[cb.si];
                    const double a = cb.alpha;
                    const double t_in = cb.transmittance;
                    const double w = a * t_in;
                    double* slot = &sg[static_cast<std::size_t>(cb.si) * kScreenGradStride];

                    const double color[3] = {static_cast<double>(s.color[0]),
                                             static_cast<double>(s.color[1]),
                                             static_cast<double>(s.color[2])};
                    const double z = static_cast<double>(s.z);

                    slot[kGr] += g_rgb[0] * w;
                    slot[kGg] += g_rgb[1] * w;
                    slot[kGb] += g_rgb[2] * w;
                    slot[kGz] += g_depth_sum * w;

                    const double one_minus_a = 1.0 - a;
                    double g_a = (g_rgb[0] * color[0] + g_rgb[1] * color[1] +
                                  g_rgb[2] * color[2]) *
                                     t_in +
                                 g_alpha_sum * t_in + g_depth_sum * z * t_in;
                    g_a -= (g_rgb[0] * suffix_rgb[0] + g_rgb[1] * suffix_rgb[1] +
                            g_rgb[2] * suffix_rgb[2] + g_alpha_sum * suffix_alpha +
                            g_depth_sum * suffix_depth) /
                           one_minus_a;
                    g_a -= g_t_end * t_end / one_minus_a;

                    if (a < kAlphaClamp) {
                        // alpha = opacity * exp(-sigma)
                        const double g_sigma = -a * g_a;
                        const double dx = static_cast<double>(static_cast<T>(x) + T(0.5) - s.u);
                        const double dy =
                            static_cast<double>(static_cast<T>(y) + T(0.5) - s.v);
                        const double mxx = static_cast<double>(s.conic[0]);
                        const double mxy = static_cast<double>(s.conic[1]);
                        const double myy = static_cast<double>(s.conic[2]);
                        slot[kGo] += (a / static_cast<double>(s.opacity)) * g_a;
                        slot[kGcXX] += g_sigma * 0.5 * dx * dx;
                        slot[kGcXY] += g_sigma * dx * dy;
                        slot[kGcYY] += g_sigma * 0.5 * dy * dy;
                        // d(sigma)/d(mean) = -M d with d = pixel - mean.
                        slot[kGu] += g_sigma * (-(mxx * dx + mxy * dy));
                        slot[kGv] += g_sigma * (-(mxy * dx + myy * dy));
                    }

                    suffix_rgb[0] += color[0] * w;
                    suffix_rgb[1] += color[1] * w;
                    suffix_rgb[2] += color[2] * w;
                    suffix_alpha += w;
                    suffix_depth += z * w;
                }
            }
        }
    });

    std::vector<double> screen_grads(n_vis * kScreenGradStride, 0.0);
    for (const std::vector<double>& cg : chunk_grads) {
        for (std::size_t i = 0; i < screen_grads.size(); ++i) {
            screen_grads[i] += cg[i];
        }
    }

    // Unproject the per-splat screen gradients back to primitive parameters.
    const int degree = scene.sh_degree;
    const int k = scene.sh_coeff_count();
    const CamConsts<double> cc = CamConsts<double>::from(cam);
    parallel_for_chunks(n_vis, [&](std::size_t begin, std::size_t end, int) {
        for (std::size_t si = begin; si < end; ++si) {
            const PreparedSplat<T>& s = ps.splats[si];
            const GaussianPrimitive& g = scene.primitives[static_cast<std::size_t>(s.prim)];
            const double* slot = &screen_grads[si * kScreenGradStride];

            const double g_u = slot[kGu];
            const double g_v = slot[kGv];
            const double g_color[3] = {slot[kGr], slot[kGg], slot[kGb]};
            const double g_opacity = slot[kGo];
            const double g_z_direct = slot[kGz];

            // conic -> cov2d. Full-matrix convention: symmetric cotangents
            // carry half of the parameter gradient on each off-diagonal.
            const double mxx = static_cast<double>(s.conic[0]);
            const double mxy = static_cast<double>(s.conic[1]);
            const double myy = static_cast<double>(s.conic[2]);
            const double gm[2][2] = {{slot[kGcXX], slot[kGcXY] / 2.0},
                                     {slot[kGcXY] / 2.0, slot[kGcYY]}};
            const double m[2][2] = {{mxx, mxy}, {mxy, myy}};
            double mg[2][2];
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    mg[i][j] = m[i][0] * gm[0][j] + m[i][1] * gm[1][j];
                }
            }
            double gcov[2][2]; // dL/d(cov2d), full-matrix convention
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    gcov[i][j] = -(mg[i][0] * m[0][j] + mg[i][1] * m[1][j]);
                }
            }

            // Rebuild the projection intermediates in double.
            double qn[4];
            double q_raw[4];
            double q_len = 0.0;
            for (int i = 0; i < 4; ++i) {
                q_raw[i] = g.rotation[i];
                q_len += q_raw[i] * q_raw[i];
            }
            q_len = std::sqrt(q_len);
            for (int i = 0; i < 4; ++i) {
                qn[i] = q_raw[i] / q_len;
            }
            double rot[3][3];
            quat_to_rotmat(qn, rot);
            const double scale[3] = {g.scale[0], g.scale[1], g.scale[2]};
            double vc[3][3];
            camera_covariance(cc, rot, scale, vc);

            const double p_cam[3] = {static_cast<double>(s.p_cam[0]),
                                     static_cast<double>(s.p_cam[1]),
                                     static_cast<double>(s.p_cam[2])};
            const double z = p_cam[2];
            const double jrow0[3] = {cc.fx / z, 0.0, -cc.fx * p_cam[0] / (z * z)};
            const double jrow1[3] = {0.0, cc.fy / z, -cc.fy * p_cam[1] / (z * z)};

            // dL/dV = J^T gcov J ; dL/dJ = 2 gcov J V
            double gv[3][3];
            for (int i = 0; i < 3; ++i) {
                const double ji[2] = {jrow0[i], jrow1[i]};
                for (int j = 0; j < 3; ++j) {
                    const double jj[2] = {jrow0[j], jrow1[j]};
                    gv[i][j] = ji[0] * (gcov[0][0] * jj[0] + gcov[0][1] * jj[1]) +
                               ji[1] * (gcov[1][0] * jj[0] + gcov[1][1] * jj[1]);
                }
            }
            double jv[2][3];
            for (int r = 0; r < 2; ++r) {
                const double* jr = r == 0 ? jrow0 : jrow1;
                for (int j = 0; j < 3; ++j) {
                    jv[r][j] = jr[0] * vc[0][j] + jr[1] * vc[1][j] + jr[2] * vc[2][j];
                }
            }
            double gj[2][3];
            for (int r = 0; r < 2; ++r) {
                for (int j = 0; j < 3; ++j) {
                    gj[r][j] = 2.0 * (gcov[r][0] * jv[0][j] + gcov[r][1] * jv[1][j]);
                }
            }

            // dL/dSigma_world = W^T (dL/dV) W
            double gvw[3][3]; // (dL/dV) * W
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    gvw[i][j] = gv[i][0] * cc.w2c_r[0][j] + gv[i][1] * cc.w2c_r[1][j] +
                                gv[i][2] * cc.w2c_r[2][j];
                }
            }
            double gsigma[3][3];
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    gsigma[i][j] = cc.w2c_r[0][i] * gvw[0][j] + cc.w2c_r[1][i] * gvw[1][j] +
                                   cc.w2c_r[2][i] * gvw[2][j];
                }
            }

            // Sigma = A A^T with A = R diag(s): dL/dA = 2 dL/dSigma A.
            double a_mat[3][3];
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    a_mat[i][j] = rot[i][j] * scale[j];
                }
            }
            double ga[3][3];
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    ga[i][j] = 2.0 * (gsigma[i][0] * a_mat[0][j] + gsigma[i][1] * a_mat[1][j] +
                                      gsigma[i][2] * a_mat[2][j]);
                }
            }
            double g_scale[3];
            double g_rot[3][3];
            for (int j = 0; j < 3; ++j) {
                g_scale[j] = ga[0][j] * rot[0][j] + ga[1][j] * rot[1][j] + ga[2][j] * rot[2][j];
            }
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    g_rot[i][j] = ga[i][j] * scale[j];
                }
            }

            // Rotation matrix -> unit quaternion -> raw quaternion (tangent).
            const double w = qn[0], xq = qn[1], yq = qn[2], zq = qn[3];
            double g_qn[4] = {0.0, 0.0, 0.0, 0.0};
            g_qn[0] = 2.0 * (g_rot[0][1] * (-zq) + g_rot[0][2] * yq + g_rot[1][0] * zq +
                             g_rot[1][2] * (-xq) + g_rot[2][0] * (-yq) + g_rot[2][1] * xq);
            g_qn[1] = 2.0 * (g_rot[0][1] * yq + g_rot[0][2] * zq + g_rot[1][0] * yq +
                             g_rot[1][1] * (-2.0 * xq) + g_rot[1][2] * (-w) + g_rot[2][0] * zq +
                             g_rot[2][1] * w + g_rot[2][2] * (-2.0 * xq));
            g_qn[2] = 2.0 * (g_rot[0][0] * (-2.0 * yq) + g_rot[0][1] * xq + g_rot[0][2] * w +
                             g_rot[1][0] * xq + g_rot[1][2] * zq + g_rot[2][0] * (-w) +
                             g_rot[2][1] * zq + g_rot[2][2] * (-2.0 * yq));
            g_qn[3] = 2.0 * (g_rot[0][0] * (-2.0 * zq) + g_rot[0][1] * (-w) + g_rot[0][2] * xq +
                             g_rot[1][0] * w + g_rot[1][1] * (-2.0 * zq) + g_rot[1][2] * yq +
                             g_rot[2][0] * xq + g_rot[2][1] * yq);
            double dot = 0.0;
            for (int i = 0; i < 4; ++i) {
                dot += g_qn[i] * qn[i];
            }
            double g_q[4];
            for (int i = 0; i < 4; ++i) {
                g_q[i] = (g_qn[i] - dot * qn[i]) / q_len;
            }

            // Camera-point gradient from the mean, the Jacobian entries and
            // the direct depth channel.
            double g_pc[3] = {0.0, 0.0, 0.0};
            g_pc[0] += g_u * cc.fx / z;
            g_pc[1] += g_v * cc.fy / z;
            g_pc[2] += -g_u * cc.fx * p_cam[0] / (z * z) - g_v * cc.fy * p_cam[1] / (z * z);
            g_pc[0] += gj[0][2] * (-cc.fx / (z * z));
            g_pc[1] += gj[1][2] * (-cc.fy / (z * z));
            g_pc[2] += gj[0][0] * (-cc.fx / (z * z)) + gj[1][1] * (-cc.fy / (z * z)) +
                       gj[0][2] * (2.0 * cc.fx * p_cam[0] / (z * z * z)) +
                       gj[1][2] * (2.0 * cc.fy * p_cam[1] / (z * z * z));
            g_pc[2] += g_z_direct;

            double g_center[3];
            for (int i = 0; i < 3; ++i) {
                g_center[i] = cc.w2c_r[0][i] * g_pc[0] + cc.w2c_r[1][i] * g_pc[1] +
                              cc.w2c_r[2][i] * g_pc[2];
            }

            // SH chain: coefficients, then the view direction, then center.
            double basis[kMaxShCoeffs];
            double dbasis[kMaxShCoeffs * 3];
            const std::array<double, 3> dir = {static_cast<double>(s.dir[0]),
                                               static_cast<double>(s.dir[1]),
                                               static_cast<double>(s.dir[2])};
            sh_basis_grad(degree, dir, basis, dbasis);
            double g_dir[3] = {0.0, 0.0, 0.0};
            const std::size_t prim = static_cast<std::size_t>(s.prim);
            for (int c = 0; c < 3; ++c) {
                if (!(static_cast<double>(s.raw_color[c]) > 0.0)) {
                    continue; // clamped channel, no gradient flows
                }
                const double gc = g_color[c];
                for (int i = 0; i < k; ++i) {
                    const double coef = g.sh[static_cast<std::size_t>(c) * k + i];
                    grads.sh[(prim * 3 + static_cast<std::size_t>(c)) * k + i] +=
                        static_cast<T>(gc * basis[i]);
                    g_dir[0] += gc * coef * dbasis[i * 3 + 0];
                    g_dir[1] += gc * coef * dbasis[i * 3 + 1];
                    g_dir[2] += gc * coef * dbasis[i * 3 + 2];
                }
            }
            const double dlen = static_cast<double>(s.dir_len);
            const double dir_dot =
                g_dir[0] * dir[0] + g_dir[1] * dir[1] + g_dir[2] * dir[2];
            for (int i = 0; i < 3; ++i) {
                g_center[i] += (g_dir[i] - dir_dot * dir[i]) / dlen;
            }

            for (int i = 0; i < 3; ++i) {
                grads.center[prim * 3 + i] += static_cast<T>(g_center[i]);
                grads.scale[prim * 3 + i] += static_cast<T>(g_scale[i]);
            }
            for (int i = 0; i < 4; ++i) {
                grads.rotation[prim * 4 + i] += static_cast<T>(g_q[i]);
            }
            grads.opacity[prim] += static_cast<T>(g_opacity);
        }
    });

    return grads;
}

template struct SceneGrad<float>;
template struct SceneGrad<double>;
template std::optional<ProjectedGaussian<float>> project_gaussian(const GaussianPrimitive&,
                                                                  const CameraView&,
                                                                  const RenderOptions&);
template std::optional<ProjectedGaussian<double>> project_gaussian(const GaussianPrimitive&,
                                                                   const CameraView&,
                                                                   const RenderOptions&);
template RenderOutput<float> render(const GaussianScene&, const CameraView&,
                                    const RenderOptions&);
template RenderOutput<double> render(const GaussianScene&, const CameraView&,
                                     const RenderOptions&);
template SceneGrad<float> render_backward(const GaussianScene&, const CameraView&,
                                          const RenderOptions&, const RenderUpstream<float>&);
template SceneGrad<double> render_backward(const GaussianScene&, const CameraView&,
                                           const RenderOptions&, const RenderUpstream<double>&);

} // namespace lumos
