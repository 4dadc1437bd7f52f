// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/fit.hpp>

#include <algorithm>
#include <cmath>

#include <lumos/voxel.hpp>

namespace lumos {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kScaleFloor = 1e-6;

} // namespace

int FitConfig::resolved_warmup() const {
    if (warmup >= 0) {
        return std::min(warmup, iters);
    }
    return std::min(1000, iters / 30);
}

void FitConfig::validate() const {
    if (iters < 0) {
        throw InvalidArgument("iters must be >= 0");
    }
    if (!(lr_max > 0.0)) {
        throw InvalidArgument("lr_max must be positive");
    }
    if (lr_min < 0.0 || lr_min > lr_max) {
        throw InvalidArgument("lr_min must lie in [0, lr_max]");
    }
    if (warmup > iters) {
        throw InvalidArgument("warmup must not exceed iters");
    }
    if (!(student_alpha_min >= 0.0)) {
        throw InvalidArgument("student_alpha_min must be non-negative");
    }
    if (rec_weight < 0.0) {
        throw InvalidArgument("rec_weight must be non-negative");
    }
    render.validate();
}

double lr_schedule(int step, const FitConfig& cfg) {
    cfg.validate();
    if (step < 0 || step >= cfg.iters) {
        throw InvalidArgument("lr_schedule step out of range");
    }
    const int warmup = cfg.resolved_warmup();
    if (step < warmup) {
        return cfg.lr_max * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    const int span = cfg.iters - warmup;
    if (span <= 0) {
        return cfg.lr_max;
    }
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
    return cfg.lr_min +
           0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(M_PI * progress));
}

template <typename T>
struct FitSession<T>::Impl {
    FitConfig cfg;
    GaussianScene scene;
    std::vector<CameraView> views;
    std::vector<Image<T>> targets;
    std::vector<Image<T>> degraded;
    PointMapT<T> teacher_points;

    FeatureExtractor<T> extractor;
    std::vector<FeaturePyramid<T>> teacher_pyramids; // per view
    std::array<VoxelStats, kVoxelScales> teacher_stats;
    std::array<bool, kVoxelScales> teacher_scale_valid{};
    std::array<double, kVoxelScales> voxel_sizes{};
    Eigen::Vector3d voxel_origin = Eigen::Vector3d::Zero();

    int step_count = 0;
    SceneGrad<double> m;
    SceneGrad<double> v;
    std::vector<LossReport> history;

    Impl(GaussianScene init_scene, std::vector<CameraView> views_,
         std::vector<Image<T>> targets_, std::vector<Image<T>> degraded_,
         PointMapT<T> teacher_points_, FitConfig cfg_)
        : cfg(std::move(cfg_)), scene(std::move(init_scene)), views(std::move(views_)),
          targets(std::move(targets_)), degraded(std::move(degraded_)),
          teacher_points(std::move(teacher_points_)), extractor(cfg.extractor) {
        cfg.validate();
        scene.validate();
        const int s = static_cast<int>(views.size());
        if (s == 0 || targets.size() != views.size()) {
            throw InvalidArgument("fit needs one clean target per view");
        }
        if (!degraded.empty() && degraded.size() != views.size()) {
            throw InvalidArgument("degraded context count must match views (or be empty)");
        }
        for (const CameraView& cam : views) {
            cam.validate();
            if (cam.width != views[0].width || cam.height != views[0].height) {
                throw InvalidArgument("fit requires uniform view dimensions");
            }
        }
        if (teacher_points.views != s || teacher_points.height != views[0].height ||
            teacher_points.width != views[0].width) {
            throw InvalidArgument("teacher point map dims must match the views");
        }
        for (std::size_t i = 0; i < views.size(); ++i) {
            if (targets[i].height != views[i].height || targets[i].width != views[i].width ||
                targets[i].channels != 3) {
                throw InvalidArgument("target image dims must match the camera");
            }
        }

        m.resize_like(scene);
        v.resize_like(scene);

        teacher_pyramids.reserve(views.size());
        for (const Image<T>& img : targets) {
            teacher_pyramids.push_back(extractor.extract(img));
        }

        setup_voxel_scales();
        build_teacher_stats();
    }

    void setup_voxel_scales() {
        Eigen::Vector3d lo = Eigen::Vector3d::Constant(
            std::numeric_limits<double>::infinity());
        Eigen::Vector3d hi = -lo;
        bool any = false;
        for (std::size_t site = 0; site < teacher_points.mask.size(); ++site) {
            if (!teacher_points.mask[site]) {
                continue;
            }
            any = true;
            for (int a = 0; a < 3; ++a) {
                const double v = static_cast<double>(teacher_points.xyz[site * 3 + a]);
                lo[a] = std::min(lo[a], v);
                hi[a] = std::max(hi[a], v);
            }
        }
        if (!any) {
            throw InvalidArgument("teacher point map has no valid sites");
        }
        voxel_origin = lo;
        double base = cfg.voxel_base_size;
        if (!(base > 0.0)) {
            base = (hi - lo).norm() / 64.0;
            if (!(base > 0.0)) {
                base = 1e-3; // degenerate single-point cloud
            }
        }
        for (int i = 0; i < kVoxelScales; ++i) {
            voxel_sizes[static_cast<std::size_t>(i)] = base * std::pow(2.0, i);
        }
    }

    // Flattens one pyramid level across views, pairing each site with the
    // matching (nearest-neighbor downsampled) point-map entry.
    struct LevelPoints {
        std::vector<T> points;
        std::vector<std::uint8_t> mask;
        std::vector<T> feats;
        int channels = 0;
        std::size_t valid = 0;
    };

    LevelPoints gather_level(const PointMapT<T>& pm, const std::vector<FeaturePyramid<T>>& pyrs,
                             int level) const {
        const int factor = 1 << level;
        const PointMapT<T> coarse = downsample_nearest(pm, factor);
        const FeatureLevel<T>& probe = pyrs[0][static_cast<std::size_t>(level)];
        if (coarse.height != probe.height || coarse.width != probe.width) {
            throw InvalidArgument("pyramid level and point map downsample disagree");
        }
        LevelPoints out;
        out.channels = probe.channels;
        const std::size_t sites_per_view =
            static_cast<std::size_t>(coarse.height) * coarse.width;
        const std::size_t n = static_cast<std::size_t>(coarse.views) * sites_per_view;
        out.points.resize(n * 3);
        out.mask.resize(n);
        out.feats.resize(n * static_cast<std::size_t>(out.channels));
        for (int s = 0; s < coarse.views; ++s) {
            const FeatureLevel<T>& f = pyrs[static_cast<std::size_t>(s)]
                                           [static_cast<std::size_t>(level)];
            for (std::size_t i = 0; i < sites_per_view; ++i) {
                const std::size_t src = static_cast<std::size_t>(s) * sites_per_view + i;
                out.points[src * 3 + 0] = coarse.xyz[src * 3 + 0];
                out.points[src * 3 + 1] = coarse.xyz[src * 3 + 1];
                out.points[src * 3 + 2] = coarse.xyz[src * 3 + 2];
                out.mask[src] = coarse.mask[src];
                out.valid += coarse.mask[src] ? 1 : 0;
                for (int c = 0; c < out.channels; ++c) {
                    out.feats[src * static_cast<std::size_t>(out.channels) +
                              static_cast<std::size_t>(c)] =
                        f.data[i * static_cast<std::size_t>(out.channels) +
                               static_cast<std::size_t>(c)];
                }
            }
        }
        return out;
    }

    void build_teacher_stats() {
        for (int level = 0; level < kVoxelScales; ++level) {
            const LevelPoints lp = gather_level(teacher_points, teacher_pyramids, level);
            if (lp.valid == 0) {
                teacher_scale_valid[static_cast<std::size_t>(level)] = false;
                continue;
            }
            const VoxelizeResult<T> vr = voxelize<T>(
                std::span<const T>(lp.points), std::span<const std::uint8_t>(lp.mask),
                std::span<const T>(lp.feats), lp.channels,
                voxel_sizes[static_cast<std::size_t>(level)], voxel_origin);
            teacher_stats[static_cast<std::size_t>(level)] = voxel_stats(vr.grid);
            teacher_scale_valid[static_cast<std::size_t>(level)] = true;
        }
    }

    LossReport do_step() {
        const double lr = lr_schedule(step_count, cfg);
        const std::size_t n_views = views.size();
        const LumosWeights& lw = cfg.lumos_weights;
        const ObjectiveWeights& ow = cfg.objective_weights;

        // Forward renders.
        std::vector<RenderOutput<T>> outs;
        outs.reserve(n_views);
        for (std::size_t s = 0; s < n_views; ++s) {
            outs.push_back(render<T>(scene, views[s], cfg.render));
        }
        std::vector<Image<T>> rgb_stack;
        rgb_stack.reserve(n_views);
        for (const RenderOutput<T>& o : outs) {
            rgb_stack.push_back(o.rgb);
        }

        // Reconstruction and image-level terms.
        StackLossResult<T> rec = rec_loss(rgb_stack, targets, cfg.rec_l1);
        StackLossResult<T> img = image_loss(rgb_stack, targets);

        // Restored-branch pyramids and the content term (mean over views).
        std::vector<FeaturePyramid<T>> restored_pyrs;
        restored_pyrs.reserve(n_views);
        for (std::size_t s = 0; s < n_views; ++s) {
            restored_pyrs.push_back(extractor.extract(rgb_stack[s]));
        }
        std::vector<FeaturePyramid<T>> pyr_grads(n_views); // weighted cotangents
        double content_value = 0.0;
        const double inv_views = 1.0 / static_cast<double>(n_views);
        for (std::size_t s = 0; s < n_views; ++s) {
            ContentLossResult<T> c = content_loss(restored_pyrs[s], teacher_pyramids[s],
                                                  cfg.content_weights);
            content_value += c.value * inv_views;
            const double w = ow.omega_lumos * lw.lambda_c * inv_views;
            for (int level = kPyramidLevels - 2; level < kPyramidLevels; ++level) {
                FeatureLevel<T>& src = c.grad[static_cast<std::size_t>(level)];
                if (src.data.empty()) {
                    continue;
                }
                FeatureLevel<T>& dst = pyr_grads[s][static_cast<std::size_t>(level)];
                if (dst.data.empty()) {
                    dst = FeatureLevel<T>(src.height, src.width, src.channels);
                }
                for (std::size_t i = 0; i < src.data.size(); ++i) {
                    dst.data[i] += static_cast<T>(w) * src.data[i];
                }
            }
        }

        // Student geometry: back-projected rendered depth, gated by the
        // teacher mask and a minimum rendered alpha.
        const int h = views[0].height, w_px = views[0].width;
        PointMapT<T> student(static_cast<int>(n_views), h, w_px);
        std::vector<DepthMap<T>> student_depths(n_views);
        for (std::size_t s = 0; s < n_views; ++s) {
            DepthMap<T>& d = student_depths[s];
            d = DepthMap<T>(h, w_px);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w_px; ++x) {
                    const std::size_t site = student.site(static_cast<int>(s), y, x);
                    const bool gated =
                        static_cast<double>(outs[s].alpha.at(y, x, 0)) > cfg.student_alpha_min &&
                        teacher_points.mask[site] != 0;
                    if (!gated) {
                        continue;
                    }
                    d.at(y, x) = outs[s].depth.at(y, x, 0);
                }
            }
            const PointMapT<T> bp = backproject(d, views[s]);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w_px; ++x) {
                    const std::size_t dst = student.site(static_cast<int>(s), y, x);
                    const std::size_t src = bp.site(0, y, x);
                    student.mask[dst] = bp.mask[src];
                    for (int c = 0; c < 3; ++c) {
                        student.xyz[dst * 3 + c] = bp.xyz[src * 3 + c];
                    }
                }
            }
        }
        PointMapT<T> teacher_gated = teacher_points;
        teacher_gated.mask = student.mask;

        std::size_t distill_sites = 0;
        for (std::uint8_t mk : student.mask) {
            distill_sites += mk ? 1 : 0;
        }
        DistillResult<T> distill;
        if (distill_sites > 0) {
            distill = distill_loss(student, teacher_gated);
        } else {
            // No overlap between rendered and teacher geometry this step;
            // the term vanishes rather than aborting the run.
            distill.value = 0.0;
        }

        // Voxel term: restored branch pools rendered features over all views
        // at each scale; scales with no valid student points contribute zero.
        std::array<VoxelStats, kVoxelScales> restored_stats;
        std::array<bool, kVoxelScales> scale_active{};
        std::array<VoxelizeResult<T>, kVoxelScales> restored_grids;
        std::array<LevelPoints, kVoxelScales> level_points;
        for (int level = 0; level < kVoxelScales; ++level) {
            const std::size_t ls = static_cast<std::size_t>(level);
            if (!teacher_scale_valid[ls]) {
                restored_stats[ls] = teacher_stats[ls];
                continue;
            }
            level_points[ls] = gather_level(student, restored_pyrs, level);
            if (level_points[ls].valid == 0) {
                restored_stats[ls] = teacher_stats[ls]; // zero contribution
                continue;
            }
            restored_grids[ls] = voxelize<T>(
                std::span<const T>(level_points[ls].points),
                std::span<const std::uint8_t>(level_points[ls].mask),
                std::span<const T>(level_points[ls].feats), level_points[ls].channels,
                voxel_sizes[ls], voxel_origin);
            restored_stats[ls] = voxel_stats(restored_grids[ls].grid);
            scale_active[ls] = true;
        }
        std::array<VoxelStatsGrad, kVoxelScales> stats_grads;
        const double voxel_value =
            voxel_loss(restored_stats, teacher_stats, cfg.voxel_scale_weights, &stats_grads);

        // Voxel gradients chain into the pyramid cotangents.
        for (int level = 0; level < kVoxelScales; ++level) {
            const std::size_t ls = static_cast<std::size_t>(level);
            if (!scale_active[ls]) {
                continue;
            }
            const double w = ow.omega_lumos * lw.lambda_v;
            if (w == 0.0) {
                continue;
            }
            VoxelStatsGrad weighted = stats_grads[ls];
            for (double& g : weighted.mu) {
                g *= w;
            }
            for (double& g : weighted.sigma) {
                g *= w;
            }
            const std::vector<T> cell_grads =
                voxel_stats_backward(restored_grids[ls].grid, weighted);
            std::vector<T> point_grads(level_points[ls].feats.size(), T(0));
            voxelize_backward(restored_grids[ls], std::span<const T>(cell_grads),
                              std::span<T>(point_grads));
            // Scatter back into per-view pyramid gradients.
            const int ch = level_points[ls].channels;
            const FeatureLevel<T>& probe = restored_pyrs[0][ls];
            const std::size_t sites_per_view =
                static_cast<std::size_t>(probe.height) * probe.width;
            for (std::size_t s = 0; s < n_views; ++s) {
                FeatureLevel<T>& dst = pyr_grads[s][ls];
                if (dst.data.empty()) {
                    dst = FeatureLevel<T>(probe.height, probe.width, probe.channels);
                }
                for (std::size_t i = 0; i < sites_per_view * static_cast<std::size_t>(ch);
                     ++i) {
                    dst.data[i] +=
                        point_grads[s * sites_per_view * static_cast<std::size_t>(ch) + i];
                }
            }
        }

        // Assemble per-view upstream gradients and run the renderer backward.
        SceneGrad<T> total_grads;
        total_grads.resize_like(scene);
        const double w_img = ow.omega_lumos * lw.lambda_i;
        for (std::size_t s = 0; s < n_views; ++s) {
            Image<T> g_rgb(h, w_px, 3);
            for (std::size_t i = 0; i < g_rgb.data.size(); ++i) {
                g_rgb.data[i] = static_cast<T>(cfg.rec_weight) * rec.grad[s].data[i] +
                                static_cast<T>(w_img) * img.grad[s].data[i];
            }
            const bool any_pyr = !pyr_grads[s][0].data.empty() ||
                                 !pyr_grads[s][1].data.empty() ||
                                 !pyr_grads[s][2].data.empty() ||
                                 !pyr_grads[s][3].data.empty() ||
                                 !pyr_grads[s][4].data.empty();
            if (any_pyr) {
                const Image<T> g_from_feats = extractor.backward(rgb_stack[s], pyr_grads[s]);
                for (std::size_t i = 0; i < g_rgb.data.size(); ++i) {
                    g_rgb.data[i] += g_from_feats.data[i];
                }
            }

            Image<T> g_depth(h, w_px, 1);
            if (distill_sites > 0 && ow.omega_distill != 0.0) {
                PointMapT<T> slice(1, h, w_px);
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w_px; ++x) {
                        const std::size_t src = student.site(static_cast<int>(s), y, x);
                        const std::size_t dst = slice.site(0, y, x);
                        slice.mask[dst] = student.mask[src];
                        for (int c = 0; c < 3; ++c) {
                            slice.xyz[dst * 3 + c] = distill.grad[src * 3 + c];
                        }
                    }
                }
                std::vector<T> grad_z;
                backproject_backward(slice, student_depths[s], views[s], grad_z);
                for (std::size_t i = 0; i < grad_z.size(); ++i) {
                    g_depth.data[i] = static_cast<T>(ow.omega_distill) * grad_z[i];
                }
            }

            RenderUpstream<T> upstream;
            upstream.rgb = &g_rgb;
            upstream.depth = &g_depth;
            const SceneGrad<T> view_grads =
                render_backward(scene, views[s], cfg.render, upstream);
            total_grads.accumulate(view_grads);
        }

        if (!total_grads.all_finite()) {
            throw NumericalError("non-finite gradients at step " +
                                 std::to_string(step_count));
        }

        apply_update(total_grads, lr);

        LossReport report;
        report.rec = cfg.rec_weight * rec.value;
        report.distill = distill.value;
        report.content = content_value;
        report.image = img.value;
        report.voxel = voxel_value;
        report.lumos = lumos_loss(content_value, img.value, voxel_value, lw);
        report.total = total_loss(report.rec, distill.value, report.lumos, ow);
        if (!report.all_finite()) {
            throw NumericalError("non-finite loss at step " + std::to_string(step_count));
        }
        ++step_count;
        history.push_back(report);
        return report;
    }

    void apply_update(const SceneGrad<T>& grads, double lr) {
        const int t = step_count + 1;
        const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
        const double bc2 = 1.0 - std::pow(kAdamBeta2, t);

        auto adam = [&](double& m_slot, double& v_slot, double g, double lr_group) {
            m_slot = kAdamBeta1 * m_slot + (1.0 - kAdamBeta1) * g;
            v_slot = kAdamBeta2 * v_slot + (1.0 - kAdamBeta2) * g * g;
            const double m_hat = m_slot / bc1;
            const double v_hat = v_slot / bc2;
            return lr_group * m_hat / (std::sqrt(v_hat) + kAdamEps);
        };

        const std::size_t n = scene.primitives.size();
        const std::size_t k = static_cast<std::size_t>(scene.sh_coeff_count());
        for (std::size_t i = 0; i < n; ++i) {
            GaussianPrimitive& g = scene.primitives[i];
            if (cfg.trainable.center) {
                const double lr_g = lr * cfg.lr_scales.center;
                for (int a = 0; a < 3; ++a) {
                    g.center[a] -= adam(m.center[i * 3 + a], v.center[i * 3 + a],
                                        static_cast<double>(grads.center[i * 3 + a]), lr_g);
                }
            }
            if (cfg.trainable.opacity) {
                g.opacity -= adam(m.opacity[i], v.opacity[i],
                                  static_cast<double>(grads.opacity[i]),
                                  lr * cfg.lr_scales.opacity);
                g.opacity = std::clamp(g.opacity, 0.0, 1.0);
            }
            if (cfg.trainable.rotation) {
                const double lr_g = lr * cfg.lr_scales.rotation;
                for (int a = 0; a < 4; ++a) {
                    g.rotation[a] -= adam(m.rotation[i * 4 + a], v.rotation[i * 4 + a],
                                          static_cast<double>(grads.rotation[i * 4 + a]), lr_g);
                }
                const double norm = g.rotation.norm();
                if (norm <= 1e-12) {
                    g.rotation = Eigen::Vector4d(1, 0, 0, 0);
                } else if (std::abs(norm - 1.0) > 1e-12) {
                    // Keep zero-gradient steps bitwise stationary: an
                    // already-unit quaternion is left untouched.
                    g.rotation /= norm;
                }
            }
            if (cfg.trainable.scale) {
                const double lr_g = lr * cfg.lr_scales.scale;
                for (int a = 0; a < 3; ++a) {
                    g.scale[a] -= adam(m.scale[i * 3 + a], v.scale[i * 3 + a],
                                       static_cast<double>(grads.scale[i * 3 + a]), lr_g);
                    g.scale[a] = std::max(g.scale[a], kScaleFloor);
                }
            }
            if (cfg.trainable.sh) {
                const double lr_g = lr * cfg.lr_scales.sh;
                for (std::size_t a = 0; a < 3 * k; ++a) {
                    g.sh[a] -= adam(m.sh[i * 3 * k + a], v.sh[i * 3 * k + a],
                                    static_cast<double>(grads.sh[i * 3 * k + a]), lr_g);
                }
            }
        }
    }
};

template <typename T>
FitSession<T>::FitSession(GaussianScene init_scene, std::vector<CameraView> views,
                          std::vector<Image<T>> targets, std::vector<Image<T>> degraded,
                          PointMapT<T> teacher_points, FitConfig cfg)
    : impl_(new Impl(std::move(init_scene), std::move(views), std::move(targets),
                     std::move(degraded), std::move(teacher_points), std::move(cfg))) {}

template <typename T>
FitSession<T>::~FitSession() = default;
template <typename T>
FitSession<T>::FitSession(FitSession&&) noexcept = default;
template <typename T>
FitSession<T>& FitSession<T>::operator=(FitSession&&) noexcept = default;

template <typename T>
LossReport FitSession<T>::step() {
    return impl_->do_step();
}

template <typename T>
GaussianScene FitSession<T>::run() {
    while (impl_->step_count < impl_->cfg.iters) {
        impl_->do_step();
    }
    return impl_->scene;
}

template <typename T>
const GaussianScene& FitSession<T>::scene() const {
    return impl_->scene;
}

template <typename T>
const std::vector<LossReport>& FitSession<T>::history() const {
    return impl_->history;
}

template <typename T>
int FitSession<T>::current_step() const {
    return impl_->step_count;
}

template <typename T>
const FitConfig& FitSession<T>::config() const {
    return impl_->cfg;
}

template <typename T>
std::pair<GaussianScene, std::vector<LossReport>> fit_scene(
    const GaussianScene& init_scene, const std::vector<CameraView>& views,
    const std::vector<Image<T>>& targets, const std::vector<Image<T>>& degraded,
    const PointMapT<T>& teacher_points, const FitConfig& cfg) {
    FitSession<T> session(init_scene, views, targets, degraded, teacher_points, cfg);
    GaussianScene final_scene = session.run();
    return {std::move(final_scene), session.history()};
}

template class FitSession<float>;
template class FitSession<double>;
template std::pair<GaussianScene, std::vector<LossReport>> fit_scene(
    const GaussianScene&, const std::vector<CameraView>&, const std::vector<Image<float>>&,
    const std::vector<Image<float>>&, const PointMapT<float>&, const FitConfig&);
template std::pair<GaussianScene, std::vector<LossReport>> fit_scene(
    const GaussianScene&, const std::vector<CameraView>&, const std::vector<Image<double>>&,
    const std::vector<Image<double>>&, const PointMapT<double>&, const FitConfig&);

} // namespace lumos
