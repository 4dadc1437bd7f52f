// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include <lumos/degrade.hpp>
#include <lumos/fit.hpp>
#include <lumos/geometry.hpp>
#include <lumos/image.hpp>
#include <lumos/metrics.hpp>
#include <lumos/parallel.hpp>
#include <lumos/renderer.hpp>
#include <lumos/scene.hpp>
#include <lumos/synth.hpp>
#include <lumos/tensor.hpp>
#include <lumos/voxel.hpp>

#include "manifest.hpp"

namespace lumos::cli {

namespace {

Eigen::Vector3d to_vec3(const std::vector<double>& v, const char* what) {
    if (v.size() != 3) {
        throw InvalidArgument(std::string(what) + " needs exactly 3 values");
    }
    return Eigen::Vector3d(v[0], v[1], v[2]);
}

void apply_common(const CommonOpts& common) { set_thread_count(common.threads); }

std::vector<std::filesystem::path> png_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string view_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "view_%03zu", i);
    return buf;
}

template <typename T>
Image<T> to_working(const ImageLinear& img) {
    return img.cast<T>();
}

ImageLinear to_storage(const Image<float>& img) { return img; }
ImageLinear to_storage(const Image<double>& img) { return img.cast<float>(); }

// Renders every view and back-projects depth (gated by alpha) into one
// multi-view point map; shared by gen-scene and the fit bootstrap path.
template <typename T>
PointMapT<T> teacher_points_from_scene(const GaussianScene& scene,
                                       const std::vector<CameraView>& cams,
                                       const RenderOptions& opts, double alpha_min,
                                       std::vector<RenderOutput<T>>* outs_opt) {
    const int h = cams[0].height, w = cams[0].width;
    PointMapT<T> pm(static_cast<int>(cams.size()), h, w);
    for (std::size_t s = 0; s < cams.size(); ++s) {
        RenderOutput<T> out = render<T>(scene, cams[s], opts);
        DepthMap<T> d(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (static_cast<double>(out.alpha.at(y, x, 0)) > alpha_min) {
                    d.at(y, x) = out.depth.at(y, x, 0);
                }
            }
        }
        const PointMapT<T> bp = backproject(d, cams[s]);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t dst = pm.site(static_cast<int>(s), y, x);
                const std::size_t src = bp.site(0, y, x);
                pm.mask[dst] = bp.mask[src];
                for (int c = 0; c < 3; ++c) {
                    pm.xyz[dst * 3 + c] = bp.xyz[src * 3 + c];
                }
            }
        }
        if (outs_opt) {
            outs_opt->push_back(std::move(out));
        }
    }
    return pm;
}

template <typename T>
int gen_scene_impl(const GenSceneOpts& opts, RunManifest& manifest) {
    SynthConfig cfg;
    cfg.seed = opts.seed;
    cfg.n_primitives = opts.n_primitives;
    cfg.views = opts.views;
    cfg.width = opts.width;
    cfg.height = opts.height;
    if (opts.bbox.size() != 6) {
        throw InvalidArgument("--bbox needs 6 values: x0,y0,z0,x1,y1,z1");
    }
    cfg.bbox_min = Eigen::Vector3d(opts.bbox[0], opts.bbox[1], opts.bbox[2]);
    cfg.bbox_max = Eigen::Vector3d(opts.bbox[3], opts.bbox[4], opts.bbox[5]);
    cfg.sh_degree = opts.sh_degree;

    RenderOptions ropts;
    ropts.background = to_vec3(opts.background, "--bg");

    const SynthScene synth = gen_scene(cfg);
    std::filesystem::create_directories(opts.out / "clean");

    ply_write(synth.scene, opts.out / "scene.ply");
    manifest.add_output(opts.out / "scene.ply");
    cameras_save(synth.cameras, opts.out / "cams.json");
    manifest.add_output(opts.out / "cams.json");

    std::vector<RenderOutput<T>> outs;
    const PointMapT<T> teacher =
        teacher_points_from_scene<T>(synth.scene, synth.cameras, ropts, opts.alpha_min, &outs);
    for (std::size_t s = 0; s < outs.size(); ++s) {
        const auto path = opts.out / "clean" / (view_name(s) + ".png");
        image_save(to_storage(outs[s].rgb), path);
        manifest.add_output(path);
    }
    tensor_write(point_map_to_tensor(teacher), opts.out / "points.lumt");
    manifest.add_output(opts.out / "points.lumt");
    tensor_write(point_map_mask_to_tensor(teacher), opts.out / "points_mask.lumt");
    manifest.add_output(opts.out / "points_mask.lumt");
    return 0;
}

template <typename T>
int render_impl(const RenderOpts& opts, RunManifest& manifest) {
    manifest.add_input(opts.scene);
    manifest.add_input(opts.cameras);
    const GaussianScene scene = ply_read(opts.scene);
    const std::vector<CameraView> cams = cameras_load(opts.cameras);
    RenderOptions ropts;
    ropts.background = to_vec3(opts.background, "--bg");
    ropts.near_clip = opts.near_clip;
    ropts.far_clip = opts.far_clip;
    ropts.lowpass = opts.lowpass;

    std::filesystem::create_directories(opts.out);
    for (std::size_t s = 0; s < cams.size(); ++s) {
        const RenderOutput<T> out = render<T>(scene, cams[s], ropts);
        const auto rgb_path = opts.out / (view_name(s) + ".png");
        image_save(to_storage(out.rgb), rgb_path);
        manifest.add_output(rgb_path);

        DepthMap<T> d(cams[s].height, cams[s].width);
        for (std::size_t i = 0; i < d.z.size(); ++i) {
            d.z[i] = out.depth.data[i];
        }
        const auto depth_path = opts.out / (view_name(s) + "_depth.lumt");
        tensor_write(depth_map_to_tensor(d), depth_path);
        manifest.add_output(depth_path);

        Image<float> alpha_vis(cams[s].height, cams[s].width, 1);
        for (std::size_t i = 0; i < alpha_vis.data.size(); ++i) {
            alpha_vis.data[i] = static_cast<float>(out.alpha.data[i]);
        }
        const auto alpha_path = opts.out / (view_name(s) + "_alpha.png");
        image_save_gray(alpha_vis, alpha_path);
        manifest.add_output(alpha_path);
    }
    return 0;
}

template <typename T>
int fit_impl(const FitOpts& opts, RunManifest& manifest) {
    manifest.add_input(opts.scene);
    manifest.add_input(opts.cameras);
    manifest.add_input(opts.teacher_points);

    GaussianScene scene = ply_read(opts.scene);
    if (opts.gray_init) {
        // Neutral-gray colors: DC 0 renders 0.5 per channel.
        for (GaussianPrimitive& g : scene.primitives) {
            std::fill(g.sh.begin(), g.sh.end(), 0.0);
        }
    }
    const std::vector<CameraView> cams = cameras_load(opts.cameras);

    const auto load_stack = [&](const std::filesystem::path& dir) {
        std::vector<Image<T>> stack;
        for (const auto& file : png_files(dir)) {
            manifest.add_input(file);
            stack.push_back(to_working<T>(image_load(file)));
        }
        return stack;
    };
    const std::vector<Image<T>> targets = load_stack(opts.targets);
    std::vector<Image<T>> degraded;
    if (!opts.degraded.empty()) {
        degraded = load_stack(opts.degraded);
    }

    const TensorF points_tensor = tensor_read(opts.teacher_points);
    TensorF mask_tensor;
    const TensorF* mask_ptr = nullptr;
    if (!opts.teacher_mask.empty()) {
        manifest.add_input(opts.teacher_mask);
        mask_tensor = tensor_read(opts.teacher_mask);
        mask_ptr = &mask_tensor;
    }
    const PointMapT<T> teacher = point_map_from_tensors<T>(points_tensor, mask_ptr);

    FitConfig cfg;
    cfg.iters = opts.iters;
    cfg.seed = opts.seed;
    cfg.lr_max = opts.lr_max;
    cfg.lr_min = opts.lr_min;
    cfg.warmup = opts.warmup;
    cfg.lumos_weights = LumosWeights{opts.lambda_c, opts.lambda_i, opts.lambda_v};
    cfg.objective_weights = ObjectiveWeights{opts.omega_distill, opts.omega_lumos};
    cfg.rec_weight = opts.rec_weight;
    cfg.rec_l1 = opts.rec_l1;
    cfg.trainable = TrainableFlags{!opts.freeze_center, !opts.freeze_opacity,
                                   !opts.freeze_rotation, !opts.freeze_scale, !opts.freeze_sh};
    cfg.lr_scales = LrScales{opts.lr_scale_center, opts.lr_scale_opacity,
                             opts.lr_scale_rotation, opts.lr_scale_scale, opts.lr_scale_sh};
    cfg.student_alpha_min = opts.alpha_min;
    cfg.voxel_base_size = opts.voxel_base_size;
    cfg.render.background = to_vec3(opts.background, "--bg");
    if (opts.extractor == "fixed") {
        cfg.extractor.kind = ExtractorKind::FixedPyramid;
    } else if (opts.extractor == "external") {
        cfg.extractor.kind = ExtractorKind::ExternalWeights;
        cfg.extractor.weight_path = opts.extractor_weights;
        manifest.add_input(opts.extractor_weights);
    } else {
        throw InvalidArgument("--extractor must be fixed or external");
    }

    std::ofstream log;
    if (!opts.log.empty()) {
        log.open(opts.log, std::ios::trunc);
        if (!log) {
            throw IoError("cannot open log: " + opts.log.string());
        }
    }

    FitSession<T> session(std::move(scene), cams, targets, degraded, teacher, cfg);
    for (int i = 0; i < cfg.iters; ++i) {
        const LossReport r = session.step();
        if (log.is_open()) {
            const nlohmann::json line = {
                {"step", i},          {"lr", lr_schedule(i, cfg)}, {"rec", r.rec},
                {"distill", r.distill}, {"content", r.content},    {"image", r.image},
                {"voxel", r.voxel},     {"lumos", r.lumos},        {"total", r.total}};
            log << line.dump() << "\n";
        }
    }
    if (log.is_open()) {
        log.flush();
        manifest.add_output(opts.log);
    }

    ply_write(session.scene(), opts.out);
    manifest.add_output(opts.out);
    return 0;
}

} // namespace

int run_gen_scene(const GenSceneOpts& opts) {
    apply_common(opts.common);
    RunManifest manifest("gen-scene", opts.common.argv);
    manifest.set_config({{"seed", opts.seed},
                         {"n", opts.n_primitives},
                         {"views", opts.views},
                         {"width", opts.width},
                         {"height", opts.height},
                         {"bbox", opts.bbox},
                         {"sh_degree", opts.sh_degree},
                         {"bg", opts.background},
                         {"f64", opts.common.f64}});
    std::filesystem::create_directories(opts.out);
    const int rc = opts.common.f64 ? gen_scene_impl<double>(opts, manifest)
                                   : gen_scene_impl<float>(opts, manifest);
    manifest.write(opts.out);
    return rc;
}

int run_degrade(const DegradeOpts& opts) {
    apply_common(opts.common);
    RunManifest manifest("degrade", opts.common.argv);

    DegradeConfig cfg = opts.mode == "over" ? DegradeConfig::over_exposure_defaults(opts.seed)
                                            : DegradeConfig::low_light_defaults(opts.seed);
    if (opts.mode != "low" && opts.mode != "over") {
        throw InvalidArgument("--mode must be low or over");
    }
    if (opts.exposure_min > 0) {
        cfg.exposure_min = opts.exposure_min;
    }
    if (opts.exposure_max > 0) {
        cfg.exposure_max = opts.exposure_max;
    }
    if (opts.gamma_min > 0) {
        cfg.gamma_min = opts.gamma_min;
    }
    if (opts.gamma_max > 0) {
        cfg.gamma_max = opts.gamma_max;
    }
    manifest.set_config({{"mode", opts.mode},
                         {"seed", opts.seed},
                         {"exposure_min", cfg.exposure_min},
                         {"exposure_max", cfg.exposure_max},
                         {"gamma_min", cfg.gamma_min},
                         {"gamma_max", cfg.gamma_max}});

    // One draw per scene; every view in the directory shares it.
    std::mt19937_64 rng(cfg.seed);
    const DegradeParams params = sample_params(cfg, rng);

    std::filesystem::create_directories(opts.out);
    const auto files = png_files(opts.in);
    if (files.empty()) {
        throw IoError("no .png inputs in " + opts.in.string());
    }
    for (const auto& file : files) {
        manifest.add_input(file);
        const ImageLinear img = image_load(file);
        const ImageLinear out = params.mode == DegradeMode::LowLight ? darken(img, params)
                                                                     : overexpose(img, params);
        const auto out_path = opts.out / file.filename();
        image_save(out, out_path);
        manifest.add_output(out_path);
    }

    const nlohmann::json params_json = {
        {"mode", opts.mode},
        {"seed", opts.seed},
        {"exposure", params.exposure},
        {"gamma", params.gamma},
        {"exposure_range", {cfg.exposure_min, cfg.exposure_max}},
        {"gamma_range", {cfg.gamma_min, cfg.gamma_max}}};
    std::ofstream os(opts.out / "params.json", std::ios::trunc);
    os << params_json.dump(2) << "\n";
    manifest.add_output(opts.out / "params.json");

    manifest.write(opts.out);
    return 0;
}

int run_render(const RenderOpts& opts) {
    apply_common(opts.common);
    RunManifest manifest("render", opts.common.argv);
    manifest.set_config({{"bg", opts.background},
                         {"near", opts.near_clip},
                         {"far", opts.far_clip},
                         {"lowpass", opts.lowpass},
                         {"f64", opts.common.f64}});
    const int rc = opts.common.f64 ? render_impl<double>(opts, manifest)
                                   : render_impl<float>(opts, manifest);
    manifest.write(opts.out);
    return rc;
}

int run_fit(const FitOpts& opts) {
    apply_common(opts.common);
    RunManifest manifest("fit", opts.common.argv);
    manifest.set_config({{"iters", opts.iters},
                         {"seed", opts.seed},
                         {"lr_max", opts.lr_max},
                         {"lr_min", opts.lr_min},
                         {"warmup", opts.warmup},
                         {"lambda_c", opts.lambda_c},
                         {"lambda_i", opts.lambda_i},
                         {"lambda_v", opts.lambda_v},
                         {"omega_distill", opts.omega_distill},
                         {"omega_lumos", opts.omega_lumos},
                         {"rec_weight", opts.rec_weight},
                         {"rec_l1", opts.rec_l1},
                         {"gray_init", opts.gray_init},
                         {"bg", opts.background},
                         {"f64", opts.common.f64}});
    const int rc =
        opts.common.f64 ? fit_impl<double>(opts, manifest) : fit_impl<float>(opts, manifest);
    manifest.write_to_file(opts.out.string() + ".manifest.json");
    return rc;
}

int run_eval(const EvalOpts& opts) {
    apply_common(opts.common);
    RunManifest manifest("eval", opts.common.argv);
    manifest.set_config({{"pred", opts.pred.string()}, {"gt", opts.gt.string()}});

    std::set<std::string> pred_names, gt_names;
    for (const auto& f : png_files(opts.pred)) {
        pred_names.insert(f.filename().string());
    }
    for (const auto& f : png_files(opts.gt)) {
        gt_names.insert(f.filename().string());
    }
    std::vector<std::string> common_names;
    std::set_intersection(pred_names.begin(), pred_names.end(), gt_names.begin(),
                          gt_names.end(), std::back_inserter(common_names));
    if (common_names.empty()) {
        throw IoError("no common .png filenames between --pred and --gt");
    }

    std::vector<Image<float>> pred, gt;
    for (const std::string& name : common_names) {
        manifest.add_input(opts.pred / name);
        manifest.add_input(opts.gt / name);
        // Metrics run on the 8-bit sRGB grid both files already live on.
        pred.push_back(quantize_to_encoded(image_load(opts.pred / name)));
        gt.push_back(quantize_to_encoded(image_load(opts.gt / name)));
    }
    const MetricReport report = metric_report(pred, gt, common_names);

    nlohmann::json views = nlohmann::json::array();
    for (std::size_t i = 0; i < common_names.size(); ++i) {
        views.push_back({{"name", common_names[i]},
                         {"psnr", report.psnr_per_view[i]},
                         {"ssim", report.ssim_per_view[i]}});
    }
    const nlohmann::json doc = {
        {"views", views}, {"psnr_mean", report.psnr_mean}, {"ssim_mean", report.ssim_mean}};
    std::ofstream os(opts.out, std::ios::trunc);
    if (!os) {
        throw IoError("cannot write report: " + opts.out.string());
    }
    os << doc.dump(2) << "\n";
    manifest.add_output(opts.out);
    manifest.write_to_file(opts.out.string() + ".manifest.json");

    std::printf("psnr_mean %.4f ssim_mean %.6f over %zu views\n", report.psnr_mean,
                report.ssim_mean, common_names.size());
    return 0;
}

int run_voxel_stats(const VoxelStatsOpts& opts) {
    apply_common(opts.common);
    RunManifest manifest("voxel-stats", opts.common.argv);
    manifest.set_config({{"voxel_size", opts.voxel_size}, {"origin", opts.origin}});
    manifest.add_input(opts.points);
    manifest.add_input(opts.feats);

    const TensorF points = tensor_read(opts.points);
    const TensorF feats = tensor_read(opts.feats);
    if (points.size() % 3 != 0) {
        throw InvalidArgument("points tensor size must be divisible by 3");
    }
    const std::size_t n = points.size() / 3;
    if (n == 0 || feats.size() % n != 0) {
        throw InvalidArgument("feats tensor does not match the point count");
    }
    const int channels = static_cast<int>(feats.size() / n);

    std::vector<std::uint8_t> mask;
    if (!opts.mask.empty()) {
        manifest.add_input(opts.mask);
        const TensorF m = tensor_read(opts.mask);
        if (m.size() != n) {
            throw InvalidArgument("mask tensor does not match the point count");
        }
        mask.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            mask[i] = m.data[i] != 0.0f ? 1 : 0;
        }
    }

    std::vector<double> pts(points.data.begin(), points.data.end());
    std::vector<double> fts(feats.data.begin(), feats.data.end());
    const auto vr = voxelize<double>(
        std::span<const double>(pts), std::span<const std::uint8_t>(mask),
        std::span<const double>(fts), channels, opts.voxel_size, to_vec3(opts.origin, "--origin"));
    const VoxelStats stats = voxel_stats(vr.grid);

    const nlohmann::json doc = {{"voxel_size", opts.voxel_size},
                                {"origin", opts.origin},
                                {"channels", channels},
                                {"occupied", vr.grid.cell_count()},
                                {"mu", stats.mu},
                                {"sigma", stats.sigma},
                                {"manifest", manifest.to_json()}};
    std::printf("%s\n", doc.dump(2).c_str());
    if (!opts.out.empty()) {
        std::ofstream os(opts.out, std::ios::trunc);
        if (!os) {
            throw IoError("cannot write: " + opts.out.string());
        }
        os << doc.dump(2) << "\n";
    }
    return 0;
}

} // namespace lumos::cli
