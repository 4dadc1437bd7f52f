// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <lumos/errors.hpp>

#include "commands.hpp"

namespace {

using namespace lumos;
using namespace lumos::cli;

void add_common(CLI::App* cmd, CommonOpts& common) {
    cmd->add_option("--threads", common.threads, "Worker thread cap (0 = hardware)");
    cmd->add_flag("--f64", common.f64, "Run numerics in 64-bit for oracle checks");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Explicit 3D Gaussian scene toolkit: synthesize, degrade, render, fit, eval"};
    app.require_subcommand(1);

    std::vector<std::string> argv_copy(argv, argv + argc);

    GenSceneOpts gen;
    gen.common.argv = argv_copy;
    CLI::App* gen_cmd = app.add_subcommand("gen-scene", "Generate a synthetic scene fixture");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--n", gen.n_primitives, "Primitive count");
    gen_cmd->add_option("--views", gen.views, "Ring camera count (clamped to [4,8])");
    gen_cmd->add_option("--width", gen.width, "Image width");
    gen_cmd->add_option("--height", gen.height, "Image height");
    gen_cmd->add_option("--bbox", gen.bbox, "Scene box x0,y0,z0,x1,y1,z1")->expected(6)->delimiter(',');
    gen_cmd->add_option("--sh-degree", gen.sh_degree, "SH degree in [0,3]");
    gen_cmd->add_option("--bg", gen.background, "Background RGB")->expected(3)->delimiter(',');
    gen_cmd->add_option("--alpha-min", gen.alpha_min, "Alpha gate for teacher points");
    add_common(gen_cmd, gen.common);

    DegradeOpts deg;
    deg.common.argv = argv_copy;
    CLI::App* deg_cmd = app.add_subcommand("degrade", "Synthesize low-light/over-exposed views");
    deg_cmd->add_option("--in", deg.in, "Input PNG directory")->required();
    deg_cmd->add_option("--out", deg.out, "Output directory")->required();
    deg_cmd->add_option("--mode", deg.mode, "low | over")->required();
    deg_cmd->add_option("--seed", deg.seed, "RNG seed");
    deg_cmd->add_option("--exposure-min", deg.exposure_min, "Override exposure lower bound");
    deg_cmd->add_option("--exposure-max", deg.exposure_max, "Override exposure upper bound");
    deg_cmd->add_option("--gamma-min", deg.gamma_min, "Override gamma lower bound");
    deg_cmd->add_option("--gamma-max", deg.gamma_max, "Override gamma upper bound");
    add_common(deg_cmd, deg.common);

    RenderOpts ren;
    ren.common.argv = argv_copy;
    CLI::App* ren_cmd = app.add_subcommand("render", "Rasterize a splat scene");
    ren_cmd->add_option("--scene", ren.scene, "Input .ply scene")->required();
    ren_cmd->add_option("--cameras", ren.cameras, "Camera .json")->required();
    ren_cmd->add_option("--out", ren.out, "Output directory")->required();
    ren_cmd->add_option("--bg", ren.background, "Background RGB")->expected(3)->delimiter(',');
    ren_cmd->add_option("--near", ren.near_clip, "Near clip depth");
    ren_cmd->add_option("--far", ren.far_clip, "Far clip depth");
    ren_cmd->add_option("--lowpass", ren.lowpass, "Screen-space dilation (px^2)");
    add_common(ren_cmd, ren.common);

    FitOpts fit;
    fit.common.argv = argv_copy;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Optimize a scene against multi-view targets");
    fit_cmd->add_option("--scene", fit.scene, "Initial .ply scene")->required();
    fit_cmd->add_option("--cameras", fit.cameras, "Camera .json")->required();
    fit_cmd->add_option("--targets", fit.targets, "Clean target PNG directory")->required();
    fit_cmd->add_option("--degraded", fit.degraded, "Degraded context PNG directory");
    fit_cmd->add_option("--teacher-points", fit.teacher_points, "Teacher point map .lumt")
        ->required();
    fit_cmd->add_option("--teacher-mask", fit.teacher_mask, "Teacher mask .lumt");
    fit_cmd->add_option("--out", fit.out, "Fitted .ply output")->required();
    fit_cmd->add_option("--log", fit.log, "JSON-lines loss log");
    fit_cmd->add_option("--iters", fit.iters, "Step count");
    fit_cmd->add_option("--seed", fit.seed, "RNG seed");
    fit_cmd->add_option("--lr-max", fit.lr_max, "Peak learning rate");
    fit_cmd->add_option("--lr-min", fit.lr_min, "Final learning rate");
    fit_cmd->add_option("--warmup", fit.warmup, "Warmup steps (-1 = iters/30 capped at 1000)");
    fit_cmd->add_option("--lambda-c", fit.lambda_c, "Content term weight");
    fit_cmd->add_option("--lambda-i", fit.lambda_i, "Image term weight");
    fit_cmd->add_option("--lambda-v", fit.lambda_v, "Voxel term weight");
    fit_cmd->add_option("--omega-distill", fit.omega_distill, "Distillation weight");
    fit_cmd->add_option("--omega-lumos", fit.omega_lumos, "Consistency block weight");
    fit_cmd->add_option("--rec-weight", fit.rec_weight, "Reconstruction term weight");
    fit_cmd->add_flag("--rec-l1", fit.rec_l1, "Use l1 reconstruction instead of MSE");
    fit_cmd->add_flag("--freeze-center", fit.freeze_center, "Do not optimize centers");
    fit_cmd->add_flag("--freeze-opacity", fit.freeze_opacity, "Do not optimize opacities");
    fit_cmd->add_flag("--freeze-rotation", fit.freeze_rotation, "Do not optimize rotations");
    fit_cmd->add_flag("--freeze-scale", fit.freeze_scale, "Do not optimize scales");
    fit_cmd->add_flag("--freeze-sh", fit.freeze_sh, "Do not optimize SH colors");
    fit_cmd->add_flag("--gray-init", fit.gray_init, "Reset all SH colors to neutral gray");
    fit_cmd->add_option("--bg", fit.background, "Render background RGB")->expected(3)->delimiter(',');
    fit_cmd->add_option("--alpha-min", fit.alpha_min, "Student alpha gate for distillation");
    fit_cmd->add_option("--voxel-base-size", fit.voxel_base_size,
                        "Finest voxel edge (<=0: bbox diagonal / 64)");
    fit_cmd->add_option("--lr-scale-center", fit.lr_scale_center, "LR multiplier: centers");
    fit_cmd->add_option("--lr-scale-opacity", fit.lr_scale_opacity, "LR multiplier: opacity");
    fit_cmd->add_option("--lr-scale-rotation", fit.lr_scale_rotation, "LR multiplier: rotation");
    fit_cmd->add_option("--lr-scale-scale", fit.lr_scale_scale, "LR multiplier: scale");
    fit_cmd->add_option("--lr-scale-sh", fit.lr_scale_sh, "LR multiplier: SH colors");
    fit_cmd->add_option("--extractor", fit.extractor, "fixed | external");
    fit_cmd->add_option("--weights", fit.extractor_weights, "External extractor manifest");
    add_common(fit_cmd, fit.common);

    EvalOpts ev;
    ev.common.argv = argv_copy;
    CLI::App* ev_cmd = app.add_subcommand("eval", "PSNR/SSIM against ground truth");
    ev_cmd->add_option("--pred", ev.pred, "Prediction PNG directory")->required();
    ev_cmd->add_option("--gt", ev.gt, "Ground-truth PNG directory")->required();
    ev_cmd->add_option("--out", ev.out, "Report JSON path")->required();
    add_common(ev_cmd, ev.common);

    VoxelStatsOpts vx;
    vx.common.argv = argv_copy;
    CLI::App* vx_cmd = app.add_subcommand("voxel-stats", "Voxel-pooled feature statistics");
    vx_cmd->add_option("--points", vx.points, "Point tensor (.lumt, last dim 3)")->required();
    vx_cmd->add_option("--feats", vx.feats, "Feature tensor (.lumt)")->required();
    vx_cmd->add_option("--mask", vx.mask, "Optional 0/1 mask tensor");
    vx_cmd->add_option("--voxel-size", vx.voxel_size, "Voxel edge length")->required();
    vx_cmd->add_option("--origin", vx.origin, "Grid origin x,y,z")->expected(3)->delimiter(',');
    vx_cmd->add_option("--out", vx.out, "Optional JSON output file");
    add_common(vx_cmd, vx.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the usage text to stderr
        return 1;
    }

    try {
        if (*gen_cmd) {
            return run_gen_scene(gen);
        }
        if (*deg_cmd) {
            return run_degrade(deg);
        }
        if (*ren_cmd) {
            return run_render(ren);
        }
        if (*fit_cmd) {
            return run_fit(fit);
        }
        if (*ev_cmd) {
            return run_eval(ev);
        }
        if (*vx_cmd) {
            return run_voxel_stats(vx);
        }
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
