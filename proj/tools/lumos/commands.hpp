// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lumos::cli {

struct CommonOpts {
    int threads = 0;  // 0 = hardware default
    bool f64 = false; // 64-bit numerics for oracle runs
    std::vector<std::string> argv;
};

struct GenSceneOpts {
    CommonOpts common;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    int n_primitives = 300;
    int views = 6;
    int width = 128;
    int height = 128;
    std::vector<double> bbox = {-1, -1, -1, 1, 1, 1};
    int sh_degree = 1;
    std::vector<double> background = {0.0, 0.0, 0.0};
    double alpha_min = 0.05;
};

struct DegradeOpts {
    CommonOpts common;
    std::filesystem::path in;
    std::filesystem::path out;
    std::string mode = "low";
    std::uint64_t seed = 0;
    double exposure_min = -1.0; // <0 = mode default
    double exposure_max = -1.0;
    double gamma_min = -1.0;
    double gamma_max = -1.0;
};

struct RenderOpts {
    CommonOpts common;
    std::filesystem::path scene;
    std::filesystem::path cameras;
    std::filesystem::path out;
    std::vector<double> background = {0.0, 0.0, 0.0};
    double near_clip = 0.01;
    double far_clip = 1e4;
    double lowpass = 0.3;
};

struct FitOpts {
    CommonOpts common;
    std::filesystem::path scene;
    std::filesystem::path cameras;
    std::filesystem::path targets;
    std::filesystem::path degraded; // optional
    std::filesystem::path teacher_points;
    std::filesystem::path teacher_mask; // optional
    std::filesystem::path out;
    std::filesystem::path log; // optional jsonl
    int iters = 1000;
    std::uint64_t seed = 0;
    double lr_max = 2e-4;
    double lr_min = 0.0;
    int warmup = -1;
    double lambda_c = 0.1;
    double lambda_i = 1.0;
    double lambda_v = 0.01;
    double omega_distill = 1.0;
    double omega_lumos = 1.0;
    double rec_weight = 1.0;
    bool rec_l1 = false;
    bool freeze_center = false;
    bool freeze_opacity = false;
    bool freeze_rotation = false;
    bool freeze_scale = false;
    bool freeze_sh = false;
    bool gray_init = false;
    std::vector<double> background = {0.0, 0.0, 0.0};
    double alpha_min = 0.05;
    double voxel_base_size = 0.0;
    double lr_scale_center = 1.0;
    double lr_scale_opacity = 25.0;
    double lr_scale_rotation = 5.0;
    double lr_scale_scale = 25.0;
    double lr_scale_sh = 25.0;
    std::string extractor = "fixed";
    std::filesystem::path extractor_weights;
};

struct EvalOpts {
    CommonOpts common;
    std::filesystem::path pred;
    std::filesystem::path gt;
    std::filesystem::path out;
};

struct VoxelStatsOpts {
    CommonOpts common;
    std::filesystem::path points;
    std::filesystem::path feats;
    std::filesystem::path mask; // optional
    double voxel_size = 0.0;
    std::vector<double> origin = {0.0, 0.0, 0.0};
    std::filesystem::path out; // optional JSON file
};

int run_gen_scene(const GenSceneOpts& opts);
int run_degrade(const DegradeOpts& opts);
int run_render(const RenderOpts& opts);
int run_fit(const FitOpts& opts);
int run_eval(const EvalOpts& opts);
int run_voxel_stats(const VoxelStatsOpts& opts);

} // namespace lumos::cli
