// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include <lumos/camera.hpp>
#include <lumos/features.hpp>
#include <lumos/geometry.hpp>
#include <lumos/losses.hpp>
#include <lumos/renderer.hpp>
#include <lumos/scene.hpp>
#include <lumos/voxel.hpp>

namespace lumos {

struct TrainableFlags {
    bool center = true;
    bool opacity = true;
    bool rotation = true;
    bool scale = true;
    bool sh = true;
};

/// Per-group multipliers on the scheduled learning rate. Direct primitive
/// fitting needs faster color/shape steps than the base rate; these defaults
/// follow common splat-optimization practice and are fully configurable.
struct LrScales {
    double center = 1.0;
    double opacity = 25.0;
    double rotation = 5.0;
    double scale = 25.0;
    double sh = 25.0;
};

struct FitConfig {
    int iters = 1000;
    double lr_max = 2e-4;
    double lr_min = 0.0;
    // Linear warmup length; negative selects the default min(1000, iters/30).
    int warmup = -1;

    LumosWeights lumos_weights;
    ObjectiveWeights objective_weights;
    TrainableFlags trainable;
    LrScales lr_scales;
    bool rec_l1 = false;
    // Multiplier on the reconstruction term. The objective keeps rec
    // unweighted by default; zeroing this switches every term off at once.
    double rec_weight = 1.0;

    std::array<double, 2> content_weights = {0.5, 0.5};
    std::array<double, kVoxelScales> voxel_scale_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
    // Base voxel edge at the finest scale; <= 0 derives it as 1/64 of the
    // teacher point cloud's bounding-box diagonal. Scale i uses base * 2^i.
    double voxel_base_size = 0.0;
    // Student pixels only join the distillation/voxel masks when the
    // rendered alpha clears this, keeping depth normalization well away from
    // its epsilon regime.
    double student_alpha_min = 0.05;

    RenderOptions render;
    ExtractorSpec extractor;
    std::uint64_t seed = 0;

    int resolved_warmup() const;
    void validate() const;
};

/// Linear warmup to lr_max, then cosine annealing to lr_min.
double lr_schedule(int step, const FitConfig& cfg);

/// Optimization state for one scene against fixed multi-view targets.
/// Teacher inputs are frozen: their pyramids and voxel statistics are
/// computed once at construction.
template <typename T>
class FitSession {
public:
    FitSession(GaussianScene init_scene, std::vector<CameraView> views,
               std::vector<Image<T>> targets, std::vector<Image<T>> degraded,
               PointMapT<T> teacher_points, FitConfig cfg);
    ~FitSession();
    FitSession(FitSession&&) noexcept;
    FitSession& operator=(FitSession&&) noexcept;

    /// One optimization step: render all views, evaluate the full objective,
    /// backpropagate, apply the adaptive-moment update and re-project the
    /// scene onto its constraint set.
    LossReport step();

    GaussianScene run(); // cfg.iters steps, returns the final scene

    const GaussianScene& scene() const;
    const std::vector<LossReport>& history() const;
    int current_step() const;
    const FitConfig& config() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper: builds a session, runs cfg.iters steps.
template <typename T>
std::pair<GaussianScene, std::vector<LossReport>> fit_scene(
    const GaussianScene& init_scene, const std::vector<CameraView>& views,
    const std::vector<Image<T>>& targets, const std::vector<Image<T>>& degraded,
    const PointMapT<T>& teacher_points, const FitConfig& cfg);

} // namespace lumos
