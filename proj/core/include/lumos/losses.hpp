// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <lumos/image.hpp>

namespace lumos {

/// Weights of the three-part consistency objective; defaults 0.1 / 1.0 / 0.01.
struct LumosWeights {
    double lambda_c = 0.1;
    double lambda_i = 1.0;
    double lambda_v = 0.01;
};

/// Weights of the total objective on top of the reconstruction term.
struct ObjectiveWeights {
    double omega_distill = 1.0;
    double omega_lumos = 1.0;
};

/// Per-term scalar values for one optimization step.
struct LossReport {
    double rec = 0.0;
    double distill = 0.0;
    double content = 0.0;
    double image = 0.0;
    double voxel = 0.0;
    double lumos = 0.0;
    double total = 0.0;

    /// The two linear identities the report must satisfy:
    /// lumos == lc*content + li*image + lv*voxel and
    /// total == rec + od*distill + ol*lumos, each within tol.
    bool consistent(const LumosWeights& lw, const ObjectiveWeights& ow,
                    double tol = 1e-6) const;
    bool all_finite() const;
};

template <typename T>
struct StackLossResult {
    double value = 0.0;
    std::vector<Image<T>> grad; // per view, same shapes as the inputs
};

/// Mean absolute difference over all of views, pixels and channels
/// (the 1/(B S H W C) normalization with B = 1). Ties get subgradient 0.
template <typename T>
StackLossResult<T> image_loss(const std::vector<Image<T>>& restored,
                              const std::vector<Image<T>>& reference, bool with_grad = true);

/// Baseline reconstruction loss: mean squared error over the same index set,
/// or mean absolute error when l1 is set.
template <typename T>
StackLossResult<T> rec_loss(const std::vector<Image<T>>& rendered,
                            const std::vector<Image<T>>& target, bool l1 = false,
                            bool with_grad = true);

/// lambda_c * content + lambda_i * image + lambda_v * voxel.
double lumos_loss(double content, double image, double voxel, const LumosWeights& w);

/// rec + omega_distill * distill + omega_lumos * lumos.
double total_loss(double rec, double distill, double lumos, const ObjectiveWeights& w);

} // namespace lumos
