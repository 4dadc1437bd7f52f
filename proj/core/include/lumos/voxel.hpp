// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include <lumos/errors.hpp>

namespace lumos {

inline constexpr int kVoxelScales = 5;
inline constexpr double kVoxelStatsEps = 1e-8; // inside the std sqrt

/// Sparse voxel grid holding per-cell mean features. Cells are stored sorted
/// by integer key (x, y, z lexicographic) so enumeration order is canonical.
template <typename T>
struct VoxelGrid {
    double voxel_size = 1.0;
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    int channels = 0;
    std::vector<std::array<std::int64_t, 3>> keys;
    std::vector<T> features; // cell-major, channels innermost (means)
    std::vector<std::int32_t> counts;

    std::size_t cell_count() const { return keys.size(); }
};

template <typename T>
struct VoxelizeResult {
    VoxelGrid<T> grid;
    // Per input point: ordinal of its cell, or -1 for masked-out points.
    std::vector<std::int64_t> assignment;
};

/// Groups points by floor((p - origin) / voxel_size) per axis and averages
/// the features of all points landing in the same cell. mask may be empty
/// (all valid). points is n x 3, feats n x channels.
template <typename T>
VoxelizeResult<T> voxelize(std::span<const T> points, std::span<const std::uint8_t> mask,
                           std::span<const T> feats, int channels, double voxel_size,
                           const Eigen::Vector3d& origin);

/// Channel-wise mean and population standard deviation over occupied cells.
struct VoxelStats {
    std::vector<double> mu;
    std::vector<double> sigma;
};

template <typename T>
VoxelStats voxel_stats(const VoxelGrid<T>& grid);

struct VoxelStatsGrad {
    std::vector<double> mu;
    std::vector<double> sigma;
};

/// dL/d(cell features) from cotangents on the stats.
template <typename T>
std::vector<T> voxel_stats_backward(const VoxelGrid<T>& grid, const VoxelStatsGrad& g_stats);

/// dL/d(point features) from cotangents on the cell means; accumulates into
/// grad_feats (n x channels).
template <typename T>
void voxelize_backward(const VoxelizeResult<T>& vr, std::span<const T> grad_cell_features,
                       std::span<T> grad_feats);

/// sum_i w_i * (|mu_r - mu_d|_1 + |sigma_r - sigma_d|_1) over the five
/// scales. Weights must be non-negative; renormalized to sum 1 with a
/// warning when they do not. grad_out, when given, receives d/d(mu_r),
/// d/d(sigma_r) per scale.
double voxel_loss(const std::array<VoxelStats, kVoxelScales>& restored,
                  const std::array<VoxelStats, kVoxelScales>& teacher,
                  std::array<double, kVoxelScales> weights,
                  std::array<VoxelStatsGrad, kVoxelScales>* grad_out = nullptr);

} // namespace lumos
