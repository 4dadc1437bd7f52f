// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/voxel.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace lumos {

template <typename T>
VoxelizeResult<T> voxelize(std::span<const T> points, std::span<const std::uint8_t> mask,
                           std::span<const T> feats, int channels, double voxel_size,
                           const Eigen::Vector3d& origin) {
    if (!(voxel_size > 0.0)) {
        throw InvalidArgument("voxel_size must be positive");
    }
    if (channels < 1) {
        throw InvalidArgument("feature channel count must be >= 1");
    }
    if (points.size() % 3 != 0) {
        throw InvalidArgument("points span must hold n x 3 values");
    }
    const std::size_t n = points.size() / 3;
    if (feats.size() != n * static_cast<std::size_t>(channels)) {
        throw InvalidArgument("feats span does not match point count");
    }
    if (!mask.empty() && mask.size() != n) {
        throw InvalidArgument("mask span does not match point count");
    }

    struct Entry {
        std::array<std::int64_t, 3> key;
        std::size_t point;
    };
    std::vector<Entry> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        Entry e;
        e.point = i;
        for (int a = 0; a < 3; ++a) {
            const double q =
                (static_cast<double>(points[i * 3 + a]) - origin[a]) / voxel_size;
            e.key[a] = static_cast<std::int64_t>(std::floor(q));
        }
        entries.push_back(e);
    }
    if (entries.empty()) {
        throw InvalidArgument("voxelize has no valid points");
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.key != b.key) {
            return a.key < b.key;
        }
        return a.point < b.point;
    });

    VoxelizeResult<T> out;
    out.grid.voxel_size = voxel_size;
    out.grid.origin = origin;
    out.grid.channels = channels;
    out.assignment.assign(n, -1);

    std::vector<double> acc(static_cast<std::size_t>(channels), 0.0);
    std::size_t run_begin = 0;
    const auto flush = [&](std::size_t run_end) {
        const std::size_t count = run_end - run_begin;
        out.grid.keys.push_back(entries[run_begin].key);
        out.grid.counts.push_back(static_cast<std::int32_t>(count));
        for (int c = 0; c < channels; ++c) {
            out.grid.features.push_back(static_cast<T>(acc[static_cast<std::size_t>(c)] /
                                                       static_cast<double>(count)));
            acc[static_cast<std::size_t>(c)] = 0.0;
        }
    };
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i > 0 && entries[i].key != entries[run_begin].key) {
            flush(i);
            run_begin = i;
        }
        const std::size_t p = entries[i].point;
        out.assignment[p] = static_cast<std::int64_t>(out.grid.keys.size());
        for (int c = 0; c < channels; ++c) {
            acc[static_cast<std::size_t>(c)] +=
                static_cast<double>(feats[p * static_cast<std::size_t>(channels) +
                                          static_cast<std::size_t>(c)]);
        }
    }
    flush(entries.size());
    return out;
}

template <typename T>
VoxelStats voxel_stats(const VoxelGrid<T>& grid) {
    const std::size_t n = grid.cell_count();
    if (n == 0) {
        throw InvalidArgument("voxel_stats on an empty grid");
    }
    const int c = grid.channels;
    VoxelStats stats;
    stats.mu.assign(static_cast<std::size_t>(c), 0.0);
    stats.sigma.assign(static_cast<std::size_t>(c), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            stats.mu[static_cast<std::size_t>(ch)] += static_cast<double>(
                grid.features[i * static_cast<std::size_t>(c) + static_cast<std::size_t>(ch)]);
        }
    }
    for (int ch = 0; ch < c; ++ch) {
        stats.mu[static_cast<std::size_t>(ch)] /= static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const double d =
                static_cast<double>(
                    grid.features[i * static_cast<std::size_t>(c) +
                                  static_cast<std::size_t>(ch)]) -
                stats.mu[static_cast<std::size_t>(ch)];
            stats.sigma[static_cast<std::size_t>(ch)] += d * d;
        }
    }
    for (int ch = 0; ch < c; ++ch) {
        stats.sigma[static_cast<std::size_t>(ch)] = std::sqrt(
            stats.sigma[static_cast<std::size_t>(ch)] / static_cast<double>(n) + kVoxelStatsEps);
    }
    return stats;
}

template <typename T>
std::vector<T> voxel_stats_backward(const VoxelGrid<T>& grid, const VoxelStatsGrad& g_stats) {
    const std::size_t n = grid.cell_count();
    const int c = grid.channels;
    if (n == 0) {
        throw InvalidArgument("voxel_stats_backward on an empty grid");
    }
    if (g_stats.mu.size() != static_cast<std::size_t>(c) ||
        g_stats.sigma.size() != static_cast<std::size_t>(c)) {
        throw InvalidArgument("stats gradient channel mismatch");
    }
    const VoxelStats stats = voxel_stats(grid);
    std::vector<T> grad(n * static_cast<std::size_t>(c), T(0));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t chs = static_cast<std::size_t>(ch);
            const double f = static_cast<double>(grid.features[i * c + chs]);
            double g = g_stats.mu[chs] * inv_n;
            // sigma = sqrt(var + eps): d sigma / d f_i = (f_i - mu) / (n sigma)
            g += g_stats.sigma[chs] * (f - stats.mu[chs]) * inv_n / stats.sigma[chs];
            grad[i * c + chs] = static_cast<T>(g);
        }
    }
    return grad;
}

template <typename T>
void voxelize_backward(const VoxelizeResult<T>& vr, std::span<const T> grad_cell_features,
                       std::span<T> grad_feats) {
    const int c = vr.grid.channels;
    if (grad_cell_features.size() != vr.grid.cell_count() * static_cast<std::size_t>(c)) {
        throw InvalidArgument("cell gradient size mismatch");
    }
    if (grad_feats.size() != vr.assignment.size() * static_cast<std::size_t>(c)) {
        throw InvalidArgument("point gradient size mismatch");
    }
    for (std::size_t p = 0; p < vr.assignment.size(); ++p) {
        const std::int64_t cell = vr.assignment[p];
        if (cell < 0) {
            continue;
        }
        const double inv_count =
            1.0 / static_cast<double>(vr.grid.counts[static_cast<std::size_t>(cell)]);
        for (int ch = 0; ch < c; ++ch) {
            grad_feats[p * static_cast<std::size_t>(c) + static_cast<std::size_t>(ch)] +=
                static_cast<T>(static_cast<double>(
                                   grad_cell_features[static_cast<std::size_t>(cell) * c +
                                                      static_cast<std::size_t>(ch)]) *
                               inv_count);
        }
    }
}

double voxel_loss(const std::array<VoxelStats, kVoxelScales>& restored,
                  const std::array<VoxelStats, kVoxelScales>& teacher,
                  std::array<double, kVoxelScales> weights,
                  std::array<VoxelStatsGrad, kVoxelScales>* grad_out) {
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw InvalidArgument("voxel scale weights must be non-negative");
        }
        wsum += w;
    }
    if (!(wsum > 0.0)) {
        throw InvalidArgument("voxel scale weights must not all be zero");
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        std::fprintf(stderr, "[lumos] voxel scale weights renormalized (sum was %g)\n", wsum);
        for (double& w : weights) {
            w /= wsum;
        }
    }

    double total = 0.0;
    for (int i = 0; i < kVoxelScales; ++i) {
        const std::size_t is = static_cast<std::size_t>(i);
        const VoxelStats& r = restored[is];
        const VoxelStats& t = teacher[is];
        if (r.mu.size() != t.mu.size() || r.sigma.size() != t.sigma.size()) {
            throw InvalidArgument("voxel stats channel mismatch between branches");
        }
        VoxelStatsGrad* g = nullptr;
        if (grad_out) {
            (*grad_out)[is].mu.assign(r.mu.size(), 0.0);
            (*grad_out)[is].sigma.assign(r.sigma.size(), 0.0);
            g = &(*grad_out)[is];
        }
        const double w = weights[is];
        for (std::size_t ch = 0; ch < r.mu.size(); ++ch) {
            const double dm = r.mu[ch] - t.mu[ch];
            const double ds = r.sigma[ch] - t.sigma[ch];
            total += w * (std::abs(dm) + std::abs(ds));
            if (g) {
                if (dm != 0.0) {
                    g->mu[ch] = w * (dm > 0.0 ? 1.0 : -1.0);
                }
                if (ds != 0.0) {
                    g->sigma[ch] = w * (ds > 0.0 ? 1.0 : -1.0);
                }
            }
        }
    }
    return total;
}

template VoxelizeResult<float> voxelize(std::span<const float>, std::span<const std::uint8_t>,
                                        std::span<const float>, int, double,
                                        const Eigen::Vector3d&);
template VoxelizeResult<double> voxelize(std::span<const double>, std::span<const std::uint8_t>,
                                         std::span<const double>, int, double,
                                         const Eigen::Vector3d&);
template VoxelStats voxel_stats(const VoxelGrid<float>&);
template VoxelStats voxel_stats(const VoxelGrid<double>&);
template std::vector<float> voxel_stats_backward(const VoxelGrid<float>&, const VoxelStatsGrad&);
template std::vector<double> voxel_stats_backward(const VoxelGrid<double>&,
                                                  const VoxelStatsGrad&);
template void voxelize_backward(const VoxelizeResult<float>&, std::span<const float>,
                                std::span<float>);
template void voxelize_backward(const VoxelizeResult<double>&, std::span<const double>,
                                std::span<double>);

} // namespace lumos
