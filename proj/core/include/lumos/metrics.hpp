// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <lumos/image.hpp>

namespace lumos {

inline constexpr double kPsnrCap = 99.0;

/// 10 * log10(1 / MSE) over all pixels and channels, capped at 99 dB.
/// Inputs are encoded-domain images with peak 1 (use quantize_to_encoded to
/// reproduce how PNG outputs are scored).
template <typename T>
double psnr(const Image<T>& a, const Image<T>& b);

/// Mean local SSIM on luminance over valid window positions, 11x11 Gaussian
/// window sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1.
template <typename T>
double ssim(const Image<T>& a, const Image<T>& b);

struct MetricReport {
    std::vector<std::string> names;
    std::vector<double> psnr_per_view;
    std::vector<double> ssim_per_view;
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
};

/// Scores per-view prediction/reference pairs (encoded domain) and averages.
template <typename T>
MetricReport metric_report(const std::vector<Image<T>>& pred,
                           const std::vector<Image<T>>& ref,
                           const std::vector<std::string>& names = {});

} // namespace lumos
