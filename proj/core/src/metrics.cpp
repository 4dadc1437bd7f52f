// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/metrics.hpp>

#include <algorithm>
#include <cmath>

namespace lumos {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

// BT.601 luma weights, the usual grayscale conversion for encoded images.
constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

std::vector<double> gaussian_window() {
    std::vector<double> w(kWindow * kWindow);
    const int half = kWindow / 2;
    double sum = 0.0;
    for (int y = 0; y < kWindow; ++y) {
        for (int x = 0; x < kWindow; ++x) {
            const double dy = y - half, dx = x - half;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kWindowSigma * kWindowSigma));
            w[static_cast<std::size_t>(y) * kWindow + x] = v;
            sum += v;
        }
    }
    for (double& v : w) {
        v /= sum;
    }
    return w;
}

template <typename T>
std::vector<double> to_luma(const Image<T>& img) {
    std::vector<double> lum(static_cast<std::size_t>(img.height) * img.width);
    if (img.channels == 1) {
        for (std::size_t i = 0; i < lum.size(); ++i) {
            lum[i] = static_cast<double>(img.data[i]);
        }
        return lum;
    }
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            lum[static_cast<std::size_t>(y) * img.width + x] =
                kLumaR * static_cast<double>(img.at(y, x, 0)) +
                kLumaG * static_cast<double>(img.at(y, x, 1)) +
                kLumaB * static_cast<double>(img.at(y, x, 2));
        }
    }
    return lum;
}

} // namespace

template <typename T>
double psnr(const Image<T>& a, const Image<T>& b) {
    if (!a.same_shape(b)) {
        throw InvalidArgument("psnr shape mismatch");
    }
    if (a.size() == 0) {
        throw InvalidArgument("psnr on empty images");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.size());
    if (mse <= 0.0) {
        return kPsnrCap;
    }
    return std::min(10.0 * std::log10(1.0 / mse), kPsnrCap);
}

template <typename T>
double ssim(const Image<T>& a, const Image<T>& b) {
    if (!a.same_shape(b)) {
        throw InvalidArgument("ssim shape mismatch");
    }
    if (a.height < kWindow || a.width < kWindow) {
        throw InvalidArgument("ssim requires images at least 11x11");
    }
    const std::vector<double> win = gaussian_window();
    const std::vector<double> la = to_luma(a);
    const std::vector<double> lb = to_luma(b);
    const int oh = a.height - kWindow + 1;
    const int ow = a.width - kWindow + 1;
    const double c1 = kK1 * kK1;
    const double c2 = kK2 * kK2;

    double acc = 0.0;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double mu_a = 0.0, mu_b = 0.0;
            double raw_aa = 0.0, raw_bb = 0.0, raw_ab = 0.0;
            for (int wy = 0; wy < kWindow; ++wy) {
                const std::size_t row = static_cast<std::size_t>(y + wy) * a.width + x;
                const std::size_t wrow = static_cast<std::size_t>(wy) * kWindow;
                for (int wx = 0; wx < kWindow; ++wx) {
                    const double w = win[wrow + wx];
                    const double va = la[row + wx];
                    const double vb = lb[row + wx];
                    mu_a += w * va;
                    mu_b += w * vb;
                    raw_aa += w * va * va;
                    raw_bb += w * vb * vb;
                    raw_ab += w * va * vb;
                }
            }
            const double var_a = raw_aa - mu_a * mu_a;
            const double var_b = raw_bb - mu_b * mu_b;
            const double cov = raw_ab - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            acc += num / den;
        }
    }
    return acc / (static_cast<double>(oh) * static_cast<double>(ow));
}

template <typename T>
MetricReport metric_report(const std::vector<Image<T>>& pred, const std::vector<Image<T>>& ref,
                           const std::vector<std::string>& names) {
    if (pred.size() != ref.size() || pred.empty()) {
        throw InvalidArgument("metric_report needs matched non-empty image lists");
    }
    MetricReport report;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        report.psnr_per_view.push_back(psnr(pred[i], ref[i]));
        report.ssim_per_view.push_back(ssim(pred[i], ref[i]));
        report.names.push_back(i < names.size() ? names[i] : "view_" + std::to_string(i));
    }
    for (double v : report.psnr_per_view) {
        report.psnr_mean += v;
    }
    for (double v : report.ssim_per_view) {
        report.ssim_mean += v;
    }
    report.psnr_mean /= static_cast<double>(report.psnr_per_view.size());
    report.ssim_mean /= static_cast<double>(report.ssim_per_view.size());
    return report;
}

template double psnr(const Image<float>&, const Image<float>&);
template double psnr(const Image<double>&, const Image<double>&);
template double ssim(const Image<float>&, const Image<float>&);
template double ssim(const Image<double>&, const Image<double>&);
template MetricReport metric_report(const std::vector<Image<float>>&,
                                    const std::vector<Image<float>>&,
                                    const std::vector<std::string>&);
template MetricReport metric_report(const std::vector<Image<double>>&,
                                    const std::vector<Image<double>>&,
                                    const std::vector<std::string>&);

} // namespace lumos
