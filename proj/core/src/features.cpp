// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/features.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace lumos {

namespace {

// Rec.709 luminance weights for linear-light RGB.
constexpr double kLumR = 0.2126;
constexpr double kLumG = 0.7152;
constexpr double kLumB = 0.0722;
constexpr double kStdEps = 1e-12; // inside the local-std sqrt

template <typename T>
Image<T> avgpool2(const Image<T>& in) {
    const int oh = (in.height + 1) / 2;
    const int ow = (in.width + 1) / 2;
    Image<T> out(oh, ow, in.channels);
    for (int y = 0; y < oh; ++y) {
        const int y1 = std::min(2 * y + 1, in.height - 1);
        for (int x = 0; x < ow; ++x) {
            const int x1 = std::min(2 * x + 1, in.width - 1);
            for (int c = 0; c < in.channels; ++c) {
                double acc = 0.0;
                int count = 0;
                for (int yy = 2 * y; yy <= y1; ++yy) {
                    for (int xx = 2 * x; xx <= x1; ++xx) {
                        acc += static_cast<double>(in.at(yy, xx, c));
                        ++count;
                    }
                }
                out.at(y, x, c) = static_cast<T>(acc / count);
            }
        }
    }
    return out;
}

template <typename T>
void avgpool2_backward(const Image<T>& grad_out, int in_h, int in_w, Image<T>& grad_in) {
    for (int y = 0; y < grad_out.height; ++y) {
        const int y1 = std::min(2 * y + 1, in_h - 1);
        for (int x = 0; x < grad_out.width; ++x) {
            const int x1 = std::min(2 * x + 1, in_w - 1);
            const int count = (y1 - 2 * y + 1) * (x1 - 2 * x + 1);
            for (int c = 0; c < grad_out.channels; ++c) {
                const T g = grad_out.at(y, x, c) / static_cast<T>(count);
                for (int yy = 2 * y; yy <= y1; ++yy) {
                    for (int xx = 2 * x; xx <= x1; ++xx) {
                        grad_in.at(yy, xx, c) += g;
                    }
                }
            }
        }
    }
}

template <typename T>
std::vector<T> luminance(const Image<T>& rgb) {
    std::vector<T> lum(static_cast<std::size_t>(rgb.height) * rgb.width);
    for (int y = 0; y < rgb.height; ++y) {
        for (int x = 0; x < rgb.width; ++x) {
            lum[static_cast<std::size_t>(y) * rgb.width + x] =
                static_cast<T>(kLumR) * rgb.at(y, x, 0) + static_cast<T>(kLumG) * rgb.at(y, x, 1) +
                static_cast<T>(kLumB) * rgb.at(y, x, 2);
        }
    }
    return lum;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Fixed-pyramid channels: 0 luminance, 1 horizontal gradient (central
// difference in x), 2 vertical gradient, 3 local 3x3 std of luminance.
template <typename T>
FeatureLevel<T> fixed_features(const Image<T>& rgb) {
    const int h = rgb.height, w = rgb.width;
    FeatureLevel<T> f(h, w, 4);
    const std::vector<T> lum = luminance(rgb);
    auto at = [&](int y, int x) -> T {
        return lum[static_cast<std::size_t>(clampi(y, 0, h - 1)) * w + clampi(x, 0, w - 1)];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const T l = at(y, x);
            f.at(y, x, 0) = l;
            f.at(y, x, 1) = T(0.5) * (at(y, x + 1) - at(y, x - 1));
            f.at(y, x, 2) = T(0.5) * (at(y + 1, x) - at(y - 1, x));
            double sum = 0.0, sum2 = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const double v = static_cast<double>(at(y + dy, x + dx));
                    sum += v;
                    sum2 += v * v;
                }
            }
            const double mean = sum / 9.0;
            const double var = std::max(sum2 / 9.0 - mean * mean, 0.0);
            f.at(y, x, 3) = static_cast<T>(std::sqrt(var + kStdEps));
        }
    }
    return f;
}

// Scatters feature cotangents back to the level's RGB image.
template <typename T>
void fixed_features_backward(const Image<T>& rgb, const FeatureLevel<T>& grad_f,
                             Image<T>& grad_rgb) {
    const int h = rgb.height, w = rgb.width;
    const std::vector<T> lum = luminance(rgb);
    auto lum_at = [&](int y, int x) -> double {
        return static_cast<double>(
            lum[static_cast<std::size_t>(clampi(y, 0, h - 1)) * w + clampi(x, 0, w - 1)]);
    };
    std::vector<double> g_lum(lum.size(), 0.0);
    auto scatter = [&](int y, int x, double g) {
        g_lum[static_cast<std::size_t>(clampi(y, 0, h - 1)) * w + clampi(x, 0, w - 1)] += g;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            scatter(y, x, static_cast<double>(grad_f.at(y, x, 0)));
            const double gx = static_cast<double>(grad_f.at(y, x, 1));
            if (gx != 0.0) {
                scatter(y, x + 1, 0.5 * gx);
                scatter(y, x - 1, -0.5 * gx);
            }
            const double gy = static_cast<double>(grad_f.at(y, x, 2));
            if (gy != 0.0) {
                scatter(y + 1, x, 0.5 * gy);
                scatter(y - 1, x, -0.5 * gy);
            }
            const double gs = static_cast<double>(grad_f.at(y, x, 3));
            if (gs != 0.0) {
                double sum = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        sum += lum_at(y + dy, x + dx);
                    }
                }
                const double mean = sum / 9.0;
                double var = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const double d = lum_at(y + dy, x + dx) - mean;
                        var += d * d;
                    }
                }
                var /= 9.0;
                const double stddev = std::sqrt(var + kStdEps);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const double d = lum_at(y + dy, x + dx) - mean;
                        scatter(y + dy, x + dx, gs * d / (9.0 * stddev));
                    }
                }
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double g = g_lum[static_cast<std::size_t>(y) * w + x];
            grad_rgb.at(y, x, 0) += static_cast<T>(g * kLumR);
            grad_rgb.at(y, x, 1) += static_cast<T>(g * kLumG);
            grad_rgb.at(y, x, 2) += static_cast<T>(g * kLumB);
        }
    }
}

struct ConvKernel {
    int out_channels = 0;
    int in_channels = 0;
    int kh = 0;
    int kw = 0;
    std::vector<float> w; // (co, ci, ky, kx)

    float at(int co, int ci, int ky, int kx) const {
        return w[((static_cast<std::size_t>(co) * in_channels + ci) * kh + ky) * kw + kx];
    }
};

template <typename T>
FeatureLevel<T> conv_relu(const Image<T>& in, const ConvKernel& k) {
    const int h = in.height, w = in.width;
    const int ay = k.kh / 2, ax = k.kw / 2;
    FeatureLevel<T> out(h, w, k.out_channels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int co = 0; co < k.out_channels; ++co) {
                double acc = 0.0;
                for (int ci = 0; ci < k.in_channels; ++ci) {
                    for (int ky = 0; ky < k.kh; ++ky) {
                        const int yy = clampi(y + ky - ay, 0, h - 1);
                        for (int kx = 0; kx < k.kw; ++kx) {
                            const int xx = clampi(x + kx - ax, 0, w - 1);
                            acc += static_cast<double>(k.at(co, ci, ky, kx)) *
                                   static_cast<double>(in.at(yy, xx, ci));
                        }
                    }
                }
                out.at(y, x, co) = static_cast<T>(std::max(acc, 0.0));
            }
        }
    }
    return out;
}

template <typename T>
void conv_relu_backward(const Image<T>& in, const ConvKernel& k, const FeatureLevel<T>& out,
                        const FeatureLevel<T>& grad_out, Image<T>& grad_in) {
    const int h = in.height, w = in.width;
    const int ay = k.kh / 2, ax = k.kw / 2;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int co = 0; co < k.out_channels; ++co) {
                const double g = static_cast<double>(grad_out.at(y, x, co));
                if (g == 0.0 || !(static_cast<double>(out.at(y, x, co)) > 0.0)) {
                    continue; // ReLU-gated
                }
                for (int ci = 0; ci < k.in_channels; ++ci) {
                    for (int ky = 0; ky < k.kh; ++ky) {
                        const int yy = clampi(y + ky - ay, 0, h - 1);
                        for (int kx = 0; kx < k.kw; ++kx) {
                            const int xx = clampi(x + kx - ax, 0, w - 1);
                            grad_in.at(yy, xx, ci) +=
                                static_cast<T>(g * static_cast<double>(k.at(co, ci, ky, kx)));
                        }
                    }
                }
            }
        }
    }
}

std::array<ConvKernel, kPyramidLevels> load_kernels(const std::filesystem::path& manifest) {
    std::ifstream is(manifest);
    if (!is) {
        throw IoError("cannot open extractor weight manifest: " + manifest.string());
    }
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("weight manifest parse error: " + std::string(e.what()));
    }
    std::array<ConvKernel, kPyramidLevels> kernels;
    const std::filesystem::path dir = manifest.parent_path();
    for (int i = 0; i < kPyramidLevels; ++i) {
        const std::string key = "level" + std::to_string(i + 1);
        if (!doc.contains(key)) {
            throw IoError("weight manifest missing entry: " + key);
        }
        std::filesystem::path p = doc.at(key).get<std::string>();
        if (p.is_relative()) {
            p = dir / p;
        }
        const TensorF t = tensor_read(p);
        if (t.rank() != 4 || t.dims[1] != 3 || t.dims[2] % 2 != 1 || t.dims[3] % 2 != 1) {
            throw InvalidArgument("extractor kernel must be (C_out, 3, odd_kh, odd_kw): " +
                                  p.string());
        }
        ConvKernel& k = kernels[static_cast<std::size_t>(i)];
        k.out_channels = static_cast<int>(t.dims[0]);
        k.in_channels = static_cast<int>(t.dims[1]);
        k.kh = static_cast<int>(t.dims[2]);
        k.kw = static_cast<int>(t.dims[3]);
        k.w = t.data;
    }
    return kernels;
}

} // namespace

template <typename T>
struct FeatureExtractor<T>::Impl {
    ExtractorKind kind = ExtractorKind::FixedPyramid;
    std::array<ConvKernel, kPyramidLevels> kernels;
};

template <typename T>
FeatureExtractor<T>::FeatureExtractor(const ExtractorSpec& spec) : impl_(new Impl) {
    impl_->kind = spec.kind;
    if (spec.kind == ExtractorKind::ExternalWeights) {
        impl_->kernels = load_kernels(spec.weight_path);
    }
}

template <typename T>
FeatureExtractor<T>::~FeatureExtractor() = default;
template <typename T>
FeatureExtractor<T>::FeatureExtractor(FeatureExtractor&&) noexcept = default;
template <typename T>
FeatureExtractor<T>& FeatureExtractor<T>::operator=(FeatureExtractor&&) noexcept = default;

template <typename T>
FeaturePyramid<T> FeatureExtractor<T>::extract(const Image<T>& img) const {
    if (img.channels != 3 || img.height < 1 || img.width < 1) {
        throw InvalidArgument("extract expects a non-empty 3-channel image");
    }
    FeaturePyramid<T> pyr;
    Image<T> level = img;
    for (int i = 0; i < kPyramidLevels; ++i) {
        if (i > 0) {
            level = avgpool2(level);
        }
        if (impl_->kind == ExtractorKind::FixedPyramid) {
            pyr[static_cast<std::size_t>(i)] = fixed_features(level);
        } else {
            pyr[static_cast<std::size_t>(i)] =
                conv_relu(level, impl_->kernels[static_cast<std::size_t>(i)]);
        }
    }
    return pyr;
}

template <typename T>
Image<T> FeatureExtractor<T>::backward(const Image<T>& img,
                                       const FeaturePyramid<T>& grad_features) const {
    if (img.channels != 3) {
        throw InvalidArgument("backward expects a 3-channel image");
    }
    // Recompute the pooled image chain.
    std::array<Image<T>, kPyramidLevels> levels;
    levels[0] = img;
    for (int i = 1; i < kPyramidLevels; ++i) {
        levels[static_cast<std::size_t>(i)] = avgpool2(levels[static_cast<std::size_t>(i - 1)]);
    }
    // Walk from the deepest level up, folding pooled gradients back in.
    Image<T> grad_level; // gradient w.r.t. levels[i]
    for (int i = kPyramidLevels - 1; i >= 0; --i) {
        const Image<T>& level = levels[static_cast<std::size_t>(i)];
        Image<T> g(level.height, level.width, 3);
        if (grad_level.size() > 0) {
            avgpool2_backward(grad_level, level.height, level.width, g);
        }
        const FeatureLevel<T>& gf = grad_features[static_cast<std::size_t>(i)];
        if (!gf.data.empty()) {
            if (gf.height != level.height || gf.width != level.width) {
                throw InvalidArgument("grad_features level dims mismatch");
            }
            if (impl_->kind == ExtractorKind::FixedPyramid) {
                fixed_features_backward(level, gf, g);
            } else {
                const ConvKernel& k = impl_->kernels[static_cast<std::size_t>(i)];
                const FeatureLevel<T> out = conv_relu(level, k);
                conv_relu_backward(level, k, out, gf, g);
            }
        }
        grad_level = std::move(g);
    }
    return grad_level;
}

template <typename T>
FeaturePyramid<T> extract(const Image<T>& img, const ExtractorSpec& spec) {
    return FeatureExtractor<T>(spec).extract(img);
}

template <typename T>
ContentLossResult<T> content_loss(const FeaturePyramid<T>& restored,
                                  const FeaturePyramid<T>& reference,
                                  std::array<double, 2> weights, bool with_grad) {
    for (int i = 0; i < kPyramidLevels; ++i) {
        if (!restored[static_cast<std::size_t>(i)].same_shape(
                reference[static_cast<std::size_t>(i)])) {
            throw InvalidArgument("content_loss pyramid shape mismatch");
        }
    }
    if (weights[0] < 0.0 || weights[1] < 0.0) {
        throw InvalidArgument("content weights must be non-negative");
    }
    const double wsum = weights[0] + weights[1];
    if (!(wsum > 0.0)) {
        throw InvalidArgument("content weights must not both be zero");
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        std::fprintf(stderr, "[lumos] content layer weights renormalized (sum was %g)\n", wsum);
        weights[0] /= wsum;
        weights[1] /= wsum;
    }

    ContentLossResult<T> out;
    for (int li = 0; li < 2; ++li) {
        const std::size_t level = static_cast<std::size_t>(kPyramidLevels - 2 + li);
        const FeatureLevel<T>& fr = restored[level];
        const FeatureLevel<T>& fc = reference[level];
        const double w = weights[static_cast<std::size_t>(li)];
        const double inv_sites = 1.0 / static_cast<double>(fr.sites());
        FeatureLevel<T>* g = nullptr;
        if (with_grad) {
            out.grad[level] = FeatureLevel<T>(fr.height, fr.width, fr.channels);
            g = &out.grad[level];
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < fr.data.size(); ++i) {
            const double d =
                static_cast<double>(fr.data[i]) - static_cast<double>(fc.data[i]);
            acc += std::abs(d);
            if (g && d != 0.0) {
                g->data[i] = static_cast<T>((d > 0.0 ? 1.0 : -1.0) * w * inv_sites);
            }
        }
        out.value += w * inv_sites * acc;
    }
    return out;
}

template class FeatureExtractor<float>;
template class FeatureExtractor<double>;
template FeaturePyramid<float> extract(const Image<float>&, const ExtractorSpec&);
template FeaturePyramid<double> extract(const Image<double>&, const ExtractorSpec&);
template ContentLossResult<float> content_loss(const FeaturePyramid<float>&,
                                               const FeaturePyramid<float>&,
                                               std::array<double, 2>, bool);
template ContentLossResult<double> content_loss(const FeaturePyramid<double>&,
                                                const FeaturePyramid<double>&,
                                                std::array<double, 2>, bool);

} // namespace lumos
