// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <memory>

#include <lumos/image.hpp>
#include <lumos/tensor.hpp>

namespace lumos {

inline constexpr int kPyramidLevels = 5;

/// One feature map; spatial stride relative to the input is 2^(level-1).
template <typename T>
struct FeatureLevel {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> data;

    FeatureLevel() = default;
    FeatureLevel(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, T(0)) {}

    T& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const T& at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t sites() const { return static_cast<std::size_t>(height) * width; }
    bool same_shape(const FeatureLevel& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

/// Five levels; level 1 (index 0) matches the input resolution and each
/// further level halves the spatial dims (ceil).
template <typename T>
using FeaturePyramid = std::array<FeatureLevel<T>, kPyramidLevels>;

enum class ExtractorKind {
    FixedPyramid,    // deterministic, training-free default
    ExternalWeights, // convolution kernels loaded from a manifest
};

struct ExtractorSpec {
    ExtractorKind kind = ExtractorKind::FixedPyramid;
    std::filesystem::path weight_path; // JSON manifest for ExternalWeights
};

/// Multi-scale feature extraction with an analytic backward pass.
///
/// FixedPyramid computes, per level of a successively 2x average-pooled
/// image: [luminance, horizontal gradient, vertical gradient, 3x3 local
/// std of luminance]. ExternalWeights applies one convolution (replicate
/// padding, stride 1) plus ReLU per level; kernels are LUMT tensors of
/// shape (C_out, 3, kh, kw) named by a JSON manifest {"level1": path, ...}.
template <typename T>
class FeatureExtractor {
public:
    explicit FeatureExtractor(const ExtractorSpec& spec);
    ~FeatureExtractor();
    FeatureExtractor(FeatureExtractor&&) noexcept;
    FeatureExtractor& operator=(FeatureExtractor&&) noexcept;

    FeaturePyramid<T> extract(const Image<T>& img) const;

    /// dL/d(img) given per-level feature cotangents. Empty levels (size 0)
    /// contribute nothing.
    Image<T> backward(const Image<T>& img, const FeaturePyramid<T>& grad_features) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Convenience one-shot API.
template <typename T>
FeaturePyramid<T> extract(const Image<T>& img, const ExtractorSpec& spec);

template <typename T>
struct ContentLossResult {
    double value = 0.0;
    // Gradients w.r.t. the restored branch, deepest two levels only;
    // shallower entries stay empty.
    FeaturePyramid<T> grad;
};

/// l1 over the channel vector per site, averaged over sites, on the two
/// deepest pyramid levels. weights must be non-negative and are renormalized
/// to sum 1 (with a warning) when they do not.
template <typename T>
ContentLossResult<T> content_loss(const FeaturePyramid<T>& restored,
                                  const FeaturePyramid<T>& reference,
                                  std::array<double, 2> weights = {0.5, 0.5},
                                  bool with_grad = true);

} // namespace lumos
