// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <lumos/errors.hpp>

namespace lumos {

/// Row-major interleaved image, channel innermost.
template <typename T>
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> data;

    Image() = default;
    Image(int h, int w, int c, T fill = T(0))
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {
        if (h < 0 || w < 0 || c < 0) {
            throw InvalidArgument("negative image dimension");
        }
    }

    T& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const T& at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    template <typename U>
    Image<U> cast() const {
        Image<U> out;
        out.height = height;
        out.width = width;
        out.channels = channels;
        out.data.reserve(data.size());
        for (const T& v : data) {
            out.data.push_back(static_cast<U>(v));
        }
        return out;
    }
};

/// Linear-light RGB image, values >= 0, nominal range [0,1].
using ImageLinear = Image<float>;

// IEC 61966-2-1 piecewise transfer pair, mutually inverse on [0,1].
double srgb_decode(double encoded); // encoded -> linear (EOTF)
double srgb_encode(double linear);  // linear -> encoded (inverse OETF direction)

/// Round-half-up quantization of an encoded value in [0,1] to an 8-bit code.
std::uint8_t quantize8(double encoded);

/// Decode an 8-bit RGB PNG to linear light.
ImageLinear image_load(const std::filesystem::path& path);

/// Clamp to [0,1], encode to sRGB and write an 8-bit RGB PNG.
void image_save(const ImageLinear& img, const std::filesystem::path& path);

/// Write a single-channel image as an 8-bit grayscale PNG (values clamped to
/// [0,1], linearly mapped to codes). Used for alpha visualizations.
void image_save_gray(const Image<float>& img, const std::filesystem::path& path);

/// Quantize a linear image through the 8-bit sRGB grid and return the encoded
/// values k/255 as floats. This is the domain quality metrics operate in.
Image<float> quantize_to_encoded(const ImageLinear& img);

} // namespace lumos
