// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/image.hpp>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include <png.h>

namespace lumos {

double srgb_decode(double encoded) {
    if (encoded <= 0.04045) {
        return encoded / 12.92;
    }
    return std::pow((encoded + 0.055) / 1.055, 2.4);
}

double srgb_encode(double linear) {
    if (linear <= 0.0031308) {
        return linear * 12.92;
    }
    return 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

std::uint8_t quantize8(double encoded) {
    const double clamped = std::clamp(encoded, 0.0, 1.0);
    const double code = std::floor(clamped * 255.0 + 0.5);
    return static_cast<std::uint8_t>(code);
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngErrorSlot {
    char message[256] = {};
};

// libpng requires the error handler to not return; it longjmps back to the
// caller's png_jmpbuf. The message is stashed in the error pointer slot.
void png_error_handler(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<PngErrorSlot*>(png_get_error_ptr(png));
    if (slot) {
        std::strncpy(slot->message, msg, sizeof(slot->message) - 1);
    }
    png_longjmp(png, 1);
}

void png_warn_silent(png_structp, png_const_charp) {}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngErrorSlot err;

    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler,
                                     png_warn_silent);
        if (png) {
            info = png_create_info_struct(png);
        }
    }
    ~PngReader() {
        if (png) {
            png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        }
    }
    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngErrorSlot err;

    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler,
                                      png_warn_silent);
        if (png) {
            info = png_create_info_struct(png);
        }
    }
    ~PngWriter() {
        if (png) {
            png_destroy_write_struct(&png, info ? &info : nullptr);
        }
    }
    PngWriter(const PngWriter&) = delete;
    PngWriter& operator=(const PngWriter&) = delete;
};

std::vector<std::uint8_t> read_png_rgb8(const std::filesystem::path& path, int& w, int& h) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) {
        throw ImageIoError(ImageIoError::Kind::Io, "cannot open: " + path.string());
    }
    PngReader r;
    if (!r.png || !r.info) {
        throw ImageIoError(ImageIoError::Kind::DecodeFailed, "libpng init failed");
    }

    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    int width = 0, height = 0, bit_depth = 0, color_type = 0;

    if (setjmp(png_jmpbuf(r.png))) {
        throw ImageIoError(ImageIoError::Kind::DecodeFailed,
                           "png decode failed (" + std::string(r.err.message) +
                               "): " + path.string());
    }

    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);
    width = static_cast<int>(png_get_image_width(r.png, r.info));
    height = static_cast<int>(png_get_image_height(r.png, r.info));
    bit_depth = png_get_bit_depth(r.png, r.info);
    color_type = png_get_color_type(r.png, r.info);
    if (color_type != PNG_COLOR_TYPE_RGB || bit_depth != 8) {
        throw ImageIoError(ImageIoError::Kind::NotRgb8,
                           "expected 8-bit RGB PNG: " + path.string());
    }
    pixels.resize(static_cast<std::size_t>(width) * height * 3);
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
    }
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    w = width;
    h = height;
    return pixels;
}

void write_png8(const std::filesystem::path& path, const std::uint8_t* pixels, int w, int h,
                int channels) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) {
        throw ImageIoError(ImageIoError::Kind::Io, "cannot open for write: " + path.string());
    }
    PngWriter wr;
    if (!wr.png || !wr.info) {
        throw ImageIoError(ImageIoError::Kind::EncodeFailed, "libpng init failed");
    }

    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        rows[y] = const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * w * channels);
    }

    if (setjmp(png_jmpbuf(wr.png))) {
        throw ImageIoError(ImageIoError::Kind::EncodeFailed,
                           "png encode failed (" + std::string(wr.err.message) +
                               "): " + path.string());
    }

    png_init_io(wr.png, fp.get());
    const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

} // namespace

ImageLinear image_load(const std::filesystem::path& path) {
    int w = 0, h = 0;
    const std::vector<std::uint8_t> pixels = read_png_rgb8(path, w, h);
    ImageLinear img(h, w, 3);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        img.data[i] = static_cast<float>(srgb_decode(pixels[i] / 255.0));
    }
    return img;
}

void image_save(const ImageLinear& img, const std::filesystem::path& path) {
    if (img.channels != 3) {
        throw InvalidArgument("image_save expects a 3-channel image");
    }
    std::vector<std::uint8_t> pixels(img.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double linear = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0);
        pixels[i] = quantize8(srgb_encode(linear));
    }
    write_png8(path, pixels.data(), img.width, img.height, 3);
}

void image_save_gray(const Image<float>& img, const std::filesystem::path& path) {
    if (img.channels != 1) {
        throw InvalidArgument("image_save_gray expects a 1-channel image");
    }
    std::vector<std::uint8_t> pixels(img.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0);
        pixels[i] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
    }
    write_png8(path, pixels.data(), img.width, img.height, 1);
}

Image<float> quantize_to_encoded(const ImageLinear& img) {
    Image<float> out;
    out.height = img.height;
    out.width = img.width;
    out.channels = img.channels;
    out.data.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double linear = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0);
        out.data[i] = static_cast<float>(quantize8(srgb_encode(linear)) / 255.0);
    }
    return out;
}

} // namespace lumos
