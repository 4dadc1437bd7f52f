// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <lumos/errors.hpp>

namespace lumos {

/// Dense row-major float32 tensor (innermost dimension last).
/// Every public constructor guarantees product(dims) == data.size() and
/// finite values throughout.
struct TensorF {
    std::vector<std::size_t> dims;
    std::vector<float> data;

    TensorF() = default;
    TensorF(std::vector<std::size_t> dims_, std::vector<float> data_);

    static TensorF zeros(std::vector<std::size_t> dims_);

    std::size_t rank() const { return dims.size(); }
    std::size_t size() const { return data.size(); }
};

// File layout: magic "LUMT", version u8 = 1, dtype u8 = 0 (f32), rank u8,
// rank x u64 little-endian dims, then the row-major f32 payload.
void tensor_write(const TensorF& t, const std::filesystem::path& path);
TensorF tensor_read(const std::filesystem::path& path);

} // namespace lumos
