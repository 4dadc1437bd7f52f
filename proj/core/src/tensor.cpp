// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/tensor.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace lumos {

namespace {

constexpr char kMagic[4] = {'L', 'U', 'M', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::size_t kMaxRank = 8;

std::size_t checked_element_count(const std::vector<std::size_t>& dims) {
    if (dims.empty()) {
        throw TensorIoError(TensorIoError::Kind::ZeroRank, "zero-rank tensor rejected");
    }
    std::size_t n = 1;
    for (std::size_t d : dims) {
        if (d == 0) {
            return 0;
        }
        if (n > std::numeric_limits<std::size_t>::max() / d) {
            throw InvalidArgument("tensor dims overflow size_t");
        }
        n *= d;
    }
    return n;
}

void check_finite(const std::vector<float>& data) {
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw NumericalError("tensor contains non-finite values");
        }
    }
}

template <typename T>
void write_le(std::ostream& os, T value) {
    // Host is little-endian on every supported target; byte order is pinned
    // by writing through a byte buffer.
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool read_le(std::istream& is, T& value) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
        return false;
    }
    std::memcpy(&value, buf, sizeof(T));
    return true;
}

} // namespace

TensorF::TensorF(std::vector<std::size_t> dims_, std::vector<float> data_)
    : dims(std::move(dims_)), data(std::move(data_)) {
    const std::size_t expected = checked_element_count(dims);
    if (expected != data.size()) {
        throw InvalidArgument("tensor dims do not match payload size");
    }
    check_finite(data);
}

TensorF TensorF::zeros(std::vector<std::size_t> dims_) {
    const std::size_t n = checked_element_count(dims_);
    TensorF t;
    t.dims = std::move(dims_);
    t.data.assign(n, 0.0f);
    return t;
}

void tensor_write(const TensorF& t, const std::filesystem::path& path) {
    if (t.dims.empty()) {
        throw TensorIoError(TensorIoError::Kind::ZeroRank, "zero-rank tensor rejected");
    }
    if (t.rank() > kMaxRank) {
        throw TensorIoError(TensorIoError::Kind::RankOverflow,
                            "tensor rank exceeds format limit of 8");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw TensorIoError(TensorIoError::Kind::Io, "cannot open for write: " + path.string());
    }
    os.write(kMagic, 4);
    write_le<std::uint8_t>(os, kVersion);
    write_le<std::uint8_t>(os, kDtypeF32);
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.dims) {
        write_le<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    }
    for (float v : t.data) {
        write_le<float>(os, v);
    }
    os.flush();
    if (!os) {
        throw TensorIoError(TensorIoError::Kind::Io, "write failed: " + path.string());
    }
}

TensorF tensor_read(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw TensorIoError(TensorIoError::Kind::Io, "cannot open for read: " + path.string());
    }
    char magic[4] = {};
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw TensorIoError(TensorIoError::Kind::BadMagic, "bad magic: " + path.string());
    }
    std::uint8_t version = 0, dtype = 0, rank = 0;
    if (!read_le(is, version) || !read_le(is, dtype) || !read_le(is, rank)) {
        throw TensorIoError(TensorIoError::Kind::Truncated, "truncated header: " + path.string());
    }
    if (version != kVersion) {
        throw TensorIoError(TensorIoError::Kind::BadVersion, "unsupported version");
    }
    if (dtype != kDtypeF32) {
        throw TensorIoError(TensorIoError::Kind::DtypeMismatch, "dtype mismatch, expected f32");
    }
    if (rank == 0) {
        throw TensorIoError(TensorIoError::Kind::ZeroRank, "zero-rank tensor rejected");
    }
    if (rank > kMaxRank) {
        throw TensorIoError(TensorIoError::Kind::RankOverflow, "rank exceeds format limit of 8");
    }
    std::vector<std::size_t> dims(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        std::uint64_t d = 0;
        if (!read_le(is, d)) {
            throw TensorIoError(TensorIoError::Kind::Truncated, "truncated dims: " + path.string());
        }
        dims[i] = static_cast<std::size_t>(d);
    }
    const std::size_t n = checked_element_count(dims);
    std::vector<float> data(n);
    if (n > 0) {
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(n * sizeof(float))) {
            throw TensorIoError(TensorIoError::Kind::Truncated,
                                "truncated payload: " + path.string());
        }
    }
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw TensorIoError(TensorIoError::Kind::NonFinite,
                                "non-finite payload: " + path.string());
        }
    }
    TensorF t;
    t.dims = std::move(dims);
    t.data = std::move(data);
    return t;
}

} // namespace lumos
