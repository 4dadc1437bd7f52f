// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lumos {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid values or shapes handed to an operation.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// NaN/Inf detected where the contract requires finite values.
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TensorIoError : public IoError {
public:
    enum class Kind {
        BadMagic,
        BadVersion,
        DtypeMismatch,
        Truncated,
        ZeroRank,
        RankOverflow,
        NonFinite,
        Io,
    };
    TensorIoError(Kind kind, const std::string& msg) : IoError(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class ImageIoError : public IoError {
public:
    enum class Kind {
        DecodeFailed,
        NotRgb8,
        EncodeFailed,
        Io,
    };
    ImageIoError(Kind kind, const std::string& msg) : IoError(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class PlyIoError : public IoError {
public:
    enum class Kind {
        EmptyScene,
        UnknownLayout,
        Parse,
        Truncated,
        Io,
    };
    PlyIoError(Kind kind, const std::string& msg) : IoError(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

} // namespace lumos
