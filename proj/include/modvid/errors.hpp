// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modvid {

enum class ErrorKind {
    InvalidArgument,
    InvalidData,
    ContractViolation,
    DegenerateInput,
    NumericalFailure,
    TrainingFailure,
    Parse,
    Validation,
    Io,
};

const char* to_string(ErrorKind kind);

/// Base of every error thrown by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& m) : Error(ErrorKind::InvalidArgument, m) {}
};

class InvalidData : public Error {
public:
    explicit InvalidData(const std::string& m) : Error(ErrorKind::InvalidData, m) {}
};

class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& m) : Error(ErrorKind::ContractViolation, m) {}
};

class DegenerateInput : public Error {
public:
    explicit DegenerateInput(const std::string& m) : Error(ErrorKind::DegenerateInput, m) {}
};

class NumericalFailure : public Error {
public:
    explicit NumericalFailure(const std::string& m) : Error(ErrorKind::NumericalFailure, m) {}
};

class TrainingFailure : public Error {
public:
    explicit TrainingFailure(const std::string& m) : Error(ErrorKind::TrainingFailure, m) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& m) : Error(ErrorKind::Validation, m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error(ErrorKind::Io, m) {}
};

/// Malformed bytes. `offset` is the position in the input where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& m, std::size_t offset)
        : Error(ErrorKind::Parse, m + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

} // namespace modvid
