// Copyright (c) 2026 the SI-NR authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sinr {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (rates out of range, invalid specs, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Tensor/layer shape disagreement.
struct ShapeError : Error {
    using Error::Error;
};

// Malformed or truncated files (checkpoints, datasets).
struct FormatError : Error {
    using Error::Error;
};

// Payload CRC does not match the stored checksum.
struct ChecksumError : FormatError {
    using FormatError::FormatError;
};

// A sub-model file was opened with the wrong role loader.
struct RoleMismatchError : FormatError {
    using FormatError::FormatError;
};

// Datagram from an unknown session or tensor.
struct ProtocolError : Error {
    using Error::Error;
};

// Two received packets disagree about the same element slot.
struct IntegrityError : Error {
    using Error::Error;
};

}  // namespace sinr
