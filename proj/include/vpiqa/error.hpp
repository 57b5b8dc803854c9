// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vpiqa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid prompt geometry or mismatched image/prompt dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or out-of-range numerical input.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: token IDs out of range, invalid run config, ...
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable dataset files, manifests or images.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or mismatched prompt checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Correlation requested on constant input.
class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

/// Scorer could not be reached or returned a malformed reply.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace vpiqa
