// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cvtassd {

/// Shape or rank mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid model / train / layer configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad input data: malformed files, invalid boxes, unknown classes.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required element is missing or malformed in a structured file.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

/// API misuse (e.g. backward on a non-scalar).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training diverged.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cvtassd
