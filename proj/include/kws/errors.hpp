// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <stdexcept>
#include <string>

namespace kws {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Audio container problems.
class FormatError : public Error { using Error::Error; };
class LayoutError : public Error { using Error::Error; };
class CorruptFileError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

// Input validation: bad values, bad configs, bad labels.
class ValidationError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class LabelError : public Error { using Error::Error; };
class CoverageError : public Error { using Error::Error; };
class InsufficientMaterialError : public Error { using Error::Error; };
class TooShortError : public Error { using Error::Error; };
class EmptyInputError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class ConsistencyError : public Error { using Error::Error; };

/// Non-finite value detected during a numeric computation. `where()` names
/// the sub-block or tensor that produced it.
class NumericFault : public Error {
 public:
  NumericFault(std::string where, const std::string& detail)
      : Error("numeric fault in " + where + ": " + detail), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace kws
