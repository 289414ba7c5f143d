// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cgsorec {

enum class ErrorKind {
  kConfig,     // invalid parameter or configuration value
  kParse,      // malformed input line
  kDimension,  // id exceeds declared dimensions
  kShape,      // vector/matrix length mismatch
  kStep,       // diffusion step out of range
  kIntegrity,  // checkpoint or manifest corruption
  kData,       // degenerate data (e.g. empty debiased test)
  kNumeric,    // non-finite value during training
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for an error kind: 2 config, 3 data, 4 numeric.
inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kShape:
    case ErrorKind::kStep:
      return 2;
    case ErrorKind::kNumeric:
      return 4;
    default:
      return 3;
  }
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace cgsorec
