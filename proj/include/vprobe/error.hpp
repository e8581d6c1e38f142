// Copyright (c) 2026, vprobe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vprobe {

enum class ErrorCode {
  kInvariant,
  kInvalidArgument,
  kDimensionMismatch,
  kIo,
  kMalformed,
  kChecksum,
  kUnsupported,
  kAlignment,
  kUndefinedCorrelation,
  kEmpty,
  kOutOfRange,
  kCapability,
  kVersionMismatch,
  kProtocol,
  kTimeout,
  kPeer,
  kConfig,
};

std::string_view to_string(ErrorCode code);
// Inverse of to_string; unknown names map to kPeer.
ErrorCode error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace vprobe
