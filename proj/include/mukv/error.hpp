// Copyright 2026 The mukv Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MUKV_ERROR_HPP_
#define MUKV_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace mukv {

enum class ErrorKind {
  kZeroVector,
  kEmptyMatrix,
  kNonFinite,
  kInvalidGeometry,
  kInvalidConfig,
  kShapeMismatch,
  kLengthMismatch,
  kMissingBlock,
  kDuplicateBlock,
  kInvalidPayload,
  kDegenerateBlock,
  kOutOfOrderSegment,
  kDuplicateSegment,
  kChecksumFailure,
  kVersionMismatch,
  kTruncatedFile,
  kBadMagic,
  kLengthOverflow,
  kEmptyQuestion,
  kNoSegments,
  kUnknownBlock,
  kLabelMismatch,
  kIo,
};

constexpr std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kZeroVector: return "ZeroVector";
    case ErrorKind::kEmptyMatrix: return "EmptyMatrix";
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kInvalidGeometry: return "InvalidGeometry";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kMissingBlock: return "MissingBlock";
    case ErrorKind::kDuplicateBlock: return "DuplicateBlock";
    case ErrorKind::kInvalidPayload: return "InvalidPayload";
    case ErrorKind::kDegenerateBlock: return "DegenerateBlock";
    case ErrorKind::kOutOfOrderSegment: return "OutOfOrderSegment";
    case ErrorKind::kDuplicateSegment: return "DuplicateSegment";
    case ErrorKind::kChecksumFailure: return "ChecksumFailure";
    case ErrorKind::kVersionMismatch: return "VersionMismatch";
    case ErrorKind::kTruncatedFile: return "TruncatedFile";
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kLengthOverflow: return "LengthOverflow";
    case ErrorKind::kEmptyQuestion: return "EmptyQuestion";
    case ErrorKind::kNoSegments: return "NoSegments";
    case ErrorKind::kUnknownBlock: return "UnknownBlock";
    case ErrorKind::kLabelMismatch: return "LabelMismatch";
    case ErrorKind::kIo: return "Io";
  }
  return "Unknown";
}

/// Every failure surfaced by the library. The kind is stable and machine
/// readable; the message names the offending object.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace mukv

#endif  // MUKV_ERROR_HPP_
