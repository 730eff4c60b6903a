// Copyright 2026 The PI-GNN Authors
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

#ifndef PIGNN_ERROR_HPP_
#define PIGNN_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace pignn {

enum class ErrorCode {
  kInvalidDelta,
  kUnknownNode,
  kDimensionMismatch,
  kLabelOutOfRange,
  kSnapshotMismatch,
  kEmptyMemory,
  kNotExpanded,
  kEmptyEvalSet,
  kShapeMismatch,
  kMissingCheckpoints,
  kLayerOutOfRange,
  kConfigInvalid,
  kFormatError,
  kVersionMismatch,
  kIoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDelta: return "InvalidDelta";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kSnapshotMismatch: return "SnapshotMismatch";
    case ErrorCode::kEmptyMemory: return "EmptyMemory";
    case ErrorCode::kNotExpanded: return "NotExpanded";
    case ErrorCode::kEmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kMissingCheckpoints: return "MissingCheckpoints";
    case ErrorCode::kLayerOutOfRange: return "LayerOutOfRange";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so that
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pignn

#endif  // PIGNN_ERROR_HPP_
