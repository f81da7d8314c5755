// Copyright 2026 The Atlas Audit Authors
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

#include "atlas/errors.h"

namespace atlas {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kInvalidInput:
      return "invalid_input";
    case ErrorCode::kNotFound:
      return "not_found";
    case ErrorCode::kEmptyPool:
      return "empty_pool";
    case ErrorCode::kComputation:
      return "computation";
    case ErrorCode::kIo:
      return "io";
  }
  return "unknown";
}

std::string_view LoadErrorKindName(LoadErrorKind kind) {
  switch (kind) {
    case LoadErrorKind::kIo:
      return "io";
    case LoadErrorKind::kBadMagic:
      return "bad_magic";
    case LoadErrorKind::kVersionMismatch:
      return "version_mismatch";
    case LoadErrorKind::kTruncatedHeader:
      return "truncated_header";
    case LoadErrorKind::kTruncatedPayload:
      return "truncated_payload";
    case LoadErrorKind::kTrailingBytes:
      return "trailing_bytes";
    case LoadErrorKind::kInvalidDimensions:
      return "invalid_dimensions";
    case LoadErrorKind::kNonFinite:
      return "non_finite";
  }
  return "unknown";
}

}  // namespace atlas
