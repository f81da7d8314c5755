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

#ifndef ATLAS_ERRORS_H_
#define ATLAS_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace atlas {

// Broad failure classes. The CLI maps these onto exit codes and the service
// onto HTTP status codes, so every thrown atlas::Error carries one.
enum class ErrorCode {
  kInvalidArgument,  // bad parameter value or malformed request
  kInvalidInput,     // input data fails validation
  kNotFound,         // unknown id, dataset, section, or field
  kEmptyPool,        // a filter removed every candidate
  kComputation,      // numerical failure during an audit
  kIo,               // filesystem failure
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Distinct failure modes of the binary embedding reader.
enum class LoadErrorKind {
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncatedHeader,
  kTruncatedPayload,
  kTrailingBytes,
  kInvalidDimensions,
  kNonFinite,
};

std::string_view LoadErrorKindName(LoadErrorKind kind);

class LoadError : public Error {
 public:
  LoadError(LoadErrorKind kind, const std::string& message)
      : Error(kind == LoadErrorKind::kIo ? ErrorCode::kIo
                                         : ErrorCode::kInvalidInput,
              message),
        kind_(kind) {}

  LoadErrorKind kind() const { return kind_; }

 private:
  LoadErrorKind kind_;
};

}  // namespace atlas

#endif  // ATLAS_ERRORS_H_
