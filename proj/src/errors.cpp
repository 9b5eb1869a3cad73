// Copyright 2026 The mlembed Authors
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

#include "mlembed/errors.hpp"

namespace mlembed {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidBounds: return "InvalidBounds";
    case ErrorCode::kForeignVariable: return "ForeignVariable";
    case ErrorCode::kInvalidSOS: return "InvalidSOS";
    case ErrorCode::kInvalidConstraint: return "InvalidConstraint";
    case ErrorCode::kIncompleteAssignment: return "IncompleteAssignment";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDimensionError: return "DimensionError";
    case ErrorCode::kUnboundedInput: return "UnboundedInput";
    case ErrorCode::kUnsupportedReducedSpace: return "UnsupportedReducedSpace";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNonDifferentiablePredictor: return "NonDifferentiablePredictor";
    case ErrorCode::kHessianUnavailable: return "HessianUnavailable";
    case ErrorCode::kNonlinearNotExportable: return "NonlinearNotExportable";
    case ErrorCode::kOracleNotExportable: return "OracleNotExportable";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + detail),
      code_(code) {}

void Fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace mlembed
