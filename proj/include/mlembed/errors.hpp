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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlembed {

enum class ErrorCode {
  kInvalidBounds,
  kForeignVariable,
  kInvalidSOS,
  kInvalidConstraint,
  kIncompleteAssignment,
  kParseError,
  kDimensionError,
  kUnboundedInput,
  kUnsupportedReducedSpace,
  kInvalidConfig,
  kNonDifferentiablePredictor,
  kHessianUnavailable,
  kNonlinearNotExportable,
  kOracleNotExportable,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure raised by the library. The message is prefixed with the
// code name so that CLI diagnostics are greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& detail);

}  // namespace mlembed
