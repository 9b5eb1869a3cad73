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

#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"
#include "mlembed/predictor.hpp"

namespace mlembed {

// Portable predictor JSON. Schema violations raise ParseError carrying a
// JSON path such as "$.layers[0].A[1][2]"; shape mismatches raise
// DimensionError.
Predictor PredictorFromJson(const nlohmann::json& j);
nlohmann::json PredictorToJson(const Predictor& p);

Predictor LoadPredictor(std::istream& in);
Predictor LoadPredictorString(std::string_view text);
Predictor LoadPredictorFile(const std::string& path);

}  // namespace mlembed
