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

#include "mlembed/model.hpp"

namespace mlembed {

// LP file for models made of linear rows, SOS1 sets and binaries. Rows are
// named c<constraint index>, SOS sets s<constraint index>, variables x<id>.
// Every bound is written explicitly. Throws NonlinearNotExportable (listing
// the offending constraint indices) or OracleNotExportable.
void WriteLp(const Model& model, std::ostream& out);
std::string LpString(const Model& model);

// Lossless JSON dump ("format_version": 1). Oracles backed by a predictor are
// stored with it; others are marked external and come back as handles whose
// callbacks throw.
void WriteModelJson(const Model& model, std::ostream& out);
std::string ModelJsonString(const Model& model);
Model ReadModelJson(std::istream& in);
Model ReadModelJsonString(const std::string& text);

// Shortest "%.17g" rendering used by every text artifact.
std::string FormatDouble(double v);

}  // namespace mlembed
