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

#include <span>
#include <vector>

#include "mlembed/formulate.hpp"
#include "mlembed/model.hpp"
#include "mlembed/predictor.hpp"

namespace mlembed {

// Sound interval image of `p` over the box `input`.
std::vector<Interval> Propagate(const Predictor& p, std::span<const Interval> input);

// Natural interval extension of an expression over the model's variable
// bounds.
Interval IntervalOf(const Expr& e, const Model& model);
std::vector<Interval> InputIntervals(const Model& model, const VectorOrExpr& x);

// Tightens every output and auxiliary variable recorded in `formulation` to
// the propagated interval. Intersects, never loosens; idempotent.
void AttachBounds(Model& model, const Formulation& formulation,
                  std::span<const Interval> input);

}  // namespace mlembed
