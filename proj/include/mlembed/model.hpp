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

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mlembed/expr.hpp"

namespace mlembed {

enum class Sense { kLessEqual, kGreaterEqual };

// row . x == rhs
struct LinearEq {
  std::vector<LinearTerm> row;
  double rhs = 0.0;
};
// row . x (<= | >=) rhs
struct LinearIneq {
  std::vector<LinearTerm> row;
  double rhs = 0.0;
  Sense sense = Sense::kLessEqual;
};
// expr == 0
struct NonlinearEq {
  Expr expr;
};
// expr <= 0
struct NonlinearIneq {
  Expr expr;
};
// At most one member nonzero. Weights positive and pairwise distinct.
struct Sos1 {
  std::vector<VariableRef> vars;
  std::vector<double> weights;
};
// Marks `var` binary. Equivalent to creating the variable with binary=true.
struct Integrality {
  VariableRef var;
};

using Constraint =
    std::variant<LinearEq, LinearIneq, NonlinearEq, NonlinearIneq, Sos1, Integrality>;

struct ConstraintRef {
  std::size_t index = 0;
  bool operator==(const ConstraintRef&) const = default;
};

// F(inputs) - outputs == 0 evaluated through the oracle callbacks.
struct OracleConstraint {
  std::shared_ptr<const OracleHandle> oracle;
  std::vector<VariableRef> inputs;
  std::vector<VariableRef> outputs;
};

struct OracleRef {
  std::size_t index = 0;
};

struct VariableInfo {
  Interval bounds;
  bool binary = false;

  bool operator==(const VariableInfo&) const = default;
};

// Optimization-model IR. Single-owner and append-only: variables,
// constraints and oracle records are never removed, so refs stay valid.
class Model {
 public:
  Model();

  std::uint64_t id() const { return id_; }

  VariableRef AddVariable(Interval bounds, bool binary = false);
  ConstraintRef AddConstraint(Constraint c);
  OracleRef AddOracle(OracleConstraint oc);

  // Intersects the current bounds with `bounds`. Never loosens; an empty
  // intersection leaves the bounds untouched and returns false.
  bool TightenBounds(VariableRef v, Interval bounds);

  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_constraints() const { return constraints_.size(); }
  std::size_t num_oracles() const { return oracles_.size(); }

  const VariableInfo& variable(std::size_t id) const { return variables_.at(id); }
  const VariableInfo& variable(VariableRef v) const;
  const std::vector<VariableInfo>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const std::vector<OracleConstraint>& oracles() const { return oracles_; }

  VariableRef ref(std::size_t id) const;
  // Throws ForeignVariable unless `v` was issued by this model.
  void CheckOwned(VariableRef v) const;

 private:
  std::uint64_t id_;
  std::vector<VariableInfo> variables_;
  std::vector<Constraint> constraints_;
  std::vector<OracleConstraint> oracles_;
};

// Values indexed by variable id. Unset entries are reported as missing,
// which is distinct from holding a NaN.
class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(std::size_t size) : values_(size), set_(size, false) {}

  void Set(std::size_t id, double value);
  void Set(VariableRef v, double value) { Set(v.id, value); }
  bool Has(std::size_t id) const { return id < set_.size() && set_[id]; }
  std::optional<double> Get(std::size_t id) const;
  // Throws IncompleteAssignment when unset.
  double At(std::size_t id) const;
  double At(VariableRef v) const { return At(v.id); }
  std::size_t size() const { return values_.size(); }
  void Merge(const Assignment& other);

 private:
  std::vector<double> values_;
  std::vector<bool> set_;
};

double EvalExpr(const Expr& e, const Assignment& assignment);

struct Violation {
  enum class Kind { kBound, kIntegrality, kConstraint, kOracle };
  Kind kind;
  std::size_t index;  // variable, constraint or oracle index depending on kind
  double magnitude;
  std::string detail;
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  double max_residual = 0.0;  // over every checked item, violated or not

  bool feasible() const { return violations.empty(); }
  double max_violation() const;
};

// Absolute-tolerance check of every bound, integrality flag, constraint and
// oracle record. Throws IncompleteAssignment if any model variable is unset.
FeasibilityReport CheckFeasible(const Model& model, const Assignment& assignment,
                                double tol);

bool StructurallyEqual(const Constraint& a, const Constraint& b);
// Same variable table, constraint list and oracle records. Model identity is
// ignored, so a model read back from disk compares equal to its source.
bool StructurallyEqual(const Model& a, const Model& b);

}  // namespace mlembed
