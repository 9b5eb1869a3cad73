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
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace mlembed {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed extended-real range. Construct through Make() to get validation;
// the aggregate form is kept for brace-initialising known-good values.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  static Interval Make(double lo, double hi);  // throws InvalidBounds
  static Interval Entire() { return {-kInf, kInf}; }
  static Interval Point(double v) { return {v, v}; }

  bool IsFinite() const;
  bool Contains(double v) const { return lo <= v && v <= hi; }
  bool operator==(const Interval&) const = default;
};

struct VariableRef {
  std::uint64_t model = 0;  // identity of the owning Model
  std::size_t id = 0;       // dense index into that Model's variable table

  bool operator==(const VariableRef&) const = default;
};

class OracleHandle;
struct ExprNode;

// Immutable expression tree. Copies share nodes; equal subtrees may be
// shared freely (the evaluator memoises on node identity).
class Expr {
 public:
  Expr();  // the constant 0
  explicit Expr(std::shared_ptr<const ExprNode> node);

  static Expr Const(double value);
  static Expr Variable(VariableRef ref);
  static Expr Affine(std::vector<std::pair<double, Expr>> terms, double offset);
  static Expr OracleOutput(std::shared_ptr<const OracleHandle> oracle,
                           std::vector<Expr> inputs, std::size_t index);

  const ExprNode& node() const { return *node_; }
  const ExprNode* id() const { return node_.get(); }

 private:
  std::shared_ptr<const ExprNode> node_;
};

enum class UnaryOp { kExp, kTanh, kNeg, kLog1pExp };
enum class BinaryOp { kAdd, kSub, kMul, kDiv, kPow, kMax };

struct ConstantNode {
  double value;
};
struct VarNode {
  VariableRef ref;
};
struct AffineNode {
  std::vector<std::pair<double, Expr>> terms;
  double offset;
};
struct UnaryNode {
  UnaryOp op;
  Expr arg;
};
struct BinaryNode {
  BinaryOp op;
  Expr lhs;
  Expr rhs;
};
// Component `index` of a gray-box oracle applied to `inputs`.
struct OracleNode {
  std::shared_ptr<const OracleHandle> oracle;
  std::vector<Expr> inputs;
  std::size_t index;
};

struct ExprNode {
  std::variant<ConstantNode, VarNode, AffineNode, UnaryNode, BinaryNode, OracleNode> data;
};

Expr Exp(Expr e);
Expr TanhExpr(Expr e);
Expr Log1pExp(Expr e);
Expr Pow(Expr base, Expr exponent);
Expr Max(Expr a, Expr b);
Expr operator-(Expr e);
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);

// Stable log(1 + e^x); shared by Expr evaluation and predictor evaluation.
double Log1pExpValue(double x);

struct LinearTerm {
  VariableRef var;
  double coef;

  bool operator==(const LinearTerm&) const = default;
};

// sum(terms) + constant, with each variable appearing once.
struct LinearForm {
  std::vector<LinearTerm> terms;
  double constant = 0.0;
};

// Flattens constants, variables, affine combinations, negation, sums and
// products/quotients by constants. Returns nullopt for anything nonlinear.
// Zero coefficients are dropped after merging.
std::optional<LinearForm> AsLinear(const Expr& e);

// Identity-insensitive comparison. Oracle nodes compare equal when they share
// the handle or wrap structurally equal predictors.
bool StructurallyEqual(const Expr& a, const Expr& b);

// Every variable referenced by `e`, each reported once, in first-visit order.
std::vector<VariableRef> CollectVariables(const Expr& e);

}  // namespace mlembed
