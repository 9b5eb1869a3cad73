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

#include <cmath>

#include "doctest.h"
#include "mlembed/errors.hpp"
#include "mlembed/model.hpp"

using namespace mlembed;

namespace {

ErrorCode CodeOf(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mlembed::Error");
  return ErrorCode::kParseError;
}

}  // namespace

TEST_CASE("error messages carry the code name") {
  const Error e(ErrorCode::kInvalidSOS, "dup");
  CHECK(e.code() == ErrorCode::kInvalidSOS);
  CHECK(std::string(e.what()) == "InvalidSOS: dup");
  CHECK(ErrorCodeName(ErrorCode::kUnboundedInput) == "UnboundedInput");
}

TEST_CASE("add_variable hands out dense ids") {
  Model m;
  CHECK(m.AddVariable(Interval{0, 1}).id == 0);
  m.AddVariable(Interval{0, 1});
  m.AddVariable(Interval{0, 1});
  CHECK(m.AddVariable(Interval::Entire()).id == 3);
  CHECK(m.num_variables() == 4);
}

TEST_CASE("add_variable rejects inverted or non-binary bounds") {
  Model m;
  CHECK(CodeOf([&] { m.AddVariable(Interval{2, 1}); }) == ErrorCode::kInvalidBounds);
  CHECK(CodeOf([&] { m.AddVariable(Interval{0, 2}, true); }) == ErrorCode::kInvalidBounds);
  CHECK(CodeOf([] { Interval::Make(1, 0); }) == ErrorCode::kInvalidBounds);
  CHECK(m.num_variables() == 0);
}

TEST_CASE("add_constraint appends and validates") {
  Model m;
  const VariableRef x = m.AddVariable(Interval{0, 1});
  const VariableRef y = m.AddVariable(Interval{0, 1});
  CHECK(m.AddConstraint(LinearEq{{{x, 1.0}, {y, -1.0}}, 0.0}).index == 0);
  CHECK(m.AddConstraint(Sos1{{x, y}, {1.0, 2.0}}).index == 1);
  CHECK(CodeOf([&] { m.AddConstraint(Sos1{{x, y}, {1.0, 1.0}}); }) == ErrorCode::kInvalidSOS);
  CHECK(CodeOf([&] { m.AddConstraint(Sos1{{x, y}, {1.0, -2.0}}); }) == ErrorCode::kInvalidSOS);
  CHECK(CodeOf([&] { m.AddConstraint(LinearEq{{{x, 1.0}, {x, 2.0}}, 0.0}); }) ==
        ErrorCode::kInvalidConstraint);
  CHECK(m.num_constraints() == 2);
}

TEST_CASE("variables from another model are rejected") {
  Model a;
  Model b;
  const VariableRef x = a.AddVariable(Interval{0, 1});
  b.AddVariable(Interval{0, 1});
  CHECK(CodeOf([&] { b.AddConstraint(LinearEq{{{x, 1.0}}, 0.0}); }) ==
        ErrorCode::kForeignVariable);
  CHECK(CodeOf([&] { b.AddConstraint(NonlinearEq{Exp(Expr::Variable(x))}); }) ==
        ErrorCode::kForeignVariable);
}

TEST_CASE("integrality marks the variable binary") {
  Model m;
  const VariableRef x = m.AddVariable(Interval{0, 1});
  const VariableRef z = m.AddVariable(Interval{0, 3});
  m.AddConstraint(Integrality{x});
  CHECK(m.variable(x).binary);
  CHECK(CodeOf([&] { m.AddConstraint(Integrality{z}); }) == ErrorCode::kInvalidBounds);
}

TEST_CASE("tighten_bounds intersects") {
  Model m;
  const VariableRef x = m.AddVariable(Interval{-1, 3});
  CHECK(m.TightenBounds(x, Interval{0, 5}));
  CHECK(m.variable(x).bounds == Interval{0, 3});
  CHECK(m.TightenBounds(x, Interval::Entire()));
  CHECK(m.variable(x).bounds == Interval{0, 3});
  CHECK_FALSE(m.TightenBounds(x, Interval{4, 5}));
  CHECK(m.variable(x).bounds == Interval{0, 3});
}

TEST_CASE("eval_expr examples") {
  Model m;
  const VariableRef x = m.AddVariable(Interval::Entire());
  const Expr ex = Expr::Variable(x);
  Assignment a;
  a.Set(x, 0.0);
  CHECK(EvalExpr(Expr::Const(1.0) / (Expr::Const(1.0) + Exp(-ex)), a) == 0.5);
  CHECK(EvalExpr(TanhExpr(ex), a) == 0.0);
  a.Set(x, -3.0);
  CHECK(EvalExpr(Max(Expr::Const(0.0), ex), a) == 0.0);
  a.Set(x, 2.0);
  CHECK(EvalExpr(Pow(ex, Expr::Const(3.0)), a) == 8.0);
  CHECK(EvalExpr(Expr::Affine({{2.0, ex}, {-1.0, ex * ex}}, 0.5), a) == 0.5);
  CHECK(EvalExpr(Log1pExp(ex), a) == doctest::Approx(std::log1p(std::exp(2.0))));
}

TEST_CASE("eval_expr follows floating-point semantics and propagates NaN") {
  Model m;
  const VariableRef x = m.AddVariable(Interval::Entire());
  const Expr ex = Expr::Variable(x);
  Assignment a;
  a.Set(x, 0.0);
  CHECK(std::isinf(EvalExpr(Expr::Const(1.0) / ex, a)));
  CHECK(std::isnan(EvalExpr(ex / ex, a)));
  a.Set(x, std::nan(""));
  CHECK(std::isnan(EvalExpr(Max(Expr::Const(0.0), ex), a)));
  CHECK(std::isnan(EvalExpr(Max(ex, Expr::Const(0.0)), a)));
}

TEST_CASE("eval_expr requires every variable") {
  Model m;
  const VariableRef x = m.AddVariable(Interval::Entire());
  const VariableRef y = m.AddVariable(Interval::Entire());
  Assignment a;
  a.Set(x, 1.0);
  CHECK(CodeOf([&] { EvalExpr(Expr::Variable(x) + Expr::Variable(y), a); }) ==
        ErrorCode::kIncompleteAssignment);
}

TEST_CASE("eval_expr is deterministic on shared subtrees") {
  Model m;
  const VariableRef x = m.AddVariable(Interval::Entire());
  Expr e = Expr::Variable(x);
  for (int i = 0; i < 30; ++i) e = TanhExpr(e * Expr::Const(1.1) + e);
  Assignment a;
  a.Set(x, 0.3);
  const double first = EvalExpr(e, a);
  CHECK(EvalExpr(e, a) == first);
}

TEST_CASE("as_linear flattens and merges") {
  Model m;
  const VariableRef x = m.AddVariable(Interval::Entire());
  const VariableRef y = m.AddVariable(Interval::Entire());
  const Expr ex = Expr::Variable(x);
  const Expr ey = Expr::Variable(y);
  auto lin = AsLinear(Expr::Const(2.0) * (ex - ey) + ey / Expr::Const(4.0) + Expr::Const(1.0));
  REQUIRE(lin.has_value());
  REQUIRE(lin->terms.size() == 2);
  CHECK(lin->terms[0] == LinearTerm{x, 2.0});
  CHECK(lin->terms[1] == LinearTerm{y, -1.75});
  CHECK(lin->constant == 1.0);
  CHECK_FALSE(AsLinear(ex * ey).has_value());
  auto cancelled = AsLinear(ex - ex);
  REQUIRE(cancelled.has_value());
  CHECK(cancelled->terms.empty());
}

TEST_CASE("check_feasible on y = max(0, x)") {
  Model m;
  const VariableRef x = m.AddVariable(Interval::Entire());
  const VariableRef y = m.AddVariable(Interval{0, kInf});
  m.AddConstraint(NonlinearEq{Expr::Variable(y) - Max(Expr::Const(0.0), Expr::Variable(x))});
  Assignment a;
  a.Set(x, 2.0);
  a.Set(y, 2.0);
  CHECK(CheckFeasible(m, a, 1e-8).feasible());
  a.Set(y, 1.0);
  const FeasibilityReport r = CheckFeasible(m, a, 1e-8);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].kind == Violation::Kind::kConstraint);
  CHECK(r.violations[0].index == 0);
  CHECK(r.violations[0].magnitude == 1.0);
}

TEST_CASE("check_feasible on SOS1, binaries, bounds and inequalities") {
  Model m;
  const VariableRef y = m.AddVariable(Interval{0, kInf});
  const VariableRef z = m.AddVariable(Interval{0, kInf});
  const VariableRef s = m.AddVariable(Interval{0, 1}, true);
  m.AddConstraint(Sos1{{y, z}, {1.0, 2.0}});
  m.AddConstraint(LinearIneq{{{y, 1.0}}, 3.0, Sense::kLessEqual});
  Assignment a;
  a.Set(y, 1.0);
  a.Set(z, 1.0);
  a.Set(s, 1.0);
  FeasibilityReport r = CheckFeasible(m, a, 1e-9);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].index == 0);
  a.Set(z, 0.0);
  CHECK(CheckFeasible(m, a, 1e-9).feasible());
  a.Set(s, 0.5);
  r = CheckFeasible(m, a, 1e-9);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].kind == Violation::Kind::kIntegrality);
  a.Set(s, 1.0);
  a.Set(y, 4.0);
  r = CheckFeasible(m, a, 1e-9);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].magnitude == 1.0);
  a.Set(y, -0.5);
  r = CheckFeasible(m, a, 1e-9);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].kind == Violation::Kind::kBound);
  CHECK(CheckFeasible(m, a, 0.6).feasible());
}

TEST_CASE("check_feasible needs a complete assignment") {
  Model m;
  m.AddVariable(Interval{0, 1});
  Assignment a;
  CHECK(CodeOf([&] { CheckFeasible(m, a, 1e-9); }) == ErrorCode::kIncompleteAssignment);
}

TEST_CASE("structural equality ignores model identity") {
  auto build = [] {
    Model m;
    const VariableRef x = m.AddVariable(Interval{0, 1});
    const VariableRef y = m.AddVariable(Interval::Entire());
    m.AddConstraint(NonlinearEq{Expr::Variable(y) - TanhExpr(Expr::Variable(x))});
    return m;
  };
  const Model a = build();
  const Model b = build();
  CHECK(StructurallyEqual(a, b));
  Model c = build();
  c.AddVariable(Interval{0, 1});
  CHECK_FALSE(StructurallyEqual(a, c));
}
