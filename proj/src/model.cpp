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

#include "mlembed/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mlembed/errors.hpp"
#include "mlembed/graybox.hpp"

namespace mlembed {

Interval Interval::Make(double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    std::ostringstream msg;
    msg << "interval [" << lo << ", " << hi << "] is empty or NaN";
    Fail(ErrorCode::kInvalidBounds, msg.str());
  }
  return {lo, hi};
}

bool Interval::IsFinite() const { return std::isfinite(lo) && std::isfinite(hi); }

namespace {

std::uint64_t NextModelId() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void CheckUniqueRow(const std::vector<LinearTerm>& row) {
  std::unordered_set<std::size_t> seen;
  for (const LinearTerm& t : row) {
    if (!seen.insert(t.var.id).second) {
      Fail(ErrorCode::kInvalidConstraint,
           "linear row references variable " + std::to_string(t.var.id) + " more than once");
    }
  }
}

}  // namespace

Model::Model() : id_(NextModelId()) {}

VariableRef Model::AddVariable(Interval bounds, bool binary) {
  Interval checked = Interval::Make(bounds.lo, bounds.hi);
  if (binary && (checked.lo < 0.0 || checked.hi > 1.0)) {
    Fail(ErrorCode::kInvalidBounds, "binary variable bounds must lie within [0, 1]");
  }
  variables_.push_back({checked, binary});
  return {id_, variables_.size() - 1};
}

void Model::CheckOwned(VariableRef v) const {
  if (v.model != id_ || v.id >= variables_.size()) {
    Fail(ErrorCode::kForeignVariable,
         "variable " + std::to_string(v.id) + " does not belong to this model");
  }
}

const VariableInfo& Model::variable(VariableRef v) const {
  CheckOwned(v);
  return variables_[v.id];
}

VariableRef Model::ref(std::size_t id) const {
  if (id >= variables_.size()) {
    Fail(ErrorCode::kForeignVariable, "no variable with id " + std::to_string(id));
  }
  return {id_, id};
}

ConstraintRef Model::AddConstraint(Constraint c) {
  std::visit(
      [&](auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, LinearEq> || std::is_same_v<T, LinearIneq>) {
          for (const LinearTerm& t : k.row) CheckOwned(t.var);
          CheckUniqueRow(k.row);
        } else if constexpr (std::is_same_v<T, NonlinearEq> || std::is_same_v<T, NonlinearIneq>) {
          for (VariableRef v : CollectVariables(k.expr)) CheckOwned(v);
        } else if constexpr (std::is_same_v<T, Sos1>) {
          for (VariableRef v : k.vars) CheckOwned(v);
          if (k.vars.size() != k.weights.size()) {
            Fail(ErrorCode::kInvalidSOS, "SOS1 needs one weight per member");
          }
          std::unordered_set<std::size_t> ids;
          for (VariableRef v : k.vars) {
            if (!ids.insert(v.id).second) Fail(ErrorCode::kInvalidSOS, "SOS1 repeats a member");
          }
          for (std::size_t i = 0; i < k.weights.size(); ++i) {
            if (!(k.weights[i] > 0.0) || !std::isfinite(k.weights[i])) {
              Fail(ErrorCode::kInvalidSOS, "SOS1 weights must be finite and positive");
            }
            for (std::size_t j = 0; j < i; ++j) {
              if (k.weights[i] == k.weights[j]) {
                Fail(ErrorCode::kInvalidSOS, "SOS1 weights must be pairwise distinct");
              }
            }
          }
        } else if constexpr (std::is_same_v<T, Integrality>) {
          CheckOwned(k.var);
          VariableInfo& info = variables_[k.var.id];
          if (info.bounds.lo < 0.0 || info.bounds.hi > 1.0) {
            Fail(ErrorCode::kInvalidBounds, "binary variable bounds must lie within [0, 1]");
          }
          info.binary = true;
        }
      },
      c);
  constraints_.push_back(std::move(c));
  return {constraints_.size() - 1};
}

OracleRef Model::AddOracle(OracleConstraint oc) {
  if (!oc.oracle) Fail(ErrorCode::kInvalidConstraint, "oracle constraint without a handle");
  for (VariableRef v : oc.inputs) CheckOwned(v);
  for (VariableRef v : oc.outputs) CheckOwned(v);
  if (oc.inputs.size() != oc.oracle->n_in() || oc.outputs.size() != oc.oracle->n_out()) {
    Fail(ErrorCode::kDimensionError, "oracle constraint arity does not match its handle");
  }
  oracles_.push_back(std::move(oc));
  return {oracles_.size() - 1};
}

bool Model::TightenBounds(VariableRef v, Interval bounds) {
  CheckOwned(v);
  Interval& cur = variables_[v.id].bounds;
  const double lo = std::max(cur.lo, bounds.lo);
  const double hi = std::min(cur.hi, bounds.hi);
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) return false;
  cur = {lo, hi};
  return true;
}

void Assignment::Set(std::size_t id, double value) {
  if (id >= values_.size()) {
    values_.resize(id + 1);
    set_.resize(id + 1, false);
  }
  values_[id] = value;
  set_[id] = true;
}

std::optional<double> Assignment::Get(std::size_t id) const {
  if (!Has(id)) return std::nullopt;
  return values_[id];
}

double Assignment::At(std::size_t id) const {
  if (!Has(id)) {
    Fail(ErrorCode::kIncompleteAssignment, "no value for variable " + std::to_string(id));
  }
  return values_[id];
}

void Assignment::Merge(const Assignment& other) {
  for (std::size_t i = 0; i < other.size(); ++i) {
    if (other.Has(i)) Set(i, other.values_[i]);
  }
}

namespace {

double MaxWithNan(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::nan("");
  return a < b ? b : a;
}

class Evaluator {
 public:
  explicit Evaluator(const Assignment& a) : assignment_(a) {}

  double Eval(const Expr& e) {
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    const double v = std::visit([&](const auto& n) { return Visit(n); }, e.node().data);
    memo_.emplace(e.id(), v);
    return v;
  }

 private:
  double Visit(const ConstantNode& n) { return n.value; }
  double Visit(const VarNode& n) { return assignment_.At(n.ref.id); }
  double Visit(const AffineNode& n) {
    double acc = 0.0;
    for (const auto& [coef, term] : n.terms) acc += coef * Eval(term);
    return acc + n.offset;
  }
  double Visit(const UnaryNode& n) {
    const double x = Eval(n.arg);
    switch (n.op) {
      case UnaryOp::kExp: return std::exp(x);
      case UnaryOp::kTanh: return std::tanh(x);
      case UnaryOp::kNeg: return -x;
      case UnaryOp::kLog1pExp: return Log1pExpValue(x);
    }
    return std::nan("");
  }
  double Visit(const BinaryNode& n) {
    const double a = Eval(n.lhs);
    const double b = Eval(n.rhs);
    switch (n.op) {
      case BinaryOp::kAdd: return a + b;
      case BinaryOp::kSub: return a - b;
      case BinaryOp::kMul: return a * b;
      case BinaryOp::kDiv: return a / b;
      case BinaryOp::kPow: return std::pow(a, b);
      case BinaryOp::kMax: return MaxWithNan(a, b);
    }
    return std::nan("");
  }
  double Visit(const OracleNode& n) {
    std::vector<double> x(n.inputs.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = Eval(n.inputs[i]);
    return n.oracle->Eval(x).at(n.index);
  }

  const Assignment& assignment_;
  std::unordered_map<const ExprNode*, double> memo_;
};

double RowValue(const std::vector<LinearTerm>& row, const Assignment& a) {
  double acc = 0.0;
  for (const LinearTerm& t : row) acc += t.coef * a.At(t.var.id);
  return acc;
}

// NaN residuals count as infinitely violated.
double Clean(double residual) { return std::isnan(residual) ? kInf : residual; }

}  // namespace

double EvalExpr(const Expr& e, const Assignment& assignment) {
  return Evaluator(assignment).Eval(e);
}

double FeasibilityReport::max_violation() const {
  double worst = 0.0;
  for (const Violation& v : violations) worst = std::max(worst, v.magnitude);
  return worst;
}

FeasibilityReport CheckFeasible(const Model& model, const Assignment& assignment, double tol) {
  for (std::size_t i = 0; i < model.num_variables(); ++i) {
    if (!assignment.Has(i)) {
      Fail(ErrorCode::kIncompleteAssignment, "no value for variable " + std::to_string(i));
    }
  }
  FeasibilityReport report;
  auto record = [&](Violation::Kind kind, std::size_t index, double residual, const char* what) {
    residual = Clean(residual);
    report.max_residual = std::max(report.max_residual, residual);
    if (residual > tol) report.violations.push_back({kind, index, residual, what});
  };

  for (std::size_t i = 0; i < model.num_variables(); ++i) {
    const VariableInfo& info = model.variable(i);
    const double v = assignment.At(i);
    record(Violation::Kind::kBound, i,
           std::max({info.bounds.lo - v, v - info.bounds.hi, 0.0}) + (std::isnan(v) ? kInf : 0.0),
           "bound");
    if (info.binary) {
      record(Violation::Kind::kIntegrality, i, std::min(std::fabs(v), std::fabs(v - 1.0)),
             "binary");
    }
  }

  const auto& cons = model.constraints();
  for (std::size_t i = 0; i < cons.size(); ++i) {
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, LinearEq>) {
            record(Violation::Kind::kConstraint, i, std::fabs(RowValue(k.row, assignment) - k.rhs),
                   "linear equality");
          } else if constexpr (std::is_same_v<T, LinearIneq>) {
            const double lhs = RowValue(k.row, assignment);
            const double excess = k.sense == Sense::kLessEqual ? lhs - k.rhs : k.rhs - lhs;
            record(Violation::Kind::kConstraint, i, std::isnan(excess) ? kInf : std::max(excess, 0.0),
                   "linear inequality");
          } else if constexpr (std::is_same_v<T, NonlinearEq>) {
            record(Violation::Kind::kConstraint, i, std::fabs(EvalExpr(k.expr, assignment)),
                   "nonlinear equality");
          } else if constexpr (std::is_same_v<T, NonlinearIneq>) {
            const double value = EvalExpr(k.expr, assignment);
            record(Violation::Kind::kConstraint, i, std::isnan(value) ? kInf : std::max(value, 0.0),
                   "nonlinear inequality");
          } else if constexpr (std::is_same_v<T, Sos1>) {
            // Residual: the second largest magnitude, i.e. what has to be
            // zeroed for at most one member to remain nonzero.
            double first = 0.0;
            double second = 0.0;
            for (VariableRef v : k.vars) {
              const double m = Clean(std::fabs(assignment.At(v.id)));
              if (m > first) {
                second = first;
                first = m;
              } else if (m > second) {
                second = m;
              }
            }
            record(Violation::Kind::kConstraint, i, second, "SOS1");
          } else if constexpr (std::is_same_v<T, Integrality>) {
            const double v = assignment.At(k.var.id);
            record(Violation::Kind::kConstraint, i, std::min(std::fabs(v), std::fabs(v - 1.0)),
                   "integrality");
          }
        },
        cons[i]);
  }

  const auto& oracles = model.oracles();
  for (std::size_t i = 0; i < oracles.size(); ++i) {
    const OracleConstraint& oc = oracles[i];
    std::vector<double> x(oc.inputs.size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = assignment.At(oc.inputs[j].id);
    const std::vector<double> fx = oc.oracle->Eval(x);
    double worst = 0.0;
    for (std::size_t j = 0; j < oc.outputs.size(); ++j) {
      worst = std::max(worst, Clean(std::fabs(fx[j] - assignment.At(oc.outputs[j].id))));
    }
    record(Violation::Kind::kOracle, i, worst, "oracle");
  }
  return report;
}

namespace {

bool SameRow(const std::vector<LinearTerm>& a, const std::vector<LinearTerm>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].var.id != b[i].var.id || a[i].coef != b[i].coef) return false;
  }
  return true;
}

std::vector<std::size_t> Ids(const std::vector<VariableRef>& refs) {
  std::vector<std::size_t> out;
  out.reserve(refs.size());
  for (VariableRef r : refs) out.push_back(r.id);
  return out;
}

}  // namespace

bool StructurallyEqual(const Constraint& a, const Constraint& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        const T& m = std::get<T>(b);
        if constexpr (std::is_same_v<T, LinearEq>) {
          return k.rhs == m.rhs && SameRow(k.row, m.row);
        } else if constexpr (std::is_same_v<T, LinearIneq>) {
          return k.rhs == m.rhs && k.sense == m.sense && SameRow(k.row, m.row);
        } else if constexpr (std::is_same_v<T, NonlinearEq> || std::is_same_v<T, NonlinearIneq>) {
          return StructurallyEqual(k.expr, m.expr);
        } else if constexpr (std::is_same_v<T, Sos1>) {
          return Ids(k.vars) == Ids(m.vars) && k.weights == m.weights;
        } else {
          return k.var.id == m.var.id;
        }
      },
      a);
}

bool StructurallyEqual(const Model& a, const Model& b) {
  if (a.variables() != b.variables()) return false;
  if (a.num_constraints() != b.num_constraints() || a.num_oracles() != b.num_oracles()) {
    return false;
  }
  for (std::size_t i = 0; i < a.num_constraints(); ++i) {
    if (!StructurallyEqual(a.constraints()[i], b.constraints()[i])) return false;
  }
  for (std::size_t i = 0; i < a.num_oracles(); ++i) {
    const OracleConstraint& x = a.oracles()[i];
    const OracleConstraint& y = b.oracles()[i];
    if (Ids(x.inputs) != Ids(y.inputs) || Ids(x.outputs) != Ids(y.outputs)) return false;
    const Predictor* px = x.oracle->predictor();
    const Predictor* py = y.oracle->predictor();
    if ((px == nullptr) != (py == nullptr)) return false;
    if (px != nullptr && !(*px == *py)) return false;
    if (x.oracle->has_hessian() != y.oracle->has_hessian()) return false;
  }
  return true;
}

}  // namespace mlembed
