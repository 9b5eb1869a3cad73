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

#include "mlembed/expr.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "activation_math.hpp"
#include "mlembed/graybox.hpp"

namespace mlembed {

namespace {

Expr MakeNode(auto&& data) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{std::forward<decltype(data)>(data)}));
}

const ConstantNode* AsConstant(const Expr& e) {
  return std::get_if<ConstantNode>(&e.node().data);
}

}  // namespace

Expr::Expr() : node_(std::make_shared<const ExprNode>(ExprNode{ConstantNode{0.0}})) {}

Expr::Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}

Expr Expr::Const(double value) { return MakeNode(ConstantNode{value}); }

Expr Expr::Variable(VariableRef ref) { return MakeNode(VarNode{ref}); }

Expr Expr::Affine(std::vector<std::pair<double, Expr>> terms, double offset) {
  return MakeNode(AffineNode{std::move(terms), offset});
}

Expr Expr::OracleOutput(std::shared_ptr<const OracleHandle> oracle, std::vector<Expr> inputs,
                        std::size_t index) {
  return MakeNode(OracleNode{std::move(oracle), std::move(inputs), index});
}

Expr Exp(Expr e) { return MakeNode(UnaryNode{UnaryOp::kExp, std::move(e)}); }
Expr TanhExpr(Expr e) { return MakeNode(UnaryNode{UnaryOp::kTanh, std::move(e)}); }
Expr Log1pExp(Expr e) { return MakeNode(UnaryNode{UnaryOp::kLog1pExp, std::move(e)}); }
Expr operator-(Expr e) { return MakeNode(UnaryNode{UnaryOp::kNeg, std::move(e)}); }

Expr Pow(Expr base, Expr exponent) {
  return MakeNode(BinaryNode{BinaryOp::kPow, std::move(base), std::move(exponent)});
}
Expr Max(Expr a, Expr b) { return MakeNode(BinaryNode{BinaryOp::kMax, std::move(a), std::move(b)}); }
Expr operator+(Expr a, Expr b) {
  return MakeNode(BinaryNode{BinaryOp::kAdd, std::move(a), std::move(b)});
}
Expr operator-(Expr a, Expr b) {
  return MakeNode(BinaryNode{BinaryOp::kSub, std::move(a), std::move(b)});
}
Expr operator*(Expr a, Expr b) {
  return MakeNode(BinaryNode{BinaryOp::kMul, std::move(a), std::move(b)});
}
Expr operator/(Expr a, Expr b) {
  return MakeNode(BinaryNode{BinaryOp::kDiv, std::move(a), std::move(b)});
}

double Log1pExpValue(double x) { return detail::Log1pExpOf(x); }

namespace {

// Accumulates scale * e into `form`, keyed by variable id.
class LinearCollector {
 public:
  bool Add(const Expr& e, double scale) {
    return std::visit([&](const auto& n) { return Visit(n, scale); }, e.node().data);
  }

  LinearForm Finish() {
    LinearForm out;
    out.constant = constant_;
    for (const LinearTerm& t : terms_) {
      if (t.coef != 0.0) out.terms.push_back(t);
    }
    return out;
  }

 private:
  bool Visit(const ConstantNode& n, double scale) {
    constant_ += scale * n.value;
    return true;
  }
  bool Visit(const VarNode& n, double scale) {
    auto [it, inserted] = slot_.try_emplace(n.ref.id, terms_.size());
    if (inserted) {
      terms_.push_back({n.ref, scale});
    } else {
      terms_[it->second].coef += scale;
    }
    return true;
  }
  bool Visit(const AffineNode& n, double scale) {
    for (const auto& [coef, term] : n.terms) {
      if (!Add(term, scale * coef)) return false;
    }
    constant_ += scale * n.offset;
    return true;
  }
  bool Visit(const UnaryNode& n, double scale) {
    if (n.op != UnaryOp::kNeg) return false;
    return Add(n.arg, -scale);
  }
  bool Visit(const BinaryNode& n, double scale) {
    switch (n.op) {
      case BinaryOp::kAdd:
        return Add(n.lhs, scale) && Add(n.rhs, scale);
      case BinaryOp::kSub:
        return Add(n.lhs, scale) && Add(n.rhs, -scale);
      case BinaryOp::kMul:
        if (const auto* c = AsConstant(n.lhs)) return Add(n.rhs, scale * c->value);
        if (const auto* c = AsConstant(n.rhs)) return Add(n.lhs, scale * c->value);
        return false;
      case BinaryOp::kDiv:
        if (const auto* c = AsConstant(n.rhs); c != nullptr && c->value != 0.0) {
          return Add(n.lhs, scale / c->value);
        }
        return false;
      case BinaryOp::kPow:
      case BinaryOp::kMax:
        return false;
    }
    return false;
  }
  bool Visit(const OracleNode&, double) { return false; }

  std::vector<LinearTerm> terms_;
  std::unordered_map<std::size_t, std::size_t> slot_;
  double constant_ = 0.0;
};

}  // namespace

std::optional<LinearForm> AsLinear(const Expr& e) {
  LinearCollector collector;
  if (!collector.Add(e, 1.0)) return std::nullopt;
  return collector.Finish();
}

namespace {

bool SameOracle(const OracleNode& a, const OracleNode& b) {
  if (a.oracle == b.oracle) return true;
  if (!a.oracle || !b.oracle) return false;
  const Predictor* pa = a.oracle->predictor();
  const Predictor* pb = b.oracle->predictor();
  return pa != nullptr && pb != nullptr && *pa == *pb && a.oracle->n_in() == b.oracle->n_in() &&
         a.oracle->has_hessian() == b.oracle->has_hessian();
}

}  // namespace

bool StructurallyEqual(const Expr& a, const Expr& b) {
  if (a.id() == b.id()) return true;
  const auto& da = a.node().data;
  const auto& db = b.node().data;
  if (da.index() != db.index()) return false;
  if (const auto* n = std::get_if<ConstantNode>(&da)) {
    const double other = std::get<ConstantNode>(db).value;
    return n->value == other || (std::isnan(n->value) && std::isnan(other));
  }
  if (const auto* n = std::get_if<VarNode>(&da)) return n->ref.id == std::get<VarNode>(db).ref.id;
  if (const auto* n = std::get_if<AffineNode>(&da)) {
    const auto& m = std::get<AffineNode>(db);
    if (n->offset != m.offset || n->terms.size() != m.terms.size()) return false;
    for (std::size_t i = 0; i < n->terms.size(); ++i) {
      if (n->terms[i].first != m.terms[i].first) return false;
      if (!StructurallyEqual(n->terms[i].second, m.terms[i].second)) return false;
    }
    return true;
  }
  if (const auto* n = std::get_if<UnaryNode>(&da)) {
    const auto& m = std::get<UnaryNode>(db);
    return n->op == m.op && StructurallyEqual(n->arg, m.arg);
  }
  if (const auto* n = std::get_if<BinaryNode>(&da)) {
    const auto& m = std::get<BinaryNode>(db);
    return n->op == m.op && StructurallyEqual(n->lhs, m.lhs) && StructurallyEqual(n->rhs, m.rhs);
  }
  const auto& n = std::get<OracleNode>(da);
  const auto& m = std::get<OracleNode>(db);
  if (n.index != m.index || n.inputs.size() != m.inputs.size() || !SameOracle(n, m)) return false;
  for (std::size_t i = 0; i < n.inputs.size(); ++i) {
    if (!StructurallyEqual(n.inputs[i], m.inputs[i])) return false;
  }
  return true;
}

std::vector<VariableRef> CollectVariables(const Expr& e) {
  std::vector<VariableRef> out;
  std::unordered_set<const ExprNode*> seen_nodes;
  std::unordered_set<std::size_t> seen_ids;
  std::vector<const Expr*> stack{&e};
  while (!stack.empty()) {
    const Expr* cur = stack.back();
    stack.pop_back();
    if (!seen_nodes.insert(cur->id()).second) continue;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, VarNode>) {
            if (seen_ids.insert(n.ref.id).second) out.push_back(n.ref);
          } else if constexpr (std::is_same_v<T, AffineNode>) {
            for (auto it = n.terms.rbegin(); it != n.terms.rend(); ++it) stack.push_back(&it->second);
          } else if constexpr (std::is_same_v<T, UnaryNode>) {
            stack.push_back(&n.arg);
          } else if constexpr (std::is_same_v<T, BinaryNode>) {
            stack.push_back(&n.rhs);
            stack.push_back(&n.lhs);
          } else if constexpr (std::is_same_v<T, OracleNode>) {
            for (auto it = n.inputs.rbegin(); it != n.inputs.rend(); ++it) stack.push_back(&*it);
          }
        },
        cur->node().data);
  }
  return out;
}

}  // namespace mlembed
