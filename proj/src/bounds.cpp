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

#include "mlembed/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "activation_math.hpp"
#include "mlembed/errors.hpp"
#include "mlembed/graybox.hpp"
#include "mlembed/simd.hpp"

namespace mlembed {

namespace {

template <typename F>
std::vector<Interval> Monotone(std::span<const Interval> in, F&& f) {
  std::vector<Interval> out;
  out.reserve(in.size());
  for (const Interval& i : in) out.push_back({f(i.lo), f(i.hi)});
  return out;
}

std::vector<Interval> AffineImage(const Affine& a, std::span<const Interval> in) {
  std::vector<double> lo(in.size());
  std::vector<double> hi(in.size());
  for (std::size_t j = 0; j < in.size(); ++j) {
    lo[j] = in[j].lo;
    hi[j] = in[j].hi;
  }
  std::vector<double> out_lo(a.A.rows);
  std::vector<double> out_hi(a.A.rows);
  simd::Kernels().interval_matvec(a.A.data.data(), a.A.rows, a.A.cols, lo.data(), hi.data(),
                                  a.b.data(), out_lo.data(), out_hi.data());
  std::vector<Interval> out(a.A.rows);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {out_lo[i], out_hi[i]};
  return out;
}

// Component i is increasing in x_i and decreasing in every other x_j, so
// its extremes sit at (l_i, u_{j != i}) and (u_i, l_{j != i}). Written as
// 1 / (1 + sum e^{x_j - x_i}) to stay finite for large endpoints.
std::vector<Interval> SoftMaxImage(std::span<const Interval> in) {
  std::vector<Interval> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    double lower = 0.0;
    if (in[i].lo != -kInf) {
      double rest = 0.0;
      for (std::size_t j = 0; j < in.size(); ++j) {
        if (j != i) rest += std::exp(in[j].hi - in[i].lo);
      }
      lower = 1.0 / (1.0 + rest);
    }
    double upper = 1.0;
    if (in[i].hi != kInf) {
      double rest = 0.0;
      for (std::size_t j = 0; j < in.size(); ++j) {
        if (j != i && in[j].lo != -kInf) rest += std::exp(in[j].lo - in[i].hi);
      }
      upper = 1.0 / (1.0 + rest);
    }
    // A handful of roundings separate these from the exact ratios; widen by
    // that many ulps so the enclosure stays sound.
    constexpr double kSlack = 8.0 * std::numeric_limits<double>::epsilon();
    out[i] = {std::clamp(lower * (1.0 - kSlack), 0.0, 1.0),
              std::clamp(upper * (1.0 + kSlack), 0.0, 1.0)};
  }
  return out;
}

// Hull of the leaves reachable from the box. x == threshold goes left, so
// the right branch needs some x > threshold.
Interval TreeImage(const DecisionTree& t, std::span<const Interval> in) {
  Interval hull{kInf, -kInf};
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const TreeNode& n = t.nodes[stack.back()];
    stack.pop_back();
    if (n.is_leaf()) {
      hull.lo = std::min(hull.lo, n.value);
      hull.hi = std::max(hull.hi, n.value);
      continue;
    }
    const Interval& x = in[static_cast<std::size_t>(n.feature)];
    if (x.hi > n.threshold) stack.push_back(n.right);
    if (x.lo <= n.threshold) stack.push_back(n.left);
  }
  return hull;
}

std::vector<Interval> PropagateUnchecked(const Predictor& p, std::span<const Interval> in) {
  struct Visitor {
    std::span<const Interval> in;
    std::vector<Interval> operator()(const Affine& a) const { return AffineImage(a, in); }
    std::vector<Interval> operator()(const ReLU&) const {
      return Monotone(in, [](double v) { return std::max(0.0, v); });
    }
    std::vector<Interval> operator()(const Sigmoid&) const {
      return Monotone(in, [](double v) { return detail::SigmoidOf(v); });
    }
    std::vector<Interval> operator()(const Tanh&) const {
      return Monotone(in, [](double v) { return detail::TanhOf(v); });
    }
    std::vector<Interval> operator()(const SoftPlus& s) const {
      return Monotone(in, [beta = s.beta](double v) { return detail::SoftPlusOf(v, beta); });
    }
    std::vector<Interval> operator()(const SoftMax&) const { return SoftMaxImage(in); }
    std::vector<Interval> operator()(const Pipeline& pl) const {
      std::vector<Interval> cur(in.begin(), in.end());
      for (const Predictor& layer : pl.layers) cur = PropagateUnchecked(layer, cur);
      return cur;
    }
    std::vector<Interval> operator()(const DecisionTree& t) const { return {TreeImage(t, in)}; }
    std::vector<Interval> operator()(const RandomForest& f) const {
      Interval sum{0.0, 0.0};
      for (const DecisionTree& t : f.trees) {
        const Interval r = TreeImage(t, in);
        sum.lo += r.lo;
        sum.hi += r.hi;
      }
      const auto n = static_cast<double>(f.trees.size());
      return {{sum.lo / n, sum.hi / n}};
    }
    std::vector<Interval> operator()(const GradientBoostedTrees& g) const {
      Interval sum{g.base_score, g.base_score};
      for (const DecisionTree& t : g.trees) {
        const Interval r = TreeImage(t, in);
        sum.lo += r.lo;
        sum.hi += r.hi;
      }
      return {sum};
    }
    std::vector<Interval> operator()(const LogisticRegression& lr) const {
      const std::vector<Interval> z = AffineImage(lr.affine, in);
      return Monotone(z, [](double v) { return detail::SigmoidOf(v); });
    }
  };
  return std::visit(Visitor{in}, p.variant());
}

// Endpoint products with 0 * inf read as 0.
double SafeMul(double a, double b) { return (a == 0.0 || b == 0.0) ? 0.0 : a * b; }

Interval Multiply(Interval a, Interval b) {
  const double c[] = {SafeMul(a.lo, b.lo), SafeMul(a.lo, b.hi), SafeMul(a.hi, b.lo),
                      SafeMul(a.hi, b.hi)};
  return {*std::min_element(std::begin(c), std::end(c)), *std::max_element(std::begin(c), std::end(c))};
}

class IntervalEvaluator {
 public:
  explicit IntervalEvaluator(const Model& model) : model_(model) {}

  Interval Eval(const Expr& e) {
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    Interval r = std::visit([&](const auto& n) { return Visit(n); }, e.node().data);
    if (std::isnan(r.lo) || std::isnan(r.hi)) r = Interval::Entire();
    memo_.emplace(e.id(), r);
    return r;
  }

 private:
  Interval Visit(const ConstantNode& n) { return Interval::Point(n.value); }
  Interval Visit(const VarNode& n) { return model_.variable(n.ref).bounds; }
  Interval Visit(const AffineNode& n) {
    Interval acc = Interval::Point(n.offset);
    for (const auto& [coef, term] : n.terms) {
      const Interval t = Eval(term);
      const Interval s = Multiply(Interval::Point(coef), t);
      acc.lo += s.lo;
      acc.hi += s.hi;
    }
    return acc;
  }
  Interval Visit(const UnaryNode& n) {
    const Interval x = Eval(n.arg);
    switch (n.op) {
      case UnaryOp::kExp: return {std::exp(x.lo), std::exp(x.hi)};
      case UnaryOp::kTanh: return {std::tanh(x.lo), std::tanh(x.hi)};
      case UnaryOp::kNeg: return {-x.hi, -x.lo};
      case UnaryOp::kLog1pExp: return {Log1pExpValue(x.lo), Log1pExpValue(x.hi)};
    }
    return Interval::Entire();
  }
  Interval Visit(const BinaryNode& n) {
    const Interval a = Eval(n.lhs);
    const Interval b = Eval(n.rhs);
    switch (n.op) {
      case BinaryOp::kAdd: return {a.lo + b.lo, a.hi + b.hi};
      case BinaryOp::kSub: return {a.lo - b.hi, a.hi - b.lo};
      case BinaryOp::kMul: return Multiply(a, b);
      case BinaryOp::kDiv:
        if (b.lo <= 0.0 && b.hi >= 0.0) return Interval::Entire();
        return Multiply(a, {1.0 / b.hi, 1.0 / b.lo});
      case BinaryOp::kPow:
        if (a.lo == a.hi && b.lo == b.hi) return Interval::Point(std::pow(a.lo, b.lo));
        return Interval::Entire();
      case BinaryOp::kMax: return {std::max(a.lo, b.lo), std::max(a.hi, b.hi)};
    }
    return Interval::Entire();
  }
  Interval Visit(const OracleNode& n) {
    const Predictor* p = n.oracle->predictor();
    if (p == nullptr) return Interval::Entire();
    std::vector<Interval> in;
    for (const Expr& e : n.inputs) in.push_back(Eval(e));
    return Propagate(*p, in).at(n.index);
  }

  const Model& model_;
  std::unordered_map<const ExprNode*, Interval> memo_;
};

void Tighten(Model& model, const VectorOrExpr& outputs, std::span<const Interval> bounds) {
  for (std::size_t i = 0; i < outputs.size() && i < bounds.size(); ++i) {
    if (const auto* v = std::get_if<VariableRef>(&outputs[i])) model.TightenBounds(*v, bounds[i]);
  }
}

std::vector<Interval> Attach(Model& model, const Formulation& f, std::span<const Interval> input) {
  std::vector<Interval> out;
  if (!f.children.empty()) {
    std::vector<Interval> cur(input.begin(), input.end());
    for (const Formulation& child : f.children) cur = Attach(model, child, cur);
    out = std::move(cur);
  } else if (!f.members.empty()) {
    std::vector<Interval> tree_out;
    for (std::size_t m = 0; m + 1 < f.members.size(); ++m) {
      const std::vector<Interval> r = Attach(model, f.members[m], input);
      tree_out.insert(tree_out.end(), r.begin(), r.end());
    }
    Attach(model, f.members.back(), tree_out);
    out = Propagate(*f.predictor, input);
  } else {
    out = Propagate(*f.predictor, input);
  }
  Tighten(model, f.outputs, out);

  for (std::size_t i = 0; i < f.slacks.size() && i < input.size(); ++i) {
    model.TightenBounds(f.slacks[i], {std::max(0.0, -input[i].hi), std::max(0.0, -input[i].lo)});
  }
  if (f.denominator) {
    Interval d{0.0, 0.0};
    for (const Interval& x : input) {
      d.lo += std::exp(x.lo);
      d.hi += std::exp(x.hi);
    }
    model.TightenBounds(*f.denominator, d);
  }
  return out;
}

}  // namespace

std::vector<Interval> Propagate(const Predictor& p, std::span<const Interval> input) {
  if (input.empty()) Fail(ErrorCode::kDimensionError, "bound propagation needs a non-empty box");
  const Dims d = GetDims(p);
  if (d.n_in && *d.n_in != input.size()) {
    Fail(ErrorCode::kDimensionError, std::string(KindName(p)) + " expects " +
                                         std::to_string(*d.n_in) + " input intervals, got " +
                                         std::to_string(input.size()));
  }
  return PropagateUnchecked(p, input);
}

Interval IntervalOf(const Expr& e, const Model& model) { return IntervalEvaluator(model).Eval(e); }

std::vector<Interval> InputIntervals(const Model& model, const VectorOrExpr& x) {
  IntervalEvaluator eval(model);
  std::vector<Interval> out;
  out.reserve(x.size());
  for (const Operand& op : x) {
    if (const auto* v = std::get_if<VariableRef>(&op)) {
      out.push_back(model.variable(*v).bounds);
    } else {
      out.push_back(eval.Eval(std::get<Expr>(op)));
    }
  }
  return out;
}

void AttachBounds(Model& model, const Formulation& formulation, std::span<const Interval> input) {
  Attach(model, formulation, input);
}

}  // namespace mlembed
