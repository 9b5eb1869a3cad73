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

#include "mlembed/formulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "mlembed/bounds.hpp"
#include "mlembed/errors.hpp"
#include "mlembed/graybox.hpp"

namespace mlembed {

VectorOrExpr Operands(std::span<const VariableRef> vars) {
  return VectorOrExpr(vars.begin(), vars.end());
}

Expr ToExpr(const Operand& op) {
  if (const auto* v = std::get_if<VariableRef>(&op)) return Expr::Variable(*v);
  return std::get<Expr>(op);
}

double EvalOperand(const Operand& op, const Assignment& assignment) {
  if (const auto* v = std::get_if<VariableRef>(&op)) return assignment.At(v->id);
  return EvalExpr(std::get<Expr>(op), assignment);
}

Assignment Formulation::Witness(std::span<const double> x0) const {
  Assignment out;
  WitnessInto(x0, out);
  return out;
}

std::vector<double> Formulation::WitnessInto(std::span<const double> x0, Assignment& out) const {
  return witness(x0, out);
}

namespace {

using Result = std::pair<VectorOrExpr, Formulation>;

enum class Relation { kEq, kLe, kGe };

// Smallest positive value the SoftMax denominator may take per component.
constexpr double kDenominatorFloor = std::numeric_limits<double>::min();

Formulation NewFormulation(Predictor p) {
  Formulation f;
  f.predictor = std::make_shared<const Predictor>(std::move(p));
  return f;
}

VariableRef NewVariable(Model& model, Formulation& f, Interval bounds, bool binary = false) {
  VariableRef v = model.AddVariable(bounds, binary);
  f.added_vars.push_back(v);
  return v;
}

// Adds `expr (= | <= | >=) 0`, lowered to a linear row whenever the
// expression is affine in the model variables.
void AddRelation(Model& model, Formulation& f, const Expr& expr, Relation rel) {
  if (auto lin = AsLinear(expr)) {
    const double rhs = -lin->constant;
    if (rel == Relation::kEq) {
      f.added_cons.push_back(model.AddConstraint(LinearEq{std::move(lin->terms), rhs}));
    } else {
      const Sense sense = rel == Relation::kLe ? Sense::kLessEqual : Sense::kGreaterEqual;
      f.added_cons.push_back(model.AddConstraint(LinearIneq{std::move(lin->terms), rhs, sense}));
    }
    return;
  }
  switch (rel) {
    case Relation::kEq:
      f.added_cons.push_back(model.AddConstraint(NonlinearEq{expr}));
      break;
    case Relation::kLe:
      f.added_cons.push_back(model.AddConstraint(NonlinearIneq{expr}));
      break;
    case Relation::kGe:
      f.added_cons.push_back(model.AddConstraint(NonlinearIneq{-expr}));
      break;
  }
}

void Absorb(Formulation& parent, const Formulation& child) {
  parent.added_vars.insert(parent.added_vars.end(), child.added_vars.begin(), child.added_vars.end());
  parent.added_cons.insert(parent.added_cons.end(), child.added_cons.begin(), child.added_cons.end());
  parent.added_oracles.insert(parent.added_oracles.end(), child.added_oracles.begin(),
                              child.added_oracles.end());
}

void CheckArity(const Predictor& p, std::size_t n) {
  if (n == 0) Fail(ErrorCode::kDimensionError, "predictor input must be non-empty");
  const Dims d = GetDims(p);
  if (d.n_in && *d.n_in != n) {
    Fail(ErrorCode::kDimensionError, std::string(KindName(p)) + " expects " +
                                         std::to_string(*d.n_in) + " inputs, got " +
                                         std::to_string(n));
  }
}

void CheckFinite(std::span<const Interval> bounds, std::size_t i, const char* who) {
  if (!bounds[i].IsFinite()) {
    Fail(ErrorCode::kUnboundedInput, std::string(who) + " needs a finite interval on input " +
                                         std::to_string(i));
  }
}

// Per-element expression for a smooth activation.
Expr SmoothExpr(const Predictor& kind, const Expr& x) {
  if (kind.Is<Sigmoid>()) return Expr::Const(1.0) / (Expr::Const(1.0) + Exp(-x));
  if (kind.Is<Tanh>()) return TanhExpr(x);
  const double beta = kind.As<SoftPlus>().beta;
  return Log1pExp(Expr::Affine({{beta, x}}, 0.0)) / Expr::Const(beta);
}

Interval SmoothRange(const Predictor& kind) {
  if (kind.Is<Sigmoid>()) return {0.0, 1.0};
  if (kind.Is<Tanh>()) return {-1.0, 1.0};
  return {0.0, kInf};
}

Result Dispatch(Model& model, const Predictor& p, const VectorOrExpr& x,
                const FormulationConfig& cfg, std::span<const Interval> bounds, bool nested);

Result FormulateLayers(Model& model, Predictor whole, const std::vector<Predictor>& layers,
                       const VectorOrExpr& x, const FormulationConfig& cfg,
                       std::span<const Interval> input_bounds) {
  Formulation f = NewFormulation(std::move(whole));
  VectorOrExpr cur = x;
  std::vector<Interval> bounds(input_bounds.begin(), input_bounds.end());
  for (const Predictor& layer : layers) {
    auto [y, child] = Dispatch(model, layer, cur, cfg, bounds, /*nested=*/true);
    bounds = Propagate(layer, bounds);
    Absorb(f, child);
    f.children.push_back(std::move(child));
    cur = std::move(y);
  }
  f.outputs = cur;
  // Children are copied into the closure so the witness outlives `f` moves.
  std::vector<Formulation::WitnessFn> steps;
  for (const Formulation& c : f.children) steps.push_back(c.witness);
  f.witness = [steps](std::span<const double> x0, Assignment& out) {
    std::vector<double> cur_values(x0.begin(), x0.end());
    for (const auto& step : steps) cur_values = step(cur_values, out);
    return cur_values;
  };
  return {cur, std::move(f)};
}

Result Dispatch(Model& model, const Predictor& p, const VectorOrExpr& x,
                const FormulationConfig& cfg, std::span<const Interval> bounds, bool nested) {
  CheckArity(p, x.size());
  const bool reduced = cfg.reduced_space;
  if (const auto* a = std::get_if<Affine>(&p.variant())) return FormulateAffine(model, *a, x, reduced);
  if (const auto* r = std::get_if<ReLU>(&p.variant())) {
    const ReluVariant variant = r->variant.value_or(cfg.relu_variant);
    if (reduced && variant != ReluVariant::kNonSmooth && !nested) {
      Fail(ErrorCode::kUnsupportedReducedSpace, "this ReLU variant has no reduced-space form");
    }
    return FormulateRelu(model, x, variant, bounds, reduced && variant == ReluVariant::kNonSmooth);
  }
  if (p.Is<Sigmoid>() || p.Is<Tanh>() || p.Is<SoftPlus>()) {
    return FormulateSmoothActivation(model, p, x, reduced);
  }
  if (p.Is<SoftMax>()) return FormulateSoftmax(model, x, reduced);
  if (const auto* pl = std::get_if<Pipeline>(&p.variant())) {
    return FormulateLayers(model, p, pl->layers, x, cfg, bounds);
  }
  if (const auto* lr = std::get_if<LogisticRegression>(&p.variant())) {
    return FormulateLayers(model, p, {lr->affine, Sigmoid{}}, x, cfg, bounds);
  }
  if (reduced && !nested) {
    Fail(ErrorCode::kUnsupportedReducedSpace,
         std::string(KindName(p)) + " has no reduced-space form");
  }
  if (const auto* t = std::get_if<DecisionTree>(&p.variant())) {
    return FormulateTree(model, *t, x, bounds);
  }
  return FormulateEnsemble(model, p, x, bounds);
}

void CheckOperandsOwned(const Model& model, const VectorOrExpr& x) {
  for (const Operand& op : x) {
    if (const auto* v = std::get_if<VariableRef>(&op)) {
      model.CheckOwned(*v);
    } else {
      for (VariableRef v2 : CollectVariables(std::get<Expr>(op))) model.CheckOwned(v2);
    }
  }
}

}  // namespace

Result AddPredictor(Model& model, const Predictor& p, const VectorOrExpr& x,
                    const FormulationConfig& cfg) {
  cfg.Validate();
  Validate(p);
  CheckOperandsOwned(model, x);
  const Predictor rewritten = ApplyConfig(p, cfg);
  CheckArity(rewritten, x.size());
  if (cfg.gray_box) return AddGrayBox(model, rewritten, x, cfg);
  const std::vector<Interval> bounds = InputIntervals(model, x);
  return Dispatch(model, rewritten, x, cfg, bounds, /*nested=*/false);
}

Result FormulateAffine(Model& model, const Affine& affine, const VectorOrExpr& x, bool reduced) {
  if (affine.A.cols != x.size()) {
    Fail(ErrorCode::kDimensionError, "affine map expects " + std::to_string(affine.A.cols) +
                                         " inputs, got " + std::to_string(x.size()));
  }
  Formulation f = NewFormulation(affine);
  std::vector<Expr> xs;
  xs.reserve(x.size());
  for (const Operand& op : x) xs.push_back(ToExpr(op));

  VectorOrExpr y;
  std::vector<VariableRef> outs;
  for (std::size_t i = 0; i < affine.A.rows; ++i) {
    std::vector<std::pair<double, Expr>> terms;
    for (std::size_t j = 0; j < affine.A.cols; ++j) {
      if (affine.A(i, j) != 0.0) terms.emplace_back(affine.A(i, j), xs[j]);
    }
    if (reduced) {
      y.push_back(Expr::Affine(std::move(terms), affine.b[i]));
      continue;
    }
    const VariableRef yi = NewVariable(model, f, Interval::Entire());
    outs.push_back(yi);
    y.push_back(yi);
    // A_i x + b_i - y_i = 0
    terms.emplace_back(-1.0, Expr::Variable(yi));
    AddRelation(model, f, Expr::Affine(std::move(terms), affine.b[i]), Relation::kEq);
  }
  f.outputs = y;
  f.witness = [predictor = f.predictor, outs](std::span<const double> x0, Assignment& out) {
    std::vector<double> v = Predict(*predictor, x0);
    for (std::size_t i = 0; i < outs.size(); ++i) out.Set(outs[i], v[i]);
    return v;
  };
  return {y, std::move(f)};
}

Result FormulateRelu(Model& model, const VectorOrExpr& x, ReluVariant variant,
                     std::span<const Interval> input_bounds, bool reduced) {
  if (variant == ReluVariant::kBigM) {
    if (input_bounds.size() != x.size()) {
      Fail(ErrorCode::kDimensionError, "BigM ReLU needs one input interval per element");
    }
    for (std::size_t i = 0; i < x.size(); ++i) CheckFinite(input_bounds, i, "BigM ReLU");
  }
  if (reduced && variant != ReluVariant::kNonSmooth) {
    Fail(ErrorCode::kUnsupportedReducedSpace, "this ReLU variant has no reduced-space form");
  }
  Formulation f = NewFormulation(ReLU{variant});
  VectorOrExpr y;
  std::vector<VariableRef> outs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Expr xi = ToExpr(x[i]);
    if (reduced) {
      y.push_back(Max(Expr::Const(0.0), xi));
      continue;
    }
    switch (variant) {
      case ReluVariant::kNonSmooth: {
        const VariableRef yi = NewVariable(model, f, {0.0, kInf});
        AddRelation(model, f, Expr::Variable(yi) - Max(Expr::Const(0.0), xi), Relation::kEq);
        outs.push_back(yi);
        break;
      }
      case ReluVariant::kQuadratic: {
        // y = x + z, y * z <= 0, y, z >= 0
        const VariableRef yi = NewVariable(model, f, {0.0, kInf});
        const VariableRef zi = NewVariable(model, f, {0.0, kInf});
        AddRelation(model, f,
                    Expr::Affine({{1.0, Expr::Variable(yi)}, {-1.0, xi}, {-1.0, Expr::Variable(zi)}},
                                 0.0),
                    Relation::kEq);
        AddRelation(model, f, Expr::Variable(yi) * Expr::Variable(zi), Relation::kLe);
        outs.push_back(yi);
        f.slacks.push_back(zi);
        break;
      }
      case ReluVariant::kSos1: {
        // y - z = x, SOS1(y, z)
        const VariableRef yi = NewVariable(model, f, {0.0, kInf});
        const VariableRef zi = NewVariable(model, f, {0.0, kInf});
        AddRelation(model, f,
                    Expr::Affine({{1.0, Expr::Variable(yi)}, {-1.0, Expr::Variable(zi)}, {-1.0, xi}},
                                 0.0),
                    Relation::kEq);
        f.added_cons.push_back(model.AddConstraint(Sos1{{yi, zi}, {1.0, 2.0}}));
        outs.push_back(yi);
        f.slacks.push_back(zi);
        break;
      }
      case ReluVariant::kBigM: {
        const double lo = input_bounds[i].lo;
        const double hi = input_bounds[i].hi;
        const VariableRef yi = NewVariable(model, f, {0.0, std::max(0.0, hi)});
        const VariableRef si = NewVariable(model, f, {0.0, 1.0}, /*binary=*/true);
        const Expr ye = Expr::Variable(yi);
        const Expr se = Expr::Variable(si);
        // y >= x
        AddRelation(model, f, Expr::Affine({{1.0, ye}, {-1.0, xi}}, 0.0), Relation::kGe);
        // y <= x - lo * (1 - s)
        AddRelation(model, f, Expr::Affine({{1.0, ye}, {-1.0, xi}, {-lo, se}}, lo), Relation::kLe);
        // y <= hi * s
        AddRelation(model, f, Expr::Affine({{1.0, ye}, {-hi, se}}, 0.0), Relation::kLe);
        outs.push_back(yi);
        f.indicators.push_back(si);
        break;
      }
    }
    y.push_back(outs.back());
  }
  f.outputs = y;
  f.witness = [outs, slacks = f.slacks, indicators = f.indicators](std::span<const double> x0,
                                                                    Assignment& out) {
    std::vector<double> v(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
      v[i] = x0[i] > 0.0 ? x0[i] : 0.0;
      if (i < outs.size()) out.Set(outs[i], v[i]);
      if (i < slacks.size()) out.Set(slacks[i], x0[i] < 0.0 ? -x0[i] : 0.0);
      if (i < indicators.size()) out.Set(indicators[i], x0[i] > 0.0 ? 1.0 : 0.0);
    }
    return v;
  };
  return {y, std::move(f)};
}

Result FormulateSmoothActivation(Model& model, const Predictor& kind, const VectorOrExpr& x,
                                 bool reduced) {
  if (!(kind.Is<Sigmoid>() || kind.Is<Tanh>() || kind.Is<SoftPlus>())) {
    Fail(ErrorCode::kDimensionError,
         std::string(KindName(kind)) + " is not a smooth element-wise activation");
  }
  Formulation f = NewFormulation(kind);
  VectorOrExpr y;
  std::vector<VariableRef> outs;
  for (const Operand& op : x) {
    const Expr fx = SmoothExpr(kind, ToExpr(op));
    if (reduced) {
      y.push_back(fx);
      continue;
    }
    const VariableRef yi = NewVariable(model, f, SmoothRange(kind));
    AddRelation(model, f, Expr::Variable(yi) - fx, Relation::kEq);
    outs.push_back(yi);
    y.push_back(yi);
  }
  f.outputs = y;
  f.witness = [predictor = f.predictor, outs](std::span<const double> x0, Assignment& out) {
    std::vector<double> v = Predict(*predictor, x0);
    for (std::size_t i = 0; i < outs.size(); ++i) out.Set(outs[i], v[i]);
    return v;
  };
  return {y, std::move(f)};
}

Result FormulateSoftmax(Model& model, const VectorOrExpr& x, bool reduced) {
  if (x.empty()) Fail(ErrorCode::kDimensionError, "softmax needs at least one input");
  Formulation f = NewFormulation(SoftMax{});
  std::vector<Expr> exps;
  std::vector<std::pair<double, Expr>> sum_terms;
  for (const Operand& op : x) {
    exps.push_back(Exp(ToExpr(op)));
    sum_terms.emplace_back(1.0, exps.back());
  }
  const Expr total = Expr::Affine(sum_terms, 0.0);

  VectorOrExpr y;
  std::vector<VariableRef> outs;
  std::optional<VariableRef> denominator;
  if (reduced) {
    for (const Expr& e : exps) y.push_back(e / total);
  } else {
    const VariableRef d =
        NewVariable(model, f, {static_cast<double>(x.size()) * kDenominatorFloor, kInf});
    denominator = d;
    f.denominator = d;
    AddRelation(model, f, Expr::Variable(d) - total, Relation::kEq);
    std::vector<std::pair<double, Expr>> normalisation;
    for (const Expr& e : exps) {
      const VariableRef yi = NewVariable(model, f, {0.0, 1.0});
      AddRelation(model, f, Expr::Variable(yi) * Expr::Variable(d) - e, Relation::kEq);
      normalisation.emplace_back(1.0, Expr::Variable(yi));
      outs.push_back(yi);
      y.push_back(yi);
    }
    AddRelation(model, f, Expr::Affine(std::move(normalisation), -1.0), Relation::kEq);
  }
  f.outputs = y;
  f.witness = [outs, denominator](std::span<const double> x0, Assignment& out) {
    std::vector<double> v = Predict(SoftMax{}, x0);
    for (std::size_t i = 0; i < outs.size(); ++i) out.Set(outs[i], v[i]);
    if (denominator) {
      double total_value = 0.0;
      for (double xi : x0) total_value += 1.0 * std::exp(xi);
      out.Set(*denominator, total_value);
    }
    return v;
  };
  return {y, std::move(f)};
}

Result FormulateTree(Model& model, const DecisionTree& tree, const VectorOrExpr& x,
                     std::span<const Interval> input_bounds) {
  if (x.size() != tree.n_inputs) {
    Fail(ErrorCode::kDimensionError, "decision tree expects " + std::to_string(tree.n_inputs) +
                                         " inputs, got " + std::to_string(x.size()));
  }
  const std::vector<TreePath> paths = EnumeratePaths(tree);
  for (const TreePath& path : paths) {
    for (const TreePath::Step& s : path.steps) CheckFinite(input_bounds, s.feature, "decision tree");
  }

  Formulation f = NewFormulation(tree);
  std::vector<Expr> xs;
  for (const Operand& op : x) xs.push_back(ToExpr(op));

  std::vector<VariableRef> deltas;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    deltas.push_back(NewVariable(model, f, {0.0, 1.0}, /*binary=*/true));
  }
  const VariableRef y = NewVariable(model, f, Interval::Entire());

  // sum_p delta_p = 1
  std::vector<std::pair<double, Expr>> one_hot;
  for (VariableRef d : deltas) one_hot.emplace_back(1.0, Expr::Variable(d));
  AddRelation(model, f, Expr::Affine(one_hot, -1.0), Relation::kEq);

  // y = sum_p leaf_p * delta_p
  std::vector<std::pair<double, Expr>> selection{{1.0, Expr::Variable(y)}};
  for (std::size_t p = 0; p < paths.size(); ++p) {
    selection.emplace_back(-paths[p].leaf_value, Expr::Variable(deltas[p]));
  }
  AddRelation(model, f, Expr::Affine(std::move(selection), 0.0), Relation::kEq);

  // delta_p => every split on the path holds, as big-M rows:
  //   left:  x_f - t <= (u_f - t)(1 - delta_p)
  //   right: t - x_f <= (t - l_f)(1 - delta_p)
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const Expr delta = Expr::Variable(deltas[p]);
    for (const TreePath::Step& s : paths[p].steps) {
      const Interval& b = input_bounds[s.feature];
      const double t = s.threshold;
      if (s.goes_left) {
        AddRelation(model, f, Expr::Affine({{1.0, xs[s.feature]}, {b.hi - t, delta}}, -b.hi),
                    Relation::kLe);
      } else {
        AddRelation(model, f, Expr::Affine({{-1.0, xs[s.feature]}, {t - b.lo, delta}}, b.lo),
                    Relation::kLe);
      }
    }
  }

  f.outputs = {y};
  f.path_indicators = deltas;
  std::unordered_map<std::size_t, std::size_t> path_of_leaf;
  for (std::size_t p = 0; p < paths.size(); ++p) path_of_leaf[paths[p].leaf_node] = p;
  f.witness = [tree, deltas, y, path_of_leaf](std::span<const double> x0, Assignment& out) {
    const std::size_t leaf = DescendTree(tree, x0);
    const std::size_t chosen = path_of_leaf.at(leaf);
    for (std::size_t p = 0; p < deltas.size(); ++p) out.Set(deltas[p], p == chosen ? 1.0 : 0.0);
    const double value = tree.nodes[leaf].value;
    out.Set(y, value);
    return std::vector<double>{value};
  };
  return {VectorOrExpr{y}, std::move(f)};
}

Result FormulateEnsemble(Model& model, const Predictor& ensemble, const VectorOrExpr& x,
                         std::span<const Interval> input_bounds) {
  const std::vector<DecisionTree>* trees = nullptr;
  Affine combiner;
  if (const auto* rf = std::get_if<RandomForest>(&ensemble.variant())) {
    trees = &rf->trees;
    combiner.A = Matrix(1, trees->size(), 1.0 / static_cast<double>(trees->size()));
    combiner.b = {0.0};
  } else if (const auto* gbt = std::get_if<GradientBoostedTrees>(&ensemble.variant())) {
    trees = &gbt->trees;
    combiner.A = Matrix(1, trees->size(), 1.0);
    combiner.b = {gbt->base_score};
  } else {
    Fail(ErrorCode::kDimensionError, std::string(KindName(ensemble)) + " is not a tree ensemble");
  }
  if (trees->empty()) Fail(ErrorCode::kDimensionError, "ensemble has no trees");

  Formulation f = NewFormulation(ensemble);
  VectorOrExpr tree_outputs;
  for (const DecisionTree& t : *trees) {
    auto [y, member] = FormulateTree(model, t, x, input_bounds);
    tree_outputs.push_back(y.front());
    Absorb(f, member);
    f.members.push_back(std::move(member));
  }
  auto [y, combine] = FormulateAffine(model, combiner, tree_outputs, /*reduced=*/false);
  Absorb(f, combine);
  f.members.push_back(std::move(combine));
  f.outputs = y;

  std::vector<Formulation::WitnessFn> steps;
  for (const Formulation& m : f.members) steps.push_back(m.witness);
  f.witness = [steps](std::span<const double> x0, Assignment& out) {
    std::vector<double> member_values;
    for (std::size_t m = 0; m + 1 < steps.size(); ++m) member_values.push_back(steps[m](x0, out)[0]);
    return steps.back()(member_values, out);
  };
  return {y, std::move(f)};
}

Result FormulatePipeline(Model& model, const Pipeline& pipeline, const VectorOrExpr& x,
                         const FormulationConfig& cfg, std::span<const Interval> input_bounds) {
  if (pipeline.layers.empty()) Fail(ErrorCode::kDimensionError, "pipeline has no layers");
  return FormulateLayers(model, pipeline, pipeline.layers, x, cfg, input_bounds);
}

}  // namespace mlembed
