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

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "mlembed/model.hpp"
#include "mlembed/predictor.hpp"

namespace mlembed {

// One input or output component: a model variable or an expression over
// model variables.
using Operand = std::variant<VariableRef, Expr>;
using VectorOrExpr = std::vector<Operand>;

VectorOrExpr Operands(std::span<const VariableRef> vars);
Expr ToExpr(const Operand& op);
double EvalOperand(const Operand& op, const Assignment& assignment);

// Record of what embedding one predictor added to a model.
//
// added_vars / added_cons / added_oracles list everything created by this
// node including its descendants. `children` holds the per-layer records of a
// pipeline (and is empty otherwise); `members` holds the per-tree records of
// an ensemble followed by the record of the averaging/summing affine map.
struct Formulation {
  using WitnessFn =
      std::function<std::vector<double>(std::span<const double>, Assignment&)>;

  std::shared_ptr<const Predictor> predictor;
  VectorOrExpr outputs;
  std::vector<VariableRef> added_vars;
  std::vector<ConstraintRef> added_cons;
  std::vector<OracleRef> added_oracles;
  std::vector<Formulation> children;
  std::vector<Formulation> members;

  // ReLU (quadratic and SOS1 variants): z_i = max(0, -x_i).
  std::vector<VariableRef> slacks;
  // ReLU BigM: the binary indicators.
  std::vector<VariableRef> indicators;
  // SoftMax: d = sum_i exp(x_i).
  std::optional<VariableRef> denominator;
  // Decision trees: one binary per root-to-leaf path.
  std::vector<VariableRef> path_indicators;

  // Writes a value for every added variable given the input values and
  // returns the output values. Pure; safe to call concurrently.
  WitnessFn witness;

  Assignment Witness(std::span<const double> x0) const;
  std::vector<double> WitnessInto(std::span<const double> x0, Assignment& out) const;
};

// Embeds y = F(x). Applies cfg.substitutions, then dispatches on the
// predictor kind, the formulation space and the ReLU variant. Gray-box
// configurations are forwarded to AddGrayBox.
//
// Input intervals for big-M constants are taken from variable bounds (and
// natural interval extension for expression inputs) and then propagated
// layer by layer inside pipelines.
std::pair<VectorOrExpr, Formulation> AddPredictor(Model& model, const Predictor& p,
                                                  const VectorOrExpr& x,
                                                  const FormulationConfig& cfg);

std::pair<VectorOrExpr, Formulation> FormulateAffine(Model& model, const Affine& affine,
                                                     const VectorOrExpr& x, bool reduced);

std::pair<VectorOrExpr, Formulation> FormulateRelu(Model& model, const VectorOrExpr& x,
                                                   ReluVariant variant,
                                                   std::span<const Interval> input_bounds,
                                                   bool reduced);

// Sigmoid, Tanh or SoftPlus.
std::pair<VectorOrExpr, Formulation> FormulateSmoothActivation(Model& model,
                                                               const Predictor& kind,
                                                               const VectorOrExpr& x,
                                                               bool reduced);

std::pair<VectorOrExpr, Formulation> FormulateSoftmax(Model& model, const VectorOrExpr& x,
                                                      bool reduced);

std::pair<VectorOrExpr, Formulation> FormulateTree(Model& model, const DecisionTree& tree,
                                                   const VectorOrExpr& x,
                                                   std::span<const Interval> input_bounds);

// RandomForest or GradientBoostedTrees.
std::pair<VectorOrExpr, Formulation> FormulateEnsemble(Model& model, const Predictor& ensemble,
                                                       const VectorOrExpr& x,
                                                       std::span<const Interval> input_bounds);

std::pair<VectorOrExpr, Formulation> FormulatePipeline(Model& model, const Pipeline& pipeline,
                                                       const VectorOrExpr& x,
                                                       const FormulationConfig& cfg,
                                                       std::span<const Interval> input_bounds);

}  // namespace mlembed
