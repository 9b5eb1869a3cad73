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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mlembed/formulate.hpp"
#include "mlembed/model.hpp"
#include "mlembed/predictor.hpp"

namespace mlembed {

// Recorded forward pass: the input of every primitive layer followed by the
// final output.
struct Tape {
  std::vector<std::vector<double>> layer_inputs;
  std::vector<double> output;
};

class Network;

// Value / Jacobian / Hessian-of-the-Lagrangian callbacks for a gray-box
// constraint. Immutable and safe to call from several threads; each call
// works on its own tape.
class OracleHandle {
 public:
  using EvalFn = std::function<std::vector<double>(std::span<const double>)>;
  using JacobianFn = std::function<Matrix(std::span<const double>)>;
  using HessianFn =
      std::function<Matrix(std::span<const double>, std::span<const double>)>;

  // External oracle built from user callbacks. It has no predictor, so it is
  // serialised as external and cannot be reconstructed from disk.
  OracleHandle(std::size_t n_in, std::size_t n_out, EvalFn eval, JacobianFn jacobian,
               std::optional<HessianFn> hessian);

  std::size_t n_in() const { return n_in_; }
  std::size_t n_out() const { return n_out_; }
  bool has_hessian() const { return hessian_.has_value(); }
  // nullptr for external oracles.
  const Predictor* predictor() const { return predictor_ ? &*predictor_ : nullptr; }

  std::vector<double> Eval(std::span<const double> x) const;
  // Dense n_out x n_in matrix, one reverse sweep per output row.
  Matrix Jacobian(std::span<const double> x) const;
  // sum_i lambda_i * Hessian(F_i)(x), symmetrised. Throws HessianUnavailable
  // when built without Hessian support.
  Matrix HessianLagrangian(std::span<const double> x,
                           std::span<const double> lambda) const;

  // Predictor-backed oracles only.
  Tape Record(std::span<const double> x) const;
  std::vector<double> Replay(const Tape& tape) const;
  // The Hessian columns before (H + H^T) / 2.
  Matrix HessianLagrangianRaw(std::span<const double> x,
                              std::span<const double> lambda) const;

 private:
  friend std::shared_ptr<const OracleHandle> MakeOracle(const Predictor&,
                                                        const FormulationConfig&,
                                                        std::optional<std::size_t>);
  OracleHandle() = default;

  void CheckInput(std::span<const double> x) const;
  const Network& network() const;

  std::size_t n_in_ = 0;
  std::size_t n_out_ = 0;
  EvalFn eval_;
  JacobianFn jacobian_;
  std::optional<HessianFn> hessian_;
  std::optional<Predictor> predictor_;
  std::shared_ptr<const Network> network_;
};

// Builds an oracle for a pipeline of affine maps and activations (nested
// pipelines and logistic regressions are flattened). Trees and ensembles
// raise NonDifferentiablePredictor. `n_in` fixes the input length when the
// predictor itself adapts to any length.
std::shared_ptr<const OracleHandle> MakeOracle(const Predictor& p,
                                               const FormulationConfig& cfg,
                                               std::optional<std::size_t> n_in = std::nullopt);

// Gray-box embedding. Full-space adds one output variable per component and a
// single OracleConstraint; reduced-space returns oracle expressions and adds
// nothing to the model.
std::pair<VectorOrExpr, Formulation> AddGrayBox(Model& model, const Predictor& p,
                                                const VectorOrExpr& x,
                                                const FormulationConfig& cfg);

}  // namespace mlembed
