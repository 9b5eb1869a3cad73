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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace mlembed {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  static Matrix FromRows(const std::vector<std::vector<double>>& rows);
  static Matrix Identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  bool operator==(const Matrix&) const = default;
};

class Predictor;

struct Affine {
  Matrix A;
  std::vector<double> b;

  bool operator==(const Affine&) const = default;
};

enum class ReluVariant { kNonSmooth, kBigM, kSos1, kQuadratic };

// A tagged ReLU overrides FormulationConfig::relu_variant when formulated.
struct ReLU {
  std::optional<ReluVariant> variant;

  bool operator==(const ReLU&) const = default;
};
struct Sigmoid {
  bool operator==(const Sigmoid&) const = default;
};
struct Tanh {
  bool operator==(const Tanh&) const = default;
};
// (1/beta) * log(1 + exp(beta * x))
struct SoftPlus {
  double beta = 1.0;

  bool operator==(const SoftPlus&) const = default;
};
struct SoftMax {
  bool operator==(const SoftMax&) const = default;
};

struct Pipeline {
  std::vector<Predictor> layers;

  bool operator==(const Pipeline& other) const;
};

// Flattened node storage; nodes[0] is the root. A node is a leaf when
// feature < 0. Descent goes left when x[feature] <= threshold.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::size_t n_inputs = 0;
  std::vector<TreeNode> nodes;

  static DecisionTree Leaf(double value, std::size_t n_inputs);
  static DecisionTree Split(std::size_t feature, double threshold,
                            const DecisionTree& left, const DecisionTree& right);

  bool operator==(const DecisionTree&) const = default;
};

// Arithmetic mean of member trees.
struct RandomForest {
  std::vector<DecisionTree> trees;

  bool operator==(const RandomForest&) const = default;
};

// base_score plus the sum of member trees.
struct GradientBoostedTrees {
  std::vector<DecisionTree> trees;
  double base_score = 0.0;

  bool operator==(const GradientBoostedTrees&) const = default;
};

// Sigmoid composed with an affine map.
struct LogisticRegression {
  Affine affine;

  bool operator==(const LogisticRegression&) const = default;
};

class Predictor {
 public:
  using Variant = std::variant<Affine, ReLU, Sigmoid, Tanh, SoftPlus, SoftMax, Pipeline,
                               DecisionTree, RandomForest, GradientBoostedTrees,
                               LogisticRegression>;

  template <typename T>
    requires(!std::is_same_v<std::remove_cvref_t<T>, Predictor> &&
             std::is_constructible_v<Variant, T &&>)
  Predictor(T&& value) : value_(std::forward<T>(value)) {}  // NOLINT: implicit

  const Variant& variant() const { return value_; }
  template <typename T>
  bool Is() const { return std::holds_alternative<T>(value_); }
  template <typename T>
  const T& As() const { return std::get<T>(value_); }

  bool operator==(const Predictor&) const = default;

 private:
  Variant value_;
};

std::string_view KindName(const Predictor& p);
bool IsElementwise(const Predictor& p);

struct Dims {
  std::optional<std::size_t> n_in;   // nullopt: adapts to any length
  std::optional<std::size_t> n_out;

  bool operator==(const Dims&) const = default;
};

enum class ActivationKind { kReLU, kSigmoid, kTanh, kSoftPlus, kSoftMax };

std::optional<ActivationKind> ActivationKindOf(const Predictor& p);

struct FormulationConfig {
  ReluVariant relu_variant = ReluVariant::kNonSmooth;
  std::map<ActivationKind, Predictor> substitutions;
  bool reduced_space = false;
  bool gray_box = false;
  bool with_hessian = true;

  // Gray-box evaluates the true ReLU, so only the nonsmooth variant is
  // admissible with it. Throws InvalidConfig.
  void Validate() const;
};

// Structural validation: matrix/bias shapes, tree indices and features,
// non-empty ensembles and pipelines, positive SoftPlus beta.
// Throws DimensionError.
void Validate(const Predictor& p);

Dims GetDims(const Predictor& p);

// Reference forward evaluation. Scalar outputs are length-1 vectors.
std::vector<double> Predict(const Predictor& p, std::span<const double> x);

// Replaces every activation whose kind is a key of cfg.substitutions,
// recursing through nested pipelines.
Predictor ApplyConfig(const Predictor& p, const FormulationConfig& cfg);

// Leaf reached by descent, as an index into tree.nodes.
std::size_t DescendTree(const DecisionTree& tree, std::span<const double> x);

struct TreePath {
  struct Step {
    std::size_t feature;
    double threshold;
    bool goes_left;
  };
  std::vector<Step> steps;
  double leaf_value;
  std::size_t leaf_node;  // index into tree.nodes
};

// Root-to-leaf paths in depth-first, left-first order.
std::vector<TreePath> EnumeratePaths(const DecisionTree& tree);

}  // namespace mlembed
