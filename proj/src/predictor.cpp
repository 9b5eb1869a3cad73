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

#include "mlembed/predictor.hpp"

#include <cmath>
#include <string>

#include "activation_math.hpp"
#include "mlembed/errors.hpp"
#include "mlembed/simd.hpp"

namespace mlembed {

Matrix Matrix::FromRows(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.empty() ? 0 : rows.front().size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows) {
    if (r.size() != m.cols) Fail(ErrorCode::kDimensionError, "ragged matrix rows");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Pipeline::operator==(const Pipeline& other) const { return layers == other.layers; }

DecisionTree DecisionTree::Leaf(double value, std::size_t n_inputs) {
  DecisionTree t;
  t.n_inputs = n_inputs;
  t.nodes.push_back(TreeNode{.value = value});
  return t;
}

DecisionTree DecisionTree::Split(std::size_t feature, double threshold, const DecisionTree& left,
                                 const DecisionTree& right) {
  DecisionTree t;
  t.n_inputs = std::max({left.n_inputs, right.n_inputs, feature + 1});
  const auto left_base = static_cast<std::uint32_t>(1);
  const auto right_base = static_cast<std::uint32_t>(1 + left.nodes.size());
  t.nodes.push_back(TreeNode{.feature = static_cast<std::int32_t>(feature),
                             .threshold = threshold,
                             .left = left_base,
                             .right = right_base});
  auto append = [&](const DecisionTree& sub, std::uint32_t base) {
    for (TreeNode n : sub.nodes) {
      if (!n.is_leaf()) {
        n.left += base;
        n.right += base;
      }
      t.nodes.push_back(n);
    }
  };
  append(left, left_base);
  append(right, right_base);
  return t;
}

std::string_view KindName(const Predictor& p) {
  struct Visitor {
    std::string_view operator()(const Affine&) const { return "affine"; }
    std::string_view operator()(const ReLU&) const { return "relu"; }
    std::string_view operator()(const Sigmoid&) const { return "sigmoid"; }
    std::string_view operator()(const Tanh&) const { return "tanh"; }
    std::string_view operator()(const SoftPlus&) const { return "softplus"; }
    std::string_view operator()(const SoftMax&) const { return "softmax"; }
    std::string_view operator()(const Pipeline&) const { return "pipeline"; }
    std::string_view operator()(const DecisionTree&) const { return "decision_tree"; }
    std::string_view operator()(const RandomForest&) const { return "random_forest"; }
    std::string_view operator()(const GradientBoostedTrees&) const { return "gbt"; }
    std::string_view operator()(const LogisticRegression&) const { return "logistic_regression"; }
  };
  return std::visit(Visitor{}, p.variant());
}

bool IsElementwise(const Predictor& p) {
  return p.Is<ReLU>() || p.Is<Sigmoid>() || p.Is<Tanh>() || p.Is<SoftPlus>();
}

std::optional<ActivationKind> ActivationKindOf(const Predictor& p) {
  if (p.Is<ReLU>()) return ActivationKind::kReLU;
  if (p.Is<Sigmoid>()) return ActivationKind::kSigmoid;
  if (p.Is<Tanh>()) return ActivationKind::kTanh;
  if (p.Is<SoftPlus>()) return ActivationKind::kSoftPlus;
  if (p.Is<SoftMax>()) return ActivationKind::kSoftMax;
  return std::nullopt;
}

void FormulationConfig::Validate() const {
  if (gray_box && relu_variant != ReluVariant::kNonSmooth) {
    Fail(ErrorCode::kInvalidConfig, "gray-box formulation requires the nonsmooth ReLU variant");
  }
}

namespace {

void ValidateAffine(const Affine& a) {
  if (a.A.rows == 0 || a.A.cols == 0) Fail(ErrorCode::kDimensionError, "affine matrix is empty");
  if (a.A.data.size() != a.A.rows * a.A.cols) {
    Fail(ErrorCode::kDimensionError, "affine matrix storage does not match its shape");
  }
  if (a.A.rows != a.b.size()) {
    Fail(ErrorCode::kDimensionError, "affine matrix has " + std::to_string(a.A.rows) +
                                         " rows but bias has length " + std::to_string(a.b.size()));
  }
}

void ValidateTree(const DecisionTree& t) {
  if (t.nodes.empty()) Fail(ErrorCode::kDimensionError, "decision tree has no nodes");
  std::vector<bool> referenced(t.nodes.size(), false);
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const TreeNode& n = t.nodes[i];
    if (n.is_leaf()) {
      if (std::isnan(n.value)) Fail(ErrorCode::kDimensionError, "leaf value is NaN");
      continue;
    }
    if (static_cast<std::size_t>(n.feature) >= t.n_inputs) {
      Fail(ErrorCode::kDimensionError, "tree feature " + std::to_string(n.feature) +
                                           " out of range for " + std::to_string(t.n_inputs) +
                                           " inputs");
    }
    if (std::isnan(n.threshold)) Fail(ErrorCode::kDimensionError, "tree threshold is NaN");
    for (std::uint32_t child : {n.left, n.right}) {
      if (child <= i || child >= t.nodes.size() || referenced[child]) {
        Fail(ErrorCode::kDimensionError, "tree node " + std::to_string(i) + " has invalid child");
      }
      referenced[child] = true;
    }
  }
  for (std::size_t i = 1; i < t.nodes.size(); ++i) {
    if (!referenced[i]) Fail(ErrorCode::kDimensionError, "tree node " + std::to_string(i) + " unreachable");
  }
}

void ValidateEnsemble(const std::vector<DecisionTree>& trees) {
  if (trees.empty()) Fail(ErrorCode::kDimensionError, "ensemble has no trees");
  for (const DecisionTree& t : trees) {
    ValidateTree(t);
    if (t.n_inputs != trees.front().n_inputs) {
      Fail(ErrorCode::kDimensionError, "ensemble trees disagree on n_inputs");
    }
  }
}

}  // namespace

void Validate(const Predictor& p) {
  if (const auto* a = std::get_if<Affine>(&p.variant())) {
    ValidateAffine(*a);
  } else if (const auto* s = std::get_if<SoftPlus>(&p.variant())) {
    if (!(s->beta > 0.0) || !std::isfinite(s->beta)) {
      Fail(ErrorCode::kDimensionError, "softplus beta must be finite and positive");
    }
  } else if (const auto* pl = std::get_if<Pipeline>(&p.variant())) {
    if (pl->layers.empty()) Fail(ErrorCode::kDimensionError, "pipeline has no layers");
    for (const Predictor& layer : pl->layers) Validate(layer);
    GetDims(p);
  } else if (const auto* t = std::get_if<DecisionTree>(&p.variant())) {
    ValidateTree(*t);
  } else if (const auto* f = std::get_if<RandomForest>(&p.variant())) {
    ValidateEnsemble(f->trees);
  } else if (const auto* g = std::get_if<GradientBoostedTrees>(&p.variant())) {
    ValidateEnsemble(g->trees);
  } else if (const auto* lr = std::get_if<LogisticRegression>(&p.variant())) {
    ValidateAffine(lr->affine);
  }
}

Dims GetDims(const Predictor& p) {
  if (const auto* a = std::get_if<Affine>(&p.variant())) return {a->A.cols, a->A.rows};
  if (const auto* lr = std::get_if<LogisticRegression>(&p.variant())) {
    return {lr->affine.A.cols, lr->affine.A.rows};
  }
  if (const auto* t = std::get_if<DecisionTree>(&p.variant())) return {t->n_inputs, 1};
  if (const auto* f = std::get_if<RandomForest>(&p.variant())) {
    if (f->trees.empty()) Fail(ErrorCode::kDimensionError, "ensemble has no trees");
    return {f->trees.front().n_inputs, 1};
  }
  if (const auto* g = std::get_if<GradientBoostedTrees>(&p.variant())) {
    if (g->trees.empty()) Fail(ErrorCode::kDimensionError, "ensemble has no trees");
    return {g->trees.front().n_inputs, 1};
  }
  if (const auto* pl = std::get_if<Pipeline>(&p.variant())) {
    // `current` is the width flowing between layers once any layer has
    // fixed it; element-wise layers and softmax pass it through.
    Dims out;
    std::optional<std::size_t> current;
    for (std::size_t l = 0; l < pl->layers.size(); ++l) {
      const Dims d = GetDims(pl->layers[l]);
      if (d.n_in) {
        if (current && *current != *d.n_in) {
          Fail(ErrorCode::kDimensionError,
               "pipeline layer " + std::to_string(l) + " expects " + std::to_string(*d.n_in) +
                   " inputs but receives " + std::to_string(*current));
        }
        if (!current) out.n_in = d.n_in;
      }
      if (d.n_out) current = d.n_out;
    }
    out.n_out = current;
    return out;
  }
  return {};
}

std::size_t DescendTree(const DecisionTree& tree, std::span<const double> x) {
  std::size_t i = 0;
  while (!tree.nodes[i].is_leaf()) {
    const TreeNode& n = tree.nodes[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return i;
}

std::vector<TreePath> EnumeratePaths(const DecisionTree& tree) {
  std::vector<TreePath> out;
  std::vector<TreePath::Step> prefix;
  auto walk = [&](auto&& self, std::size_t i) -> void {
    const TreeNode& n = tree.nodes[i];
    if (n.is_leaf()) {
      out.push_back({prefix, n.value, i});
      return;
    }
    const auto feature = static_cast<std::size_t>(n.feature);
    prefix.push_back({feature, n.threshold, true});
    self(self, n.left);
    prefix.back().goes_left = false;
    self(self, n.right);
    prefix.pop_back();
  };
  walk(walk, 0);
  return out;
}

namespace {

void CheckInputLength(const Predictor& p, std::size_t n) {
  if (n == 0) Fail(ErrorCode::kDimensionError, "predictor input must be non-empty");
  const Dims d = GetDims(p);
  if (d.n_in && *d.n_in != n) {
    Fail(ErrorCode::kDimensionError, std::string(KindName(p)) + " expects " +
                                         std::to_string(*d.n_in) + " inputs, got " +
                                         std::to_string(n));
  }
}

std::vector<double> ApplyAffine(const Affine& a, std::span<const double> x) {
  std::vector<double> y(a.A.rows);
  simd::Kernels().matvec(a.A.data.data(), a.A.rows, a.A.cols, x.data(), a.b.data(), y.data());
  return y;
}

template <typename F>
std::vector<double> Map(std::span<const double> x, F&& f) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

std::vector<double> PredictUnchecked(const Predictor& p, std::span<const double> x) {
  struct Visitor {
    std::span<const double> x;
    std::vector<double> operator()(const Affine& a) const { return ApplyAffine(a, x); }
    std::vector<double> operator()(const ReLU&) const {
      return Map(x, [](double v) { return detail::ReluOf(v); });
    }
    std::vector<double> operator()(const Sigmoid&) const {
      return Map(x, [](double v) { return detail::SigmoidOf(v); });
    }
    std::vector<double> operator()(const Tanh&) const {
      return Map(x, [](double v) { return detail::TanhOf(v); });
    }
    std::vector<double> operator()(const SoftPlus& s) const {
      return Map(x, [beta = s.beta](double v) { return detail::SoftPlusOf(v, beta); });
    }
    std::vector<double> operator()(const SoftMax&) const {
      std::vector<double> y(x.size());
      detail::SoftMaxOf<double>(x, y);
      return y;
    }
    std::vector<double> operator()(const Pipeline& pl) const {
      std::vector<double> cur(x.begin(), x.end());
      for (const Predictor& layer : pl.layers) cur = PredictUnchecked(layer, cur);
      return cur;
    }
    std::vector<double> operator()(const DecisionTree& t) const {
      return {t.nodes[DescendTree(t, x)].value};
    }
    std::vector<double> operator()(const RandomForest& f) const {
      double total = 0.0;
      for (const DecisionTree& t : f.trees) total += t.nodes[DescendTree(t, x)].value;
      return {total / static_cast<double>(f.trees.size())};
    }
    std::vector<double> operator()(const GradientBoostedTrees& g) const {
      double total = g.base_score;
      for (const DecisionTree& t : g.trees) total += t.nodes[DescendTree(t, x)].value;
      return {total};
    }
    std::vector<double> operator()(const LogisticRegression& lr) const {
      std::vector<double> z = ApplyAffine(lr.affine, x);
      return Map(z, [](double v) { return detail::SigmoidOf(v); });
    }
  };
  return std::visit(Visitor{x}, p.variant());
}

}  // namespace

std::vector<double> Predict(const Predictor& p, std::span<const double> x) {
  CheckInputLength(p, x.size());
  return PredictUnchecked(p, x);
}

Predictor ApplyConfig(const Predictor& p, const FormulationConfig& cfg) {
  if (cfg.substitutions.empty()) return p;
  if (auto kind = ActivationKindOf(p)) {
    if (auto it = cfg.substitutions.find(*kind); it != cfg.substitutions.end()) return it->second;
    return p;
  }
  if (const auto* pl = std::get_if<Pipeline>(&p.variant())) {
    Pipeline out;
    out.layers.reserve(pl->layers.size());
    for (const Predictor& layer : pl->layers) out.layers.push_back(ApplyConfig(layer, cfg));
    return out;
  }
  if (const auto* lr = std::get_if<LogisticRegression>(&p.variant())) {
    if (auto it = cfg.substitutions.find(ActivationKind::kSigmoid); it != cfg.substitutions.end()) {
      return Pipeline{{lr->affine, it->second}};
    }
  }
  return p;
}

}  // namespace mlembed
