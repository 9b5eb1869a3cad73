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

#include "mlembed/predictor_json.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "mlembed/errors.hpp"

namespace mlembed {

using nlohmann::json;

namespace {

[[noreturn]] void SchemaError(const std::string& path, const std::string& what) {
  Fail(ErrorCode::kParseError, path + ": " + what);
}

const json& Field(const json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) SchemaError(path, std::string("missing field \"") + key + "\"");
  return *it;
}

double Number(const json& j, const std::string& path) {
  if (!j.is_number()) SchemaError(path, "expected a number");
  return j.get<double>();
}

std::size_t Count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    SchemaError(path, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

std::vector<double> NumberArray(const json& j, const std::string& path) {
  if (!j.is_array()) SchemaError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(Number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Affine ParseAffine(const json& j, const std::string& path) {
  const json& rows = Field(j, path, "A");
  if (!rows.is_array()) SchemaError(path + ".A", "expected an array of rows");
  std::vector<std::vector<double>> a;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    a.push_back(NumberArray(rows[i], path + ".A[" + std::to_string(i) + "]"));
    if (a.back().size() != a.front().size()) {
      Fail(ErrorCode::kDimensionError, path + ".A: ragged matrix rows");
    }
  }
  Affine out{Matrix::FromRows(a), NumberArray(Field(j, path, "b"), path + ".b")};
  return out;
}

void ParseNode(const json& j, const std::string& path, DecisionTree& tree) {
  if (!j.is_object()) SchemaError(path, "expected a tree node object");
  if (j.contains("value")) {
    tree.nodes.push_back(TreeNode{.value = Number(j["value"], path + ".value")});
    return;
  }
  const std::size_t feature = Count(Field(j, path, "feature"), path + ".feature");
  const double threshold = Number(Field(j, path, "threshold"), path + ".threshold");
  const std::size_t self = tree.nodes.size();
  tree.nodes.push_back(TreeNode{.feature = static_cast<std::int32_t>(feature), .threshold = threshold});
  tree.nodes[self].left = static_cast<std::uint32_t>(tree.nodes.size());
  ParseNode(Field(j, path, "left"), path + ".left", tree);
  tree.nodes[self].right = static_cast<std::uint32_t>(tree.nodes.size());
  ParseNode(Field(j, path, "right"), path + ".right", tree);
}

DecisionTree ParseTree(const json& j, const std::string& path) {
  if (!j.is_object()) SchemaError(path, "expected a decision_tree object");
  if (j.contains("type") && j["type"] != "decision_tree") {
    SchemaError(path + ".type", "expected \"decision_tree\"");
  }
  DecisionTree tree;
  tree.n_inputs = Count(Field(j, path, "n_inputs"), path + ".n_inputs");
  ParseNode(Field(j, path, "root"), path + ".root", tree);
  return tree;
}

std::vector<DecisionTree> ParseTrees(const json& j, const std::string& path) {
  const json& trees = Field(j, path, "trees");
  if (!trees.is_array()) SchemaError(path + ".trees", "expected an array");
  std::vector<DecisionTree> out;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    out.push_back(ParseTree(trees[i], path + ".trees[" + std::to_string(i) + "]"));
  }
  return out;
}

std::optional<ReluVariant> ParseReluVariant(const json& j, const std::string& path) {
  if (!j.contains("variant")) return std::nullopt;
  const json& v = j["variant"];
  if (v == "nonsmooth") return ReluVariant::kNonSmooth;
  if (v == "bigm") return ReluVariant::kBigM;
  if (v == "sos1") return ReluVariant::kSos1;
  if (v == "quadratic") return ReluVariant::kQuadratic;
  SchemaError(path + ".variant", "unknown ReLU variant");
}

Predictor Parse(const json& j, const std::string& path) {
  if (!j.is_object()) SchemaError(path, "expected a predictor object");
  const json& type = Field(j, path, "type");
  if (!type.is_string()) SchemaError(path + ".type", "expected a string");
  const std::string kind = type.get<std::string>();
  if (kind == "affine") return ParseAffine(j, path);
  if (kind == "relu") return ReLU{ParseReluVariant(j, path)};
  if (kind == "sigmoid") return Sigmoid{};
  if (kind == "tanh") return Tanh{};
  if (kind == "softmax") return SoftMax{};
  if (kind == "softplus") {
    SoftPlus s;
    if (j.contains("beta")) s.beta = Number(j["beta"], path + ".beta");
    return s;
  }
  if (kind == "pipeline") {
    const json& layers = Field(j, path, "layers");
    if (!layers.is_array()) SchemaError(path + ".layers", "expected an array");
    Pipeline pl;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      pl.layers.push_back(Parse(layers[i], path + ".layers[" + std::to_string(i) + "]"));
    }
    return pl;
  }
  if (kind == "decision_tree") return ParseTree(j, path);
  if (kind == "random_forest") return RandomForest{ParseTrees(j, path)};
  if (kind == "gbt") {
    return GradientBoostedTrees{ParseTrees(j, path),
                                Number(Field(j, path, "base_score"), path + ".base_score")};
  }
  if (kind == "logistic_regression") return LogisticRegression{ParseAffine(j, path)};
  SchemaError(path + ".type", "unknown predictor type \"" + kind + "\"");
}

json NodeToJson(const DecisionTree& t, std::size_t i) {
  const TreeNode& n = t.nodes[i];
  if (n.is_leaf()) return {{"value", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", NodeToJson(t, n.left)},
          {"right", NodeToJson(t, n.right)}};
}

json TreeToJson(const DecisionTree& t) {
  return {{"type", "decision_tree"}, {"n_inputs", t.n_inputs}, {"root", NodeToJson(t, 0)}};
}

json AffineFields(const Affine& a, const char* type) {
  json rows = json::array();
  for (std::size_t i = 0; i < a.A.rows; ++i) {
    auto r = a.A.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"type", type}, {"A", rows}, {"b", a.b}};
}

const char* ReluVariantName(ReluVariant v) {
  switch (v) {
    case ReluVariant::kNonSmooth: return "nonsmooth";
    case ReluVariant::kBigM: return "bigm";
    case ReluVariant::kSos1: return "sos1";
    case ReluVariant::kQuadratic: return "quadratic";
  }
  return "nonsmooth";
}

}  // namespace

Predictor PredictorFromJson(const json& j) {
  Predictor p = Parse(j, "$");
  Validate(p);
  return p;
}

json PredictorToJson(const Predictor& p) {
  struct Visitor {
    json operator()(const Affine& a) const { return AffineFields(a, "affine"); }
    json operator()(const ReLU& r) const {
      json out = {{"type", "relu"}};
      if (r.variant) out["variant"] = ReluVariantName(*r.variant);
      return out;
    }
    json operator()(const Sigmoid&) const { return {{"type", "sigmoid"}}; }
    json operator()(const Tanh&) const { return {{"type", "tanh"}}; }
    json operator()(const SoftPlus& s) const { return {{"type", "softplus"}, {"beta", s.beta}}; }
    json operator()(const SoftMax&) const { return {{"type", "softmax"}}; }
    json operator()(const Pipeline& pl) const {
      json layers = json::array();
      for (const Predictor& l : pl.layers) layers.push_back(PredictorToJson(l));
      return {{"type", "pipeline"}, {"layers", layers}};
    }
    json operator()(const DecisionTree& t) const { return TreeToJson(t); }
    json operator()(const RandomForest& f) const {
      json trees = json::array();
      for (const DecisionTree& t : f.trees) trees.push_back(TreeToJson(t));
      return {{"type", "random_forest"}, {"trees", trees}};
    }
    json operator()(const GradientBoostedTrees& g) const {
      json trees = json::array();
      for (const DecisionTree& t : g.trees) trees.push_back(TreeToJson(t));
      return {{"type", "gbt"}, {"trees", trees}, {"base_score", g.base_score}};
    }
    json operator()(const LogisticRegression& lr) const {
      return AffineFields(lr.affine, "logistic_regression");
    }
  };
  return std::visit(Visitor{}, p.variant());
}

Predictor LoadPredictor(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    Fail(ErrorCode::kParseError, std::string("malformed JSON: ") + e.what());
  }
  return PredictorFromJson(j);
}

Predictor LoadPredictorString(std::string_view text) {
  std::istringstream in{std::string(text)};
  return LoadPredictor(in);
}

Predictor LoadPredictorFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kParseError, "cannot open predictor file " + path);
  return LoadPredictor(in);
}

}  // namespace mlembed
