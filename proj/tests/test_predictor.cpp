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
#include <random>

#include "doctest.h"
#include "mlembed/errors.hpp"
#include "mlembed/predictor.hpp"
#include "mlembed/predictor_json.hpp"
#include "test_support.hpp"

using namespace mlembed;
using namespace mlembed::testing;

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

std::string MessageOf(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("load_predictor examples") {
  CHECK(LoadPredictorString(R"({"type":"relu"})") == Predictor(ReLU{}));
  const Predictor p = LoadPredictorString(
      R"({"type":"pipeline","layers":[{"type":"affine","A":[[1.0,0.0],[0.0,1.0]],"b":[0.0,0.0]},{"type":"relu"}]})");
  CHECK(p == Predictor(Pipeline{{Affine{Matrix::Identity(2), {0.0, 0.0}}, ReLU{}}}));
  CHECK(CodeOf([] {
          LoadPredictorString(R"({"type":"affine","A":[[1,2,3],[4,5,6]],"b":[0,0,0]})");
        }) == ErrorCode::kDimensionError);
}

TEST_CASE("schema violations report a JSON path") {
  const std::string msg = MessageOf([] {
    LoadPredictorString(R"({"type":"pipeline","layers":[{"type":"affine","A":[[1,"x"]],"b":[0]}]})");
  });
  CHECK(msg.find("ParseError") == 0);
  CHECK(msg.find("$.layers[0].A[0][1]") != std::string::npos);
  CHECK(CodeOf([] { LoadPredictorString(R"({"type":"conv2d"})"); }) == ErrorCode::kParseError);
  CHECK(CodeOf([] { LoadPredictorString(R"({"type":"affine","A":[[1)"); }) ==
        ErrorCode::kParseError);
  CHECK(CodeOf([] { LoadPredictorString(R"({"type":"softplus","beta":-1})"); }) ==
        ErrorCode::kDimensionError);
  CHECK(CodeOf([] { LoadPredictorFile("/nonexistent/predictor.json"); }) ==
        ErrorCode::kParseError);
}

TEST_CASE("predictor JSON round-trips every corpus entry") {
  for (const CorpusEntry& e : Corpus(11, 20)) {
    CAPTURE(e.name);
    const nlohmann::json j = PredictorToJson(e.predictor);
    CHECK(PredictorFromJson(j) == e.predictor);
    CHECK(LoadPredictorString(j.dump()) == e.predictor);
  }
}

TEST_CASE("tree JSON uses nested nodes") {
  const Predictor p = LoadPredictorString(R"({"type":"decision_tree","n_inputs":2,
      "root":{"feature":0,"threshold":0.5,"left":{"value":-2},
              "right":{"feature":1,"threshold":0.3,"left":{"value":3},"right":{"value":4}}}})");
  CHECK(p == Predictor(TruthTree()));
  CHECK(CodeOf([] {
          LoadPredictorString(
              R"({"type":"decision_tree","n_inputs":1,"root":{"feature":1,"threshold":0,"left":{"value":0},"right":{"value":1}}})");
        }) == ErrorCode::kDimensionError);
  CHECK(CodeOf([] { LoadPredictorString(R"({"type":"random_forest","trees":[]})"); }) ==
        ErrorCode::kDimensionError);
}

TEST_CASE("dims examples") {
  Affine a{Matrix(2, 3), {0, 0}};
  CHECK(GetDims(a) == Dims{3, 2});
  CHECK(GetDims(ReLU{}) == Dims{std::nullopt, std::nullopt});
  Pipeline net{{Affine{Matrix(16, 10), std::vector<double>(16)}, ReLU{},
                Affine{Matrix(2, 16), std::vector<double>(2)}}};
  CHECK(GetDims(net) == Dims{10, 2});
  CHECK(GetDims(Pipeline{{ReLU{}, Tanh{}}}) == Dims{std::nullopt, std::nullopt});
  CHECK(GetDims(TruthTree()) == Dims{2, 1});
  Pipeline bad{{Affine{Matrix(3, 2), std::vector<double>(3)}, Affine{Matrix(1, 2), {0}}}};
  CHECK(CodeOf([&] { Validate(bad); }) == ErrorCode::kDimensionError);
  CHECK(CodeOf([&] { GetDims(bad); }) == ErrorCode::kDimensionError);
}

TEST_CASE("predict examples") {
  CHECK(Predict(Sigmoid{}, std::vector<double>{0.0}) == std::vector<double>{0.5});
  CHECK(Predict(SoftMax{}, std::vector<double>{0.0, 0.0}) == std::vector<double>{0.5, 0.5});
  CHECK(Predict(TruthTree(), std::vector<double>{0.4, 0.9}) == std::vector<double>{-2.0});
  CHECK(Predict(TruthTree(), std::vector<double>{0.6, 0.9}) == std::vector<double>{4.0});
  CHECK(Predict(TruthTree(), std::vector<double>{0.5, 0.9}) == std::vector<double>{-2.0});
  CHECK(Predict(TruthTree(), std::vector<double>{0.6, 0.3}) == std::vector<double>{3.0});
  const Affine a{Matrix::FromRows({{2, 0}, {0, 3}}), {1, -1}};
  CHECK(Predict(a, std::vector<double>{1, 1}) == std::vector<double>{3, 2});
  CHECK(Predict(ReLU{}, std::vector<double>{-1, 2}) == std::vector<double>{0, 2});
  CHECK(Predict(SoftPlus{2.0}, std::vector<double>{0.0})[0] ==
        doctest::Approx(std::log(2.0) / 2.0));
  CHECK(Predict(Tanh{}, std::vector<double>{0.0}) == std::vector<double>{0.0});
  CHECK(CodeOf([&] { Predict(a, std::vector<double>{1, 1, 1}); }) == ErrorCode::kDimensionError);
}

TEST_CASE("ensembles average or add their trees") {
  const RandomForest forest{{TruthTree(), TruthTree()}};
  CHECK(Predict(forest, std::vector<double>{0.4, 0.9}) == std::vector<double>{-2.0});
  const RandomForest mixed{{TruthTree(), DecisionTree::Leaf(1.0, 2)}};
  CHECK(Predict(mixed, std::vector<double>{0.6, 0.9}) == std::vector<double>{2.5});
  const GradientBoostedTrees gbt{{TruthTree()}, 10.0};
  CHECK(Predict(gbt, std::vector<double>{0.6, 0.9}) == std::vector<double>{14.0});
}

TEST_CASE("apply_config rewrites activations recursively") {
  FormulationConfig cfg;
  cfg.substitutions.emplace(ActivationKind::kReLU, ReLU{ReluVariant::kSos1});
  const Affine a{Matrix::Identity(2), {0, 0}};
  CHECK(ApplyConfig(Pipeline{{a, ReLU{}}}, cfg) ==
        Predictor(Pipeline{{a, ReLU{ReluVariant::kSos1}}}));
  CHECK(ApplyConfig(ReLU{}, FormulationConfig{}) == Predictor(ReLU{}));
  FormulationConfig to_tanh;
  to_tanh.substitutions.emplace(ActivationKind::kReLU, Tanh{});
  CHECK(ApplyConfig(Pipeline{{Pipeline{{ReLU{}}}}}, to_tanh) ==
        Predictor(Pipeline{{Pipeline{{Tanh{}}}}}));
}

TEST_CASE("composition law and logistic regression alias") {
  Rng rng(3);
  PipelineOptions opts;
  for (int trial = 0; trial < 50; ++trial) {
    const Pipeline p = RandomPipeline(rng, opts);
    const Pipeline q = RandomPipeline(rng, opts);
    const std::size_t n = p.layers.front().As<Affine>().A.cols;
    const std::vector<double> x = SampleBox(rng, RandomBox(rng, n));
    CHECK(Predict(Pipeline{{p}}, x) == Predict(p, x));
    const std::vector<double> mid = Predict(p, x);
    const std::size_t q_in = q.layers.front().As<Affine>().A.cols;
    if (q_in == mid.size()) {
      CHECK(Predict(Pipeline{{p, q}}, x) == Predict(q, mid));
    }
    const Affine a = RandomAffine(rng, 2, n);
    CHECK(Predict(LogisticRegression{a}, x) == Predict(Pipeline{{a, Sigmoid{}}}, x));
  }
}

TEST_CASE("softmax sums to one and matches the naive form") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 8;
    std::vector<double> x(n);
    for (double& v : x) v = Uniform(rng, -30, 30);
    const std::vector<double> y = Predict(SoftMax{}, x);
    double sum = 0.0;
    double naive_den = 0.0;
    for (double v : x) naive_den += std::exp(v);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(y[i] >= 0.0);
      CHECK(y[i] <= 1.0);
      CHECK(std::fabs(y[i] - std::exp(x[i]) / naive_den) <= 1e-12);
      sum += y[i];
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
  const std::vector<double> big = Predict(SoftMax{}, std::vector<double>{1000.0, 1000.0});
  CHECK(big == std::vector<double>{0.5, 0.5});
}

TEST_CASE("tree descent matches brute-force path enumeration") {
  Rng rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const DecisionTree tree = RandomTree(rng, 3, 1 + trial % 6);
    const std::vector<TreePath> paths = EnumeratePaths(tree);
    for (int s = 0; s < 50; ++s) {
      std::vector<double> x(3);
      for (double& v : x) v = Uniform(rng, -2, 2);
      if (s % 5 == 0 && !tree.nodes[0].is_leaf()) {
        x[static_cast<std::size_t>(tree.nodes[0].feature)] = tree.nodes[0].threshold;
      }
      int satisfied = 0;
      double value = 0.0;
      for (const TreePath& p : paths) {
        bool ok = true;
        for (const TreePath::Step& st : p.steps) {
          const bool left = x[st.feature] <= st.threshold;
          ok = ok && left == st.goes_left;
        }
        if (ok) {
          ++satisfied;
          value = p.leaf_value;
        }
      }
      CHECK(satisfied == 1);
      CHECK(Predict(tree, x) == std::vector<double>{value});
    }
  }
}
