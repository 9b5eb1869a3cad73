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

#include <algorithm>
#include <sstream>
#include <string>

#include "doctest.h"
#include "mlembed/bounds.hpp"
#include "mlembed/errors.hpp"
#include "mlembed/export.hpp"
#include "mlembed/graybox.hpp"
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

std::string Name(VariableRef v) { return "x" + std::to_string(v.id); }

// Rows of the parsed file must carry the model's linear constraints term by
// term, and every variable bound must be stated exactly.
void CheckLpMatchesModel(const Model& m, const LpFile& lp) {
  std::size_t row = 0;
  for (std::size_t i = 0; i < m.constraints().size(); ++i) {
    const Constraint& c = m.constraints()[i];
    const std::vector<LinearTerm>* terms = nullptr;
    std::string sense;
    double rhs = 0.0;
    if (const auto* eq = std::get_if<LinearEq>(&c)) {
      terms = &eq->row;
      sense = "=";
      rhs = eq->rhs;
    } else if (const auto* in = std::get_if<LinearIneq>(&c)) {
      terms = &in->row;
      sense = in->sense == Sense::kLessEqual ? "<=" : ">=";
      rhs = in->rhs;
    } else {
      continue;
    }
    REQUIRE(row < lp.rows.size());
    const LpRow& r = lp.rows[row++];
    CHECK(r.name == "c" + std::to_string(i));
    CHECK(r.sense == sense);
    CHECK(r.rhs == rhs);
    if (terms->empty()) continue;
    REQUIRE(r.terms.size() == terms->size());
    for (std::size_t k = 0; k < terms->size(); ++k) {
      CHECK(r.terms[k].first == (*terms)[k].coef);
      CHECK(r.terms[k].second == Name((*terms)[k].var));
    }
  }
  CHECK(row == lp.rows.size());
  REQUIRE(lp.bounds.size() == m.num_variables());
  std::vector<std::string> binaries;
  for (std::size_t id = 0; id < m.num_variables(); ++id) {
    CHECK(lp.bounds[id].var == "x" + std::to_string(id));
    CHECK(lp.bounds[id].lo == m.variable(id).bounds.lo);
    CHECK(lp.bounds[id].hi == m.variable(id).bounds.hi);
    if (m.variable(id).binary) binaries.push_back("x" + std::to_string(id));
  }
  CHECK(lp.binaries == binaries);
}

Model BigMNetwork(std::uint64_t seed) {
  Rng rng(seed);
  const Pipeline net{{RandomAffine(rng, 16, 10), ReLU{}, RandomAffine(rng, 2, 16)}};
  FormulationConfig cfg;
  cfg.relu_variant = ReluVariant::kBigM;
  Model m;
  const std::vector<Interval> box(10, Interval{0, 1});
  const std::vector<VariableRef> xs = AddInputs(m, box);
  auto [y, f] = AddPredictor(m, net, Operands(xs), cfg);
  AttachBounds(m, f, box);
  return m;
}

// Every configuration a corpus entry admits, embedded into fresh models.
std::vector<std::pair<std::string, Model>> CorpusModels() {
  std::vector<std::pair<std::string, Model>> out;
  for (const CorpusEntry& e : Corpus(71, 6)) {
    std::vector<FormulationConfig> cfgs(1);
    cfgs.emplace_back().relu_variant = ReluVariant::kBigM;
    cfgs.emplace_back().relu_variant = ReluVariant::kSos1;
    cfgs.emplace_back().relu_variant = ReluVariant::kQuadratic;
    cfgs.emplace_back().reduced_space = true;
    cfgs.emplace_back().gray_box = true;
    FormulationConfig red_gray;
    red_gray.gray_box = true;
    red_gray.reduced_space = true;
    red_gray.with_hessian = false;
    cfgs.push_back(red_gray);
    for (std::size_t k = 0; k < cfgs.size(); ++k) {
      Model m;
      const std::vector<VariableRef> xs = AddInputs(m, e.box);
      try {
        auto [y, f] = AddPredictor(m, e.predictor, Operands(xs), cfgs[k]);
        // Reduced-space outputs only live in expressions; pin them to
        // variables so the model records them.
        for (const Operand& op : y) {
          if (std::holds_alternative<Expr>(op)) {
            const VariableRef v = m.AddVariable(Interval::Entire());
            m.AddConstraint(NonlinearEq{ToExpr(op) - Expr::Variable(v)});
          }
        }
      } catch (const Error& err) {
        // Trees have no reduced-space or gray-box form.
        CHECK((err.code() == ErrorCode::kUnsupportedReducedSpace ||
               err.code() == ErrorCode::kNonDifferentiablePredictor));
        continue;
      }
      out.emplace_back(e.name + "/" + std::to_string(k), std::move(m));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(FormatDouble(0.0) == "0");
  CHECK(FormatDouble(-0.0) == "0");
  CHECK(FormatDouble(1.0) == "1");
  CHECK(FormatDouble(-2.5) == "-2.5");
  CHECK(FormatDouble(0.1) == "0.10000000000000001");
  CHECK(FormatDouble(kInf) == "inf");
  CHECK(FormatDouble(-kInf) == "-inf");
  CHECK(FormatDouble(std::nan("")) == "nan");
  CHECK(std::stod(FormatDouble(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("LP export of one BigM neuron") {
  Model m;
  const VariableRef x = m.AddVariable(Interval{-1, 2});
  FormulationConfig cfg;
  cfg.relu_variant = ReluVariant::kBigM;
  auto [y, f] = AddPredictor(m, ReLU{}, Operands(std::vector<VariableRef>{x}), cfg);
  const std::string text = LpString(m);
  const LpFile lp = ParseLp(text);
  CHECK(lp.rows.size() == 3);
  CHECK(lp.binaries.size() == 1);
  CHECK(lp.binaries[0] == Name(f.indicators.at(0)));
  CHECK(text.find("Binaries\n") != std::string::npos);
  CHECK(text.rfind("End\n") == text.size() - 4);
  CHECK(text.rfind("\\ mlembed LP export\nMinimize\n obj: 0 x0\nSubject To\n", 0) == 0);
  CheckLpMatchesModel(m, lp);
}

TEST_CASE("LP export is deterministic") {
  const Model a = BigMNetwork(5);
  const Model b = BigMNetwork(5);
  const std::string ta = LpString(a);
  CHECK(ta == LpString(b));
  CHECK(ta == LpString(a));
  std::ostringstream s;
  WriteLp(a, s);
  CHECK(s.str() == ta);
  const LpFile lp = ParseLp(ta);
  CHECK(lp.binaries.size() == 16);
  CheckLpMatchesModel(a, lp);
}

TEST_CASE("LP bound forms and SOS entries") {
  Model m;
  m.AddVariable(Interval::Entire());
  const VariableRef a = m.AddVariable(Interval{0, kInf});
  const VariableRef b = m.AddVariable(Interval{-kInf, 3});
  m.AddVariable(Interval{2.5, 2.5});
  m.AddVariable(Interval{0, 1}, true);
  m.AddConstraint(Sos1{{a, b}, {1, 2}});
  m.AddConstraint(LinearIneq{{{a, 1.0}, {b, -1.0}}, 4.0, Sense::kGreaterEqual});
  const std::string text = LpString(m);
  CHECK(text.find(" x0 free\n") != std::string::npos);
  CHECK(text.find(" x1 >= 0\n") != std::string::npos);
  CHECK(text.find(" -inf <= x2 <= 3\n") != std::string::npos);
  CHECK(text.find(" x3 = 2.5\n") != std::string::npos);
  CHECK(text.find(" 0 <= x4 <= 1\n") != std::string::npos);
  CHECK(text.find("SOS\n s0: S1 :: x1:1 x2:2\n") != std::string::npos);
  const LpFile lp = ParseLp(text);
  REQUIRE(lp.sos.size() == 1);
  CHECK(lp.sos[0].name == "s0");
  CHECK(lp.sos[0].type == 1);
  CHECK(lp.sos[0].members == std::vector<std::pair<std::string, double>>{{"x1", 1}, {"x2", 2}});
  CheckLpMatchesModel(m, lp);
}

TEST_CASE("long LP rows wrap and still parse") {
  Model m;
  std::vector<LinearTerm> row;
  for (int i = 0; i < 300; ++i) {
    row.push_back({m.AddVariable(Interval{-1, 1}), 1.0 / (i + 3.0)});
  }
  m.AddConstraint(LinearEq{row, 0.25});
  const std::string text = LpString(m);
  std::istringstream lines(text);
  std::string line;
  std::size_t longest = 0;
  while (std::getline(lines, line)) longest = std::max(longest, line.size());
  CHECK(longest <= 200);
  CheckLpMatchesModel(m, ParseLp(text));
}

TEST_CASE("LP export refuses nonlinear rows and oracles") {
  Model m;
  const VariableRef x = m.AddVariable(Interval{-1, 1});
  m.AddConstraint(LinearEq{{{x, 1.0}}, 0.0});
  AddPredictor(m, Sigmoid{}, Operands(std::vector<VariableRef>{x}), {});
  try {
    LpString(m);
    FAIL("expected NonlinearNotExportable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonlinearNotExportable);
    CHECK(std::string(e.what()).find("indices 1") != std::string::npos);
  }

  Model g;
  const VariableRef gx = g.AddVariable(Interval{-1, 1});
  FormulationConfig cfg;
  cfg.gray_box = true;
  AddPredictor(g, Tanh{}, Operands(std::vector<VariableRef>{gx}), cfg);
  CHECK(CodeOf([&] { LpString(g); }) == ErrorCode::kOracleNotExportable);
}

TEST_CASE("the reference LP reader rejects malformed files") {
  CHECK_THROWS(ParseLp("Minimize\n obj: 0 x0\nSubject To\n c0: x0 < 1\nEnd\n"));
  CHECK_THROWS(ParseLp("Minimize\n obj: 0 x0\nSubject To\n c0: x0 <= 1\n"));
  CHECK_THROWS(ParseLp("Minimize\n obj: 0 x0\n c0: x0 <= 1\nEnd\n"));
  CHECK_THROWS(
      ParseLp("Minimize\n obj: 0 x0\nSubject To\n c0: x0 <= 1\n c0: x0 >= 0\nEnd\n"));
  CHECK_NOTHROW(ParseLp("Minimize\n obj: 0 x0\nSubject To\n c0: x0 <= 1\nEnd\n"));
}

TEST_CASE("model JSON round trip") {
  SUBCASE("empty model") {
    const Model m;
    const Model back = ReadModelJsonString(ModelJsonString(m));
    CHECK(StructurallyEqual(m, back));
    CHECK(back.num_variables() == 0);
    CHECK(ModelJsonString(back) == ModelJsonString(m));
  }
  SUBCASE("34-row network") {
    Rng rng(3);
    const Pipeline net{{RandomAffine(rng, 16, 10), ReLU{}, RandomAffine(rng, 2, 16)}};
    Model m;
    const std::vector<VariableRef> xs = AddInputs(m, std::vector<Interval>(10, {0, 1}));
    auto [y, f] = AddPredictor(m, net, Operands(xs), {});
    REQUIRE(m.num_constraints() == 34);
    const std::string text = ModelJsonString(m);
    const Model back = ReadModelJsonString(text);
    CHECK(StructurallyEqual(m, back));
    CHECK(ModelJsonString(back) == text);
    // The witness of the original formulation is feasible in the copy.
    const Assignment a = WitnessFor(xs, f, std::vector<double>(10, 0.3));
    CHECK(CheckFeasible(back, a, 1e-9).feasible());
  }
  SUBCASE("corpus in every configuration") {
    for (const auto& [name, m] : CorpusModels()) {
      CAPTURE(name);
      const std::string text = ModelJsonString(m);
      const Model back = ReadModelJsonString(text);
      CHECK(StructurallyEqual(m, back));
      CHECK(ModelJsonString(back) == text);
      std::istringstream in(text);
      CHECK(StructurallyEqual(m, ReadModelJson(in)));
    }
  }
}

TEST_CASE("oracles survive a JSON round trip") {
  Rng rng(9);
  const Pipeline net{{RandomAffine(rng, 4, 3), Tanh{}, RandomAffine(rng, 2, 4)}};
  Model m;
  const std::vector<VariableRef> xs = AddInputs(m, std::vector<Interval>(3, {-1, 1}));
  FormulationConfig cfg;
  cfg.gray_box = true;
  auto [y, f] = AddPredictor(m, net, Operands(xs), cfg);
  const Model back = ReadModelJsonString(ModelJsonString(m));
  REQUIRE(back.num_oracles() == 1);
  const OracleHandle& h = *back.oracles()[0].oracle;
  const std::vector<double> x{0.2, -0.4, 0.9};
  CHECK(h.Eval(x) == Predict(net, x));
  CHECK(h.has_hessian());
  CHECK(h.Jacobian(x) == m.oracles()[0].oracle->Jacobian(x));
  CHECK(CheckFeasible(back, WitnessFor(xs, f, x), 0.0).feasible());

  auto ext = std::make_shared<const OracleHandle>(
      1, 1, [](std::span<const double> v) { return std::vector<double>{2 * v[0]}; },
      [](std::span<const double>) { return Matrix::FromRows({{2}}); },
      [](std::span<const double>, std::span<const double>) { return Matrix(1, 1); });
  Model e;
  const VariableRef a = e.AddVariable(Interval{0, 1});
  const VariableRef b = e.AddVariable(Interval{0, 2});
  e.AddOracle({ext, {a}, {b}});
  const std::string text = ModelJsonString(e);
  CHECK(text.find("\"external\": true") != std::string::npos);
  const Model eback = ReadModelJsonString(text);
  CHECK(StructurallyEqual(e, eback));
  const OracleHandle& eh = *eback.oracles()[0].oracle;
  CHECK(eh.has_hessian());
  CHECK(CodeOf([&] { eh.Eval(std::vector<double>{0.5}); }) == ErrorCode::kOracleNotExportable);
  CHECK(ModelJsonString(eback) == text);
}

TEST_CASE("model JSON reader errors carry a path") {
  const auto code_and_message = [](const std::string& text) {
    try {
      ReadModelJsonString(text);
    } catch (const Error& e) {
      return std::make_pair(e.code(), std::string(e.what()));
    }
    return std::make_pair(ErrorCode::kInvalidBounds, std::string());
  };
  const std::string head =
      R"({"format_version": 1, "variables": [{"lo": 0, "hi": 1, "binary": false}], )";
  auto [c1, m1] = code_and_message(
      head + R"("constraints": [{"kind": "cubic"}], "oracles": [], "nodes": [], "handles": []})");
  CHECK(c1 == ErrorCode::kParseError);
  CHECK(m1.find("$.constraints[0]") != std::string::npos);

  auto [c2, m2] = code_and_message(R"({"format_version": 2})");
  CHECK(c2 == ErrorCode::kParseError);

  auto [c3, m3] = code_and_message("{\"format_version\": 1, \"variables\": [");
  CHECK(c3 == ErrorCode::kParseError);

  auto [c4, m4] = code_and_message(
      head + R"("constraints": [{"kind": "nonlinear_eq", "expr": 0}], "oracles": [], )" +
      R"("nodes": [{"op": "neg", "arg": 0}], "handles": []})");
  CHECK(c4 == ErrorCode::kParseError);
  CHECK(m4.find("$.nodes[0]") != std::string::npos);
}
