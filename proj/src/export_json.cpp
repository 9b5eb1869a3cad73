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
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "json.hpp"
#include "mlembed/errors.hpp"
#include "mlembed/export.hpp"
#include "mlembed/graybox.hpp"
#include "mlembed/predictor_json.hpp"

namespace mlembed {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json Num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

const char* UnaryName(UnaryOp op) {
  switch (op) {
    case UnaryOp::kExp: return "exp";
    case UnaryOp::kTanh: return "tanh";
    case UnaryOp::kNeg: return "neg";
    case UnaryOp::kLog1pExp: return "log1pexp";
  }
  return "";
}

const char* BinaryName(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return "add";
    case BinaryOp::kSub: return "sub";
    case BinaryOp::kMul: return "mul";
    case BinaryOp::kDiv: return "div";
    case BinaryOp::kPow: return "pow";
    case BinaryOp::kMax: return "max";
  }
  return "";
}

// Expressions are stored as a node table in post order so that shared
// subtrees are written once.
class Writer {
 public:
  explicit Writer(const Model& model) : model_(model) {}

  json Run() {
    json vars = json::array();
    for (const VariableInfo& v : model_.variables()) {
      vars.push_back({{"lo", Num(v.bounds.lo)}, {"hi", Num(v.bounds.hi)}, {"binary", v.binary}});
    }
    json oracles = json::array();
    for (const OracleConstraint& oc : model_.oracles()) {
      oracles.push_back({{"handle", Handle(oc.oracle)},
                         {"inputs", Ids(oc.inputs)},
                         {"outputs", Ids(oc.outputs)}});
    }
    json cons = json::array();
    for (const Constraint& c : model_.constraints()) cons.push_back(ConstraintJson(c));

    json out;
    out["format_version"] = kFormatVersion;
    out["variables"] = std::move(vars);
    out["constraints"] = std::move(cons);
    out["oracles"] = std::move(oracles);
    out["nodes"] = std::move(nodes_);
    out["handles"] = std::move(handles_);
    return out;
  }

 private:
  static json Ids(const std::vector<VariableRef>& vs) {
    json a = json::array();
    for (VariableRef v : vs) a.push_back(v.id);
    return a;
  }

  static json Row(const std::vector<LinearTerm>& row) {
    json a = json::array();
    for (const LinearTerm& t : row) a.push_back(json::array({t.var.id, Num(t.coef)}));
    return a;
  }

  json ConstraintJson(const Constraint& c) {
    if (const auto* eq = std::get_if<LinearEq>(&c)) {
      return {{"kind", "linear_eq"}, {"row", Row(eq->row)}, {"rhs", Num(eq->rhs)}};
    }
    if (const auto* in = std::get_if<LinearIneq>(&c)) {
      return {{"kind", "linear_ineq"},
              {"row", Row(in->row)},
              {"rhs", Num(in->rhs)},
              {"sense", in->sense == Sense::kLessEqual ? "<=" : ">="}};
    }
    if (const auto* ne = std::get_if<NonlinearEq>(&c)) {
      return {{"kind", "nonlinear_eq"}, {"expr", Node(ne->expr)}};
    }
    if (const auto* ni = std::get_if<NonlinearIneq>(&c)) {
      return {{"kind", "nonlinear_ineq"}, {"expr", Node(ni->expr)}};
    }
    if (const auto* sos = std::get_if<Sos1>(&c)) {
      json w = json::array();
      for (double x : sos->weights) w.push_back(Num(x));
      return {{"kind", "sos1"}, {"vars", Ids(sos->vars)}, {"weights", std::move(w)}};
    }
    const auto& in = std::get<Integrality>(c);
    return {{"kind", "integrality"}, {"var", in.var.id}};
  }

  std::size_t Handle(const std::shared_ptr<const OracleHandle>& h) {
    auto it = handle_index_.find(h.get());
    if (it != handle_index_.end()) return it->second;
    json j = {{"n_in", h->n_in()}, {"n_out", h->n_out()}, {"has_hessian", h->has_hessian()}};
    if (h->predictor() != nullptr) {
      j["predictor"] = PredictorToJson(*h->predictor());
    } else {
      j["external"] = true;
    }
    handles_.push_back(std::move(j));
    return handle_index_[h.get()] = handles_.size() - 1;
  }

  std::size_t Node(const Expr& e) {
    auto it = node_index_.find(e.id());
    if (it != node_index_.end()) return it->second;
    json j;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, ConstantNode>) {
            j = {{"op", "const"}, {"value", Num(n.value)}};
          } else if constexpr (std::is_same_v<T, VarNode>) {
            j = {{"op", "var"}, {"id", n.ref.id}};
          } else if constexpr (std::is_same_v<T, AffineNode>) {
            json terms = json::array();
            for (const auto& [c, sub] : n.terms) terms.push_back(json::array({Num(c), Node(sub)}));
            j = {{"op", "affine"}, {"terms", std::move(terms)}, {"offset", Num(n.offset)}};
          } else if constexpr (std::is_same_v<T, UnaryNode>) {
            const std::size_t arg = Node(n.arg);
            j = {{"op", UnaryName(n.op)}, {"arg", arg}};
          } else if constexpr (std::is_same_v<T, BinaryNode>) {
            const std::size_t lhs = Node(n.lhs);
            const std::size_t rhs = Node(n.rhs);
            j = {{"op", BinaryName(n.op)}, {"lhs", lhs}, {"rhs", rhs}};
          } else {
            json inputs = json::array();
            for (const Expr& in : n.inputs) inputs.push_back(Node(in));
            const std::size_t h = Handle(n.oracle);
            j = {{"op", "oracle"}, {"handle", h}, {"inputs", std::move(inputs)}, {"index", n.index}};
          }
        },
        e.node().data);
    nodes_.push_back(std::move(j));
    return node_index_[e.id()] = nodes_.size() - 1;
  }

  const Model& model_;
  json nodes_ = json::array();
  json handles_ = json::array();
  std::unordered_map<const ExprNode*, std::size_t> node_index_;
  std::unordered_map<const OracleHandle*, std::size_t> handle_index_;
};

[[noreturn]] void Bad(const std::string& path, const std::string& what) {
  Fail(ErrorCode::kParseError, path + ": " + what);
}

const json& Field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) Bad(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) Bad(path, std::string("missing field \"") + key + "\"");
  return *it;
}

double ReadNum(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::nan("");
  }
  Bad(path, "expected a number");
}

std::size_t ReadIndex(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) Bad(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

const json& ReadArray(const json& j, const std::string& path) {
  if (!j.is_array()) Bad(path, "expected an array");
  return j;
}

class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  Model Run() {
    const json& version = Field(doc_, "format_version", "$");
    if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
      Bad("$.format_version", "unsupported version");
    }
    const json& vars = ReadArray(Field(doc_, "variables", "$"), "$.variables");
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const std::string path = "$.variables[" + std::to_string(i) + "]";
      const json& v = vars[i];
      const double lo = ReadNum(Field(v, "lo", path), path + ".lo");
      const double hi = ReadNum(Field(v, "hi", path), path + ".hi");
      const json& bin = Field(v, "binary", path);
      if (!bin.is_boolean()) Bad(path + ".binary", "expected a boolean");
      model_.AddVariable(Interval::Make(lo, hi), bin.get<bool>());
    }
    if (doc_.contains("handles")) {
      const json& hs = ReadArray(doc_["handles"], "$.handles");
      for (std::size_t i = 0; i < hs.size(); ++i) handles_.push_back(ReadHandle(hs[i], i));
    }
    if (doc_.contains("nodes")) {
      const json& ns = ReadArray(doc_["nodes"], "$.nodes");
      for (std::size_t i = 0; i < ns.size(); ++i) nodes_.push_back(ReadNode(ns[i], i));
    }
    const json& cons = ReadArray(Field(doc_, "constraints", "$"), "$.constraints");
    for (std::size_t i = 0; i < cons.size(); ++i) {
      model_.AddConstraint(ReadConstraint(cons[i], "$.constraints[" + std::to_string(i) + "]"));
    }
    if (doc_.contains("oracles")) {
      const json& os = ReadArray(doc_["oracles"], "$.oracles");
      for (std::size_t i = 0; i < os.size(); ++i) {
        const std::string path = "$.oracles[" + std::to_string(i) + "]";
        OracleConstraint oc;
        oc.oracle = HandleAt(Field(os[i], "handle", path), path + ".handle");
        oc.inputs = Vars(Field(os[i], "inputs", path), path + ".inputs");
        oc.outputs = Vars(Field(os[i], "outputs", path), path + ".outputs");
        model_.AddOracle(std::move(oc));
      }
    }
    return std::move(model_);
  }

 private:
  VariableRef Var(const json& j, const std::string& path) {
    const std::size_t id = ReadIndex(j, path);
    if (id >= model_.num_variables()) Bad(path, "unknown variable " + std::to_string(id));
    return model_.ref(id);
  }

  std::vector<VariableRef> Vars(const json& j, const std::string& path) {
    std::vector<VariableRef> out;
    ReadArray(j, path);
    for (std::size_t k = 0; k < j.size(); ++k) {
      out.push_back(Var(j[k], path + "[" + std::to_string(k) + "]"));
    }
    return out;
  }

  std::vector<LinearTerm> Row(const json& j, const std::string& path) {
    std::vector<LinearTerm> row;
    ReadArray(j, path);
    for (std::size_t k = 0; k < j.size(); ++k) {
      const std::string p = path + "[" + std::to_string(k) + "]";
      if (!j[k].is_array() || j[k].size() != 2) Bad(p, "expected [id, coef]");
      row.push_back({Var(j[k][0], p + "[0]"), ReadNum(j[k][1], p + "[1]")});
    }
    return row;
  }

  std::shared_ptr<const OracleHandle> ReadHandle(const json& j, std::size_t i) {
    const std::string path = "$.handles[" + std::to_string(i) + "]";
    const std::size_t n_in = ReadIndex(Field(j, "n_in", path), path + ".n_in");
    const std::size_t n_out = ReadIndex(Field(j, "n_out", path), path + ".n_out");
    const json& hh = Field(j, "has_hessian", path);
    if (!hh.is_boolean()) Bad(path + ".has_hessian", "expected a boolean");
    const bool has_hessian = hh.get<bool>();
    if (j.contains("predictor")) {
      FormulationConfig cfg;
      cfg.with_hessian = has_hessian;
      auto h = MakeOracle(PredictorFromJson(j["predictor"]), cfg, n_in);
      if (h->n_out() != n_out) Bad(path + ".n_out", "does not match the predictor");
      return h;
    }
    if (!j.contains("external") || j["external"] != true) {
      Bad(path, "needs either \"predictor\" or \"external\": true");
    }
    auto unavailable = [](const char* what) {
      return [what](auto&&...) -> std::vector<double> {
        Fail(ErrorCode::kOracleNotExportable,
             std::string("external oracle callbacks were not serialised (") + what + ")");
      };
    };
    OracleHandle::EvalFn eval = unavailable("eval");
    OracleHandle::JacobianFn jac = [](std::span<const double>) -> Matrix {
      Fail(ErrorCode::kOracleNotExportable, "external oracle callbacks were not serialised");
    };
    std::optional<OracleHandle::HessianFn> hess;
    if (has_hessian) {
      hess = [](std::span<const double>, std::span<const double>) -> Matrix {
        Fail(ErrorCode::kOracleNotExportable, "external oracle callbacks were not serialised");
      };
    }
    return std::make_shared<const OracleHandle>(n_in, n_out, eval, jac, hess);
  }

  std::shared_ptr<const OracleHandle> HandleAt(const json& j, const std::string& path) {
    const std::size_t k = ReadIndex(j, path);
    if (k >= handles_.size()) Bad(path, "unknown handle " + std::to_string(k));
    return handles_[k];
  }

  Expr NodeAt(const json& j, const std::string& path, std::size_t limit) {
    const std::size_t k = ReadIndex(j, path);
    if (k >= limit) Bad(path, "node reference must point to an earlier node");
    return nodes_[k];
  }

  Expr ReadNode(const json& j, std::size_t i) {
    const std::string path = "$.nodes[" + std::to_string(i) + "]";
    const json& opj = Field(j, "op", path);
    if (!opj.is_string()) Bad(path + ".op", "expected a string");
    const std::string op = opj.get<std::string>();
    if (op == "const") return Expr::Const(ReadNum(Field(j, "value", path), path + ".value"));
    if (op == "var") return Expr::Variable(Var(Field(j, "id", path), path + ".id"));
    if (op == "affine") {
      const json& terms = ReadArray(Field(j, "terms", path), path + ".terms");
      std::vector<std::pair<double, Expr>> out;
      for (std::size_t k = 0; k < terms.size(); ++k) {
        const std::string p = path + ".terms[" + std::to_string(k) + "]";
        if (!terms[k].is_array() || terms[k].size() != 2) Bad(p, "expected [coef, node]");
        out.emplace_back(ReadNum(terms[k][0], p + "[0]"), NodeAt(terms[k][1], p + "[1]", i));
      }
      return Expr::Affine(std::move(out), ReadNum(Field(j, "offset", path), path + ".offset"));
    }
    static const std::map<std::string, UnaryOp> kUnary = {
        {"exp", UnaryOp::kExp}, {"tanh", UnaryOp::kTanh},
        {"neg", UnaryOp::kNeg}, {"log1pexp", UnaryOp::kLog1pExp}};
    static const std::map<std::string, BinaryOp> kBinary = {
        {"add", BinaryOp::kAdd}, {"sub", BinaryOp::kSub}, {"mul", BinaryOp::kMul},
        {"div", BinaryOp::kDiv}, {"pow", BinaryOp::kPow}, {"max", BinaryOp::kMax}};
    if (auto u = kUnary.find(op); u != kUnary.end()) {
      Expr arg = NodeAt(Field(j, "arg", path), path + ".arg", i);
      return Expr(std::make_shared<const ExprNode>(ExprNode{UnaryNode{u->second, arg}}));
    }
    if (auto b = kBinary.find(op); b != kBinary.end()) {
      Expr lhs = NodeAt(Field(j, "lhs", path), path + ".lhs", i);
      Expr rhs = NodeAt(Field(j, "rhs", path), path + ".rhs", i);
      return Expr(std::make_shared<const ExprNode>(ExprNode{BinaryNode{b->second, lhs, rhs}}));
    }
    if (op == "oracle") {
      auto h = HandleAt(Field(j, "handle", path), path + ".handle");
      const json& ins = ReadArray(Field(j, "inputs", path), path + ".inputs");
      std::vector<Expr> inputs;
      for (std::size_t k = 0; k < ins.size(); ++k) {
        inputs.push_back(NodeAt(ins[k], path + ".inputs[" + std::to_string(k) + "]", i));
      }
      const std::size_t index = ReadIndex(Field(j, "index", path), path + ".index");
      return Expr::OracleOutput(std::move(h), std::move(inputs), index);
    }
    Bad(path + ".op", "unknown operator \"" + op + "\"");
  }

  Constraint ReadConstraint(const json& j, const std::string& path) {
    const json& kindj = Field(j, "kind", path);
    if (!kindj.is_string()) Bad(path + ".kind", "expected a string");
    const std::string kind = kindj.get<std::string>();
    if (kind == "linear_eq") {
      return LinearEq{Row(Field(j, "row", path), path + ".row"),
                      ReadNum(Field(j, "rhs", path), path + ".rhs")};
    }
    if (kind == "linear_ineq") {
      const json& s = Field(j, "sense", path);
      Sense sense;
      if (s == "<=") {
        sense = Sense::kLessEqual;
      } else if (s == ">=") {
        sense = Sense::kGreaterEqual;
      } else {
        Bad(path + ".sense", "expected \"<=\" or \">=\"");
      }
      return LinearIneq{Row(Field(j, "row", path), path + ".row"),
                        ReadNum(Field(j, "rhs", path), path + ".rhs"), sense};
    }
    if (kind == "nonlinear_eq") {
      return NonlinearEq{NodeAt(Field(j, "expr", path), path + ".expr", nodes_.size())};
    }
    if (kind == "nonlinear_ineq") {
      return NonlinearIneq{NodeAt(Field(j, "expr", path), path + ".expr", nodes_.size())};
    }
    if (kind == "sos1") {
      Sos1 sos;
      sos.vars = Vars(Field(j, "vars", path), path + ".vars");
      const json& w = ReadArray(Field(j, "weights", path), path + ".weights");
      for (std::size_t k = 0; k < w.size(); ++k) {
        sos.weights.push_back(ReadNum(w[k], path + ".weights[" + std::to_string(k) + "]"));
      }
      return sos;
    }
    if (kind == "integrality") return Integrality{Var(Field(j, "var", path), path + ".var")};
    Bad(path + ".kind", "unknown constraint kind \"" + kind + "\"");
  }

  const json& doc_;
  Model model_;
  std::vector<std::shared_ptr<const OracleHandle>> handles_;
  std::vector<Expr> nodes_;
};

}  // namespace

void WriteModelJson(const Model& model, std::ostream& out) {
  out << Writer(model).Run().dump(1) << '\n';
}

std::string ModelJsonString(const Model& model) {
  std::ostringstream s;
  WriteModelJson(model, s);
  return s.str();
}

Model ReadModelJson(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseError, std::string("malformed JSON: ") + e.what());
  }
  return Reader(doc).Run();
}

Model ReadModelJsonString(const std::string& text) {
  std::istringstream s(text);
  return ReadModelJson(s);
}

}  // namespace mlembed
