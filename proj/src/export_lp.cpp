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
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mlembed/errors.hpp"
#include "mlembed/export.hpp"

namespace mlembed {

namespace {

constexpr std::size_t kMaxLine = 200;

std::string Name(VariableRef v) { return "x" + std::to_string(v.id); }

// Appends tokens to the current line, breaking before it grows past kMaxLine.
class LineWriter {
 public:
  explicit LineWriter(std::ostream& out) : out_(out) {}

  void Start(const std::string& head) { line_ = head; }
  void Token(const std::string& tok) {
    if (line_.size() + 1 + tok.size() > kMaxLine && !line_.empty()) {
      out_ << line_ << '\n';
      line_ = "   ";
    }
    line_ += ' ';
    line_ += tok;
  }
  void Finish() {
    out_ << line_ << '\n';
    line_.clear();
  }

 private:
  std::ostream& out_;
  std::string line_;
};

void WriteRow(LineWriter& w, const std::string& name, const std::vector<LinearTerm>& row,
              const char* sense, double rhs) {
  w.Start(" " + name + ":");
  if (row.empty()) {
    // LP rows need at least one variable.
    w.Token("0 x0");
  }
  for (const LinearTerm& t : row) {
    w.Token((t.coef < 0 ? "- " : "+ ") + FormatDouble(std::fabs(t.coef)) + " " + Name(t.var));
  }
  w.Token(sense);
  w.Token(FormatDouble(rhs));
  w.Finish();
}

std::string Bound(std::size_t id, const VariableInfo& info) {
  const std::string x = "x" + std::to_string(id);
  const Interval& b = info.bounds;
  const bool lo_inf = std::isinf(b.lo);
  const bool hi_inf = std::isinf(b.hi);
  if (lo_inf && hi_inf) return " " + x + " free";
  if (b.lo == b.hi) return " " + x + " = " + FormatDouble(b.lo);
  if (hi_inf) return " " + x + " >= " + FormatDouble(b.lo);
  if (lo_inf) return " -inf <= " + x + " <= " + FormatDouble(b.hi);
  return " " + FormatDouble(b.lo) + " <= " + x + " <= " + FormatDouble(b.hi);
}

}  // namespace

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void WriteLp(const Model& model, std::ostream& out) {
  std::vector<std::size_t> nonlinear;
  for (std::size_t i = 0; i < model.constraints().size(); ++i) {
    const Constraint& c = model.constraints()[i];
    if (std::holds_alternative<NonlinearEq>(c) || std::holds_alternative<NonlinearIneq>(c)) {
      nonlinear.push_back(i);
    }
  }
  if (!nonlinear.empty()) {
    std::string list;
    for (std::size_t i : nonlinear) list += (list.empty() ? "" : ", ") + std::to_string(i);
    Fail(ErrorCode::kNonlinearNotExportable, "nonlinear constraints at indices " + list);
  }
  if (model.num_oracles() > 0) {
    Fail(ErrorCode::kOracleNotExportable,
         std::to_string(model.num_oracles()) + " oracle constraint(s) cannot be written as LP");
  }
  if (model.num_variables() == 0 && model.num_constraints() > 0) {
    Fail(ErrorCode::kInvalidConstraint, "constraints without variables");
  }

  std::ostringstream buf;
  LineWriter w(buf);
  buf << "\\ mlembed LP export\nMinimize\n";
  buf << (model.num_variables() == 0 ? " obj:\n" : " obj: 0 x0\n");
  buf << "Subject To\n";
  for (std::size_t i = 0; i < model.constraints().size(); ++i) {
    const Constraint& c = model.constraints()[i];
    const std::string name = "c" + std::to_string(i);
    if (const auto* eq = std::get_if<LinearEq>(&c)) {
      WriteRow(w, name, eq->row, "=", eq->rhs);
    } else if (const auto* ineq = std::get_if<LinearIneq>(&c)) {
      WriteRow(w, name, ineq->row, ineq->sense == Sense::kLessEqual ? "<=" : ">=",
               ineq->rhs);
    }
  }
  buf << "Bounds\n";
  for (std::size_t id = 0; id < model.num_variables(); ++id) {
    buf << Bound(id, model.variable(id)) << '\n';
  }
  bool any_binary = false;
  for (std::size_t id = 0; id < model.num_variables(); ++id) {
    if (!model.variable(id).binary) continue;
    if (!any_binary) {
      buf << "Binaries\n";
      w.Start("");
      any_binary = true;
    }
    w.Token("x" + std::to_string(id));
  }
  if (any_binary) w.Finish();
  bool any_sos = false;
  for (std::size_t i = 0; i < model.constraints().size(); ++i) {
    const auto* sos = std::get_if<Sos1>(&model.constraints()[i]);
    if (sos == nullptr) continue;
    if (!any_sos) {
      buf << "SOS\n";
      any_sos = true;
    }
    w.Start(" s" + std::to_string(i) + ": S1 ::");
    for (std::size_t k = 0; k < sos->vars.size(); ++k) {
      w.Token(Name(sos->vars[k]) + ":" + FormatDouble(sos->weights[k]));
    }
    w.Finish();
  }
  buf << "End\n";
  out << buf.str();
}

std::string LpString(const Model& model) {
  std::ostringstream s;
  WriteLp(model, s);
  return s.str();
}

}  // namespace mlembed
