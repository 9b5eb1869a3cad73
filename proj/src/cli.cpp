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

#include "mlembed/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "mlembed/bounds.hpp"
#include "mlembed/errors.hpp"
#include "mlembed/export.hpp"
#include "mlembed/formulate.hpp"
#include "mlembed/graybox.hpp"
#include "mlembed/predictor_json.hpp"

namespace mlembed {

namespace {

double ParseBound(const std::string& tok, const std::string& context) {
  if (tok == "inf" || tok == "+inf") return kInf;
  if (tok == "-inf") return -kInf;
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  Fail(ErrorCode::kParseError, context + ": cannot read \"" + tok + "\" as a number");
}

std::vector<double> ParseList(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(ParseBound(tok, flag));
  if (out.empty()) Fail(ErrorCode::kParseError, flag + " is empty");
  return out;
}

struct Common {
  std::string predictor;
  std::string inputs;
  std::string formulation = "full";
  std::string relu = "nonsmooth";
  bool no_hessian = false;
};

FormulationConfig MakeConfig(const Common& c) {
  static const std::map<std::string, ReluVariant> kRelu = {
      {"nonsmooth", ReluVariant::kNonSmooth},
      {"bigm", ReluVariant::kBigM},
      {"sos1", ReluVariant::kSos1},
      {"quadratic", ReluVariant::kQuadratic}};
  FormulationConfig cfg;
  cfg.relu_variant = kRelu.at(c.relu);
  cfg.reduced_space = c.formulation == "reduced";
  cfg.gray_box = c.formulation == "graybox";
  cfg.with_hessian = !c.no_hessian;
  return cfg;
}

struct Embedded {
  Predictor predictor;
  Model model;
  std::vector<VariableRef> inputs;
  VectorOrExpr outputs;
  Formulation formulation;
};

Embedded Embed(const Common& c) {
  Embedded e{LoadPredictorFile(c.predictor), Model(), {}, {}, {}};
  const std::vector<Interval> box = ParseInputBox(c.inputs);
  for (const Interval& b : box) e.inputs.push_back(e.model.AddVariable(b));
  auto [y, f] = AddPredictor(e.model, e.predictor, Operands(e.inputs), MakeConfig(c));
  AttachBounds(e.model, f, box);
  e.outputs = std::move(y);
  e.formulation = std::move(f);
  return e;
}

void AddCommon(CLI::App* cmd, Common& c, bool with_formulation) {
  cmd->add_option("--predictor", c.predictor, "Predictor JSON file")->required();
  cmd->add_option("--inputs", c.inputs, "Input count, lo:hi list, or bounds file")->required();
  if (with_formulation) {
    cmd->add_option("--formulation", c.formulation)
        ->check(CLI::IsMember({"full", "reduced", "graybox"}));
    cmd->add_option("--relu", c.relu)
        ->check(CLI::IsMember({"nonsmooth", "bigm", "sos1", "quadratic"}));
    cmd->add_flag("--no-hessian", c.no_hessian, "Register gray-box oracles without Hessians");
  }
}

int CmdEmbed(const Common& c, const std::string& out_path, std::string format,
             std::ostream& out) {
  Embedded e = Embed(c);
  if (!out_path.empty()) {
    if (format.empty()) {
      format = out_path.size() >= 3 && out_path.substr(out_path.size() - 3) == ".lp" ? "lp"
                                                                                      : "json";
    }
    std::ostringstream buf;
    if (format == "lp") {
      WriteLp(e.model, buf);
    } else {
      WriteModelJson(e.model, buf);
    }
    std::ofstream file(out_path, std::ios::binary);
    if (!file || !(file << buf.str())) {
      throw std::runtime_error("cannot write " + out_path);
    }
  }
  out << "vars=" << e.model.num_variables()
      << " cons=" << e.model.num_constraints() + e.model.num_oracles()
      << " outputs=" << e.outputs.size() << '\n';
  return 0;
}

int CmdCheck(const Common& c, std::size_t samples, double tol, std::uint64_t seed,
             std::ostream& out) {
  const Embedded e = Embed(c);
  std::vector<Interval> box;
  for (VariableRef v : e.inputs) {
    const Interval b = e.model.variable(v).bounds;
    if (!b.IsFinite()) {
      Fail(ErrorCode::kUnboundedInput, "sampling needs a finite input box");
    }
    box.push_back(b);
  }
  std::mt19937_64 rng(seed);
  double max_violation = 0.0;
  double max_error = 0.0;
  std::vector<double> x0(box.size());
  for (std::size_t s = 0; s < samples; ++s) {
    Assignment a(e.model.num_variables());
    for (std::size_t i = 0; i < box.size(); ++i) {
      x0[i] = box[i].lo == box[i].hi
                  ? box[i].lo
                  : std::uniform_real_distribution<double>(box[i].lo, box[i].hi)(rng);
      a.Set(e.inputs[i], x0[i]);
    }
    e.formulation.WitnessInto(x0, a);
    const FeasibilityReport report = CheckFeasible(e.model, a, tol);
    max_violation = std::max(max_violation, report.max_residual);
    const std::vector<double> expected = Predict(e.predictor, x0);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const double got = EvalOperand(e.outputs[i], a);
      const double err = std::fabs(got - expected[i]);
      max_error = std::isnan(err) ? kInf : std::max(max_error, err);
    }
  }
  out << "samples=" << samples << " max_violation=" << FormatDouble(max_violation)
      << " max_output_error=" << FormatDouble(max_error) << '\n';
  return max_violation <= tol && max_error <= tol ? 0 : 1;
}

int CmdBounds(const Common& c, std::ostream& out) {
  const Predictor p = LoadPredictorFile(c.predictor);
  const std::vector<Interval> box = ParseInputBox(c.inputs);
  for (const Interval& b : Propagate(p, box)) {
    out << '[' << FormatDouble(b.lo) << ", " << FormatDouble(b.hi) << "]\n";
  }
  return 0;
}

void PrintRow(std::ostream& out, std::span<const double> row) {
  for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << FormatDouble(row[j]);
  out << '\n';
}

void PrintMatrix(std::ostream& out, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) PrintRow(out, m.row(i));
}

}  // namespace

std::vector<Interval> ParseInputBox(const std::string& spec) {
  if (!spec.empty() && std::all_of(spec.begin(), spec.end(), [](unsigned char ch) {
        return std::isdigit(ch) != 0;
      })) {
    const std::size_t n = std::stoul(spec);
    if (n == 0) Fail(ErrorCode::kParseError, "--inputs: need at least one input");
    return std::vector<Interval>(n, Interval{0.0, 1.0});
  }
  std::vector<Interval> box;
  if (spec.find(':') != std::string::npos) {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        Fail(ErrorCode::kParseError, "--inputs: expected lo:hi, got \"" + item + "\"");
      }
      box.push_back(Interval::Make(ParseBound(item.substr(0, colon), "--inputs"),
                                   ParseBound(item.substr(colon + 1), "--inputs")));
    }
  } else {
    std::ifstream file(spec);
    if (!file) Fail(ErrorCode::kParseError, "--inputs: cannot open \"" + spec + "\"");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
      ++line_no;
      std::istringstream ls(line);
      std::string lo;
      std::string hi;
      if (!(ls >> lo)) continue;
      std::string extra;
      if (!(ls >> hi) || (ls >> extra)) {
        Fail(ErrorCode::kParseError,
             spec + ":" + std::to_string(line_no) + ": expected two numbers");
      }
      const std::string where = spec + ":" + std::to_string(line_no);
      box.push_back(Interval::Make(ParseBound(lo, where), ParseBound(hi, where)));
    }
  }
  if (box.empty()) Fail(ErrorCode::kParseError, "--inputs: no intervals given");
  return box;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Embed trained predictors into optimization models", "mlembed");
  app.require_subcommand(1);

  Common embed_opts;
  std::string out_path;
  std::string format;
  CLI::App* embed = app.add_subcommand("embed", "Build a model and write it out");
  AddCommon(embed, embed_opts, true);
  embed->add_option("--out", out_path, "Output file");
  embed->add_option("--format", format)->check(CLI::IsMember({"lp", "json"}));

  Common check_opts;
  std::size_t samples = 100;
  double tol = 1e-9;
  std::uint64_t seed = 0;
  CLI::App* check = app.add_subcommand("check", "Verify witnesses on sampled inputs");
  AddCommon(check, check_opts, true);
  check->add_option("--samples", samples)->check(CLI::PositiveNumber);
  check->add_option("--tol", tol)->check(CLI::NonNegativeNumber);
  check->add_option("--seed", seed);

  Common bounds_opts;
  CLI::App* bounds = app.add_subcommand("bounds", "Print propagated output intervals");
  AddCommon(bounds, bounds_opts, false);

  std::string oracle_predictor;
  std::string x_text;
  std::string lambda_text;
  bool do_eval = false;
  bool do_jac = false;
  bool do_hess = false;
  bool oracle_no_hessian = false;
  CLI::App* oracle = app.add_subcommand("oracle", "Evaluate gray-box callbacks");
  oracle->add_option("--predictor", oracle_predictor)->required();
  oracle->add_option("--x", x_text, "Comma-separated point")->required();
  auto* eval_flag = oracle->add_flag("--eval", do_eval);
  auto* jac_flag = oracle->add_flag("--jac", do_jac);
  auto* hess_flag = oracle->add_flag("--hess", do_hess);
  eval_flag->excludes(jac_flag)->excludes(hess_flag);
  jac_flag->excludes(hess_flag);
  oracle->add_option("--lambda", lambda_text, "Comma-separated multipliers");
  oracle->add_flag("--no-hessian", oracle_no_hessian);

  std::vector<std::string> argv_store{"mlembed"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (oracle->parsed()) {
      if (!do_eval && !do_jac && !do_hess) {
        throw CLI::ValidationError("oracle", "one of --eval, --jac, --hess is required");
      }
      if (do_hess && lambda_text.empty()) {
        throw CLI::ValidationError("--hess", "--lambda is required");
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (embed->parsed()) return CmdEmbed(embed_opts, out_path, format, out);
    if (check->parsed()) return CmdCheck(check_opts, samples, tol, seed, out);
    if (bounds->parsed()) return CmdBounds(bounds_opts, out);
    const Predictor p = LoadPredictorFile(oracle_predictor);
    const std::vector<double> x = ParseList(x_text, "--x");
    FormulationConfig cfg;
    cfg.with_hessian = !oracle_no_hessian;
    const auto h = MakeOracle(p, cfg, x.size());
    if (do_eval) {
      PrintRow(out, h->Eval(x));
    } else if (do_jac) {
      PrintMatrix(out, h->Jacobian(x));
    } else {
      PrintMatrix(out, h->HessianLagrangian(x, ParseList(lambda_text, "--lambda")));
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mlembed
