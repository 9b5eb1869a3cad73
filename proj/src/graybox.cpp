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

#include "mlembed/graybox.hpp"

#include <string>

#include "activation_math.hpp"
#include "dual.hpp"
#include "mlembed/bounds.hpp"
#include "mlembed/errors.hpp"
#include "mlembed/simd.hpp"

namespace mlembed {

namespace {

using detail::Dual;

enum class LayerKind { kAffine, kReLU, kSigmoid, kTanh, kSoftPlus, kSoftMax };

struct Layer {
  LayerKind kind;
  std::shared_ptr<const Affine> affine;  // kAffine only
  double beta = 1.0;                     // kSoftPlus only
};

void Flatten(const Predictor& p, std::vector<Layer>& out) {
  struct Visitor {
    std::vector<Layer>& out;
    void operator()(const Affine& a) const {
      out.push_back({LayerKind::kAffine, std::make_shared<const Affine>(a)});
    }
    void operator()(const ReLU&) const { out.push_back({LayerKind::kReLU, nullptr}); }
    void operator()(const Sigmoid&) const { out.push_back({LayerKind::kSigmoid, nullptr}); }
    void operator()(const Tanh&) const { out.push_back({LayerKind::kTanh, nullptr}); }
    void operator()(const SoftPlus& s) const {
      out.push_back({LayerKind::kSoftPlus, nullptr, s.beta});
    }
    void operator()(const SoftMax&) const { out.push_back({LayerKind::kSoftMax, nullptr}); }
    void operator()(const Pipeline& pl) const {
      for (const Predictor& l : pl.layers) Flatten(l, out);
    }
    void operator()(const LogisticRegression& lr) const {
      (*this)(lr.affine);
      out.push_back({LayerKind::kSigmoid, nullptr});
    }
    void operator()(const DecisionTree&) const { Reject("decision_tree"); }
    void operator()(const RandomForest&) const { Reject("random_forest"); }
    void operator()(const GradientBoostedTrees&) const { Reject("gbt"); }
    [[noreturn]] void Reject(const char* kind) const {
      Fail(ErrorCode::kNonDifferentiablePredictor,
           std::string(kind) + " is discrete and has no gray-box formulation");
    }
  };
  std::visit(Visitor{out}, p.variant());
}

// Affine maps are linear in the tangent, so the dual version applies the
// same kernel to values and tangents separately.
void AffineForward(const Affine& a, std::span<const double> x, std::span<double> y) {
  simd::Kernels().matvec(a.A.data.data(), a.A.rows, a.A.cols, x.data(), a.b.data(), y.data());
}
void AffineForward(const Affine& a, std::span<const Dual> x, std::span<Dual> y) {
  std::vector<double> xv(x.size()), xd(x.size()), yv(y.size()), yd(y.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    xv[j] = x[j].v;
    xd[j] = x[j].d;
  }
  const auto& k = simd::Kernels();
  k.matvec(a.A.data.data(), a.A.rows, a.A.cols, xv.data(), a.b.data(), yv.data());
  k.matvec(a.A.data.data(), a.A.rows, a.A.cols, xd.data(), nullptr, yd.data());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = {yv[i], yd[i]};
}

void AffineBackward(const Affine& a, std::span<const double> g, std::span<double> out) {
  simd::Kernels().matvec_transposed(a.A.data.data(), a.A.rows, a.A.cols, g.data(), out.data());
}
void AffineBackward(const Affine& a, std::span<const Dual> g, std::span<Dual> out) {
  std::vector<double> gv(g.size()), gd(g.size()), ov(out.size()), od(out.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    gv[i] = g[i].v;
    gd[i] = g[i].d;
  }
  const auto& k = simd::Kernels();
  k.matvec_transposed(a.A.data.data(), a.A.rows, a.A.cols, gv.data(), ov.data());
  k.matvec_transposed(a.A.data.data(), a.A.rows, a.A.cols, gd.data(), od.data());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = {ov[j], od[j]};
}

template <typename T>
std::vector<T> LayerForward(const Layer& layer, const std::vector<T>& x) {
  std::vector<T> y;
  if (layer.kind == LayerKind::kAffine) {
    y.resize(layer.affine->A.rows);
    AffineForward(*layer.affine, std::span<const T>(x), std::span<T>(y));
    return y;
  }
  y.resize(x.size());
  if (layer.kind == LayerKind::kSoftMax) {
    detail::SoftMaxOf<T>(x, y);
    return y;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (layer.kind) {
      case LayerKind::kReLU: y[i] = detail::ReluOf(x[i]); break;
      case LayerKind::kSigmoid: y[i] = detail::SigmoidOf(x[i]); break;
      case LayerKind::kTanh: y[i] = detail::TanhOf(x[i]); break;
      case LayerKind::kSoftPlus: y[i] = detail::SoftPlusOf(x[i], layer.beta); break;
      default: break;
    }
  }
  return y;
}

// Pulls the adjoint `g` of the layer output back to its input `z`.
template <typename T>
std::vector<T> LayerBackward(const Layer& layer, const std::vector<T>& z, const std::vector<T>& g) {
  std::vector<T> out;
  if (layer.kind == LayerKind::kAffine) {
    out.resize(layer.affine->A.cols);
    AffineBackward(*layer.affine, std::span<const T>(g), std::span<T>(out));
    return out;
  }
  out.resize(z.size());
  if (layer.kind == LayerKind::kSoftMax) {
    std::vector<T> s(z.size());
    detail::SoftMaxOf<T>(z, s);
    T dot(0.0);
    for (std::size_t i = 0; i < z.size(); ++i) dot = dot + s[i] * g[i];
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = s[i] * (g[i] - dot);
    return out;
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    T d(0.0);
    switch (layer.kind) {
      case LayerKind::kReLU: d = detail::ReluGrad(z[i]); break;
      case LayerKind::kSigmoid: d = detail::SigmoidGrad(z[i]); break;
      case LayerKind::kTanh: d = detail::TanhGrad(z[i]); break;
      case LayerKind::kSoftPlus: d = detail::SoftPlusGrad(z[i], layer.beta); break;
      default: break;
    }
    out[i] = d * g[i];
  }
  return out;
}

}  // namespace

// Flattened differentiable predictor.
class Network {
 public:
  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {}

  template <typename T>
  std::vector<T> Forward(std::vector<T> x, std::vector<std::vector<T>>* inputs) const {
    for (const Layer& layer : layers_) {
      if (inputs != nullptr) inputs->push_back(x);
      x = LayerForward(layer, x);
    }
    return x;
  }

  template <typename T>
  std::vector<T> Backward(const std::vector<std::vector<T>>& inputs, std::vector<T> g) const {
    for (std::size_t l = layers_.size(); l-- > 0;) g = LayerBackward(layers_[l], inputs[l], g);
    return g;
  }

  // G(x) = lambda^T F(x): this network followed by a 1 x P affine map.
  Network Lagrangian(std::span<const double> lambda) const {
    Affine weights;
    weights.A = Matrix(1, lambda.size());
    std::copy(lambda.begin(), lambda.end(), weights.A.data.begin());
    weights.b = {0.0};
    std::vector<Layer> layers = layers_;
    layers.push_back({LayerKind::kAffine, std::make_shared<const Affine>(std::move(weights))});
    return Network(std::move(layers));
  }

  // Output width for an input of width n.
  std::size_t OutputWidth(std::size_t n) const {
    for (const Layer& l : layers_) {
      if (l.kind == LayerKind::kAffine) n = l.affine->A.rows;
    }
    return n;
  }

 private:
  std::vector<Layer> layers_;
};

OracleHandle::OracleHandle(std::size_t n_in, std::size_t n_out, EvalFn eval, JacobianFn jacobian,
                           std::optional<HessianFn> hessian)
    : n_in_(n_in),
      n_out_(n_out),
      eval_(std::move(eval)),
      jacobian_(std::move(jacobian)),
      hessian_(std::move(hessian)) {}

void OracleHandle::CheckInput(std::span<const double> x) const {
  if (x.size() != n_in_) {
    Fail(ErrorCode::kDimensionError, "oracle expects " + std::to_string(n_in_) +
                                         " inputs, got " + std::to_string(x.size()));
  }
}

const Network& OracleHandle::network() const {
  if (!network_) {
    Fail(ErrorCode::kNonDifferentiablePredictor, "external oracle has no recorded network");
  }
  return *network_;
}

std::vector<double> OracleHandle::Eval(std::span<const double> x) const {
  CheckInput(x);
  return eval_(x);
}

Matrix OracleHandle::Jacobian(std::span<const double> x) const {
  CheckInput(x);
  return jacobian_(x);
}

Matrix OracleHandle::HessianLagrangian(std::span<const double> x,
                                       std::span<const double> lambda) const {
  CheckInput(x);
  if (lambda.size() != n_out_) {
    Fail(ErrorCode::kDimensionError, "lambda has length " + std::to_string(lambda.size()) +
                                         ", expected " + std::to_string(n_out_));
  }
  if (!hessian_) Fail(ErrorCode::kHessianUnavailable, "oracle was built without Hessian support");
  return (*hessian_)(x, lambda);
}

Tape OracleHandle::Record(std::span<const double> x) const {
  CheckInput(x);
  Tape tape;
  tape.output = network().Forward(std::vector<double>(x.begin(), x.end()), &tape.layer_inputs);
  return tape;
}

std::vector<double> OracleHandle::Replay(const Tape& tape) const {
  if (tape.layer_inputs.empty()) return tape.output;
  return network().Forward<double>(tape.layer_inputs.front(), nullptr);
}

namespace {

Matrix RawHessian(const Network& net, std::span<const double> x, std::span<const double> lambda) {
  const Network g = net.Lagrangian(lambda);
  const std::size_t n = x.size();
  Matrix h(n, n);
  // Column j is the Hessian-vector product with e_j.
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Dual> xd(n);
    for (std::size_t k = 0; k < n; ++k) xd[k] = {x[k], k == j ? 1.0 : 0.0};
    std::vector<std::vector<Dual>> inputs;
    g.Forward(std::move(xd), &inputs);
    const std::vector<Dual> grad = g.Backward(inputs, std::vector<Dual>{Dual(1.0)});
    for (std::size_t i = 0; i < n; ++i) h(i, j) = grad[i].d;
  }
  return h;
}

}  // namespace

Matrix OracleHandle::HessianLagrangianRaw(std::span<const double> x,
                                          std::span<const double> lambda) const {
  CheckInput(x);
  if (lambda.size() != n_out_) {
    Fail(ErrorCode::kDimensionError, "lambda has length " + std::to_string(lambda.size()) +
                                         ", expected " + std::to_string(n_out_));
  }
  return RawHessian(network(), x, lambda);
}

std::shared_ptr<const OracleHandle> MakeOracle(const Predictor& p, const FormulationConfig& cfg,
                                               std::optional<std::size_t> n_in) {
  std::vector<Layer> layers;
  Flatten(p, layers);
  Validate(p);
  const Dims d = GetDims(p);
  if (d.n_in && n_in && *d.n_in != *n_in) {
    Fail(ErrorCode::kDimensionError, "predictor expects " + std::to_string(*d.n_in) +
                                         " inputs, got " + std::to_string(*n_in));
  }
  const std::optional<std::size_t> width = d.n_in ? d.n_in : n_in;
  if (!width || *width == 0) {
    Fail(ErrorCode::kDimensionError, "oracle input width is undetermined");
  }

  auto network = std::make_shared<const Network>(std::move(layers));
  std::shared_ptr<OracleHandle> h(new OracleHandle());
  h->n_in_ = *width;
  h->n_out_ = network->OutputWidth(*width);
  h->predictor_ = p;
  h->network_ = network;
  h->eval_ = [pred = p](std::span<const double> x) { return Predict(pred, x); };
  h->jacobian_ = [network, n_out = h->n_out_](std::span<const double> x) {
    std::vector<std::vector<double>> inputs;
    network->Forward(std::vector<double>(x.begin(), x.end()), &inputs);
    Matrix jac(n_out, x.size());
    for (std::size_t i = 0; i < n_out; ++i) {
      std::vector<double> seed(n_out, 0.0);
      seed[i] = 1.0;
      const std::vector<double> row = network->Backward(inputs, std::move(seed));
      std::copy(row.begin(), row.end(), jac.data.begin() + static_cast<std::ptrdiff_t>(i * x.size()));
    }
    return jac;
  };
  if (cfg.with_hessian) {
    h->hessian_ = [network](std::span<const double> x, std::span<const double> lambda) {
      Matrix raw = RawHessian(*network, x, lambda);
      for (std::size_t i = 0; i < raw.rows; ++i) {
        for (std::size_t j = i + 1; j < raw.cols; ++j) {
          const double avg = 0.5 * (raw(i, j) + raw(j, i));
          raw(i, j) = avg;
          raw(j, i) = avg;
        }
      }
      return raw;
    };
  }
  return h;
}

std::pair<VectorOrExpr, Formulation> AddGrayBox(Model& model, const Predictor& p,
                                                const VectorOrExpr& x,
                                                const FormulationConfig& cfg) {
  cfg.Validate();
  auto oracle = MakeOracle(p, cfg, x.size());
  Formulation f;
  f.predictor = std::make_shared<const Predictor>(p);
  VectorOrExpr y;
  std::vector<VariableRef> outs;
  if (cfg.reduced_space) {
    std::vector<Expr> inputs;
    for (const Operand& op : x) inputs.push_back(ToExpr(op));
    for (std::size_t i = 0; i < oracle->n_out(); ++i) {
      y.push_back(Expr::OracleOutput(oracle, inputs, i));
    }
  } else {
    std::vector<VariableRef> inputs;
    for (const Operand& op : x) {
      const auto* v = std::get_if<VariableRef>(&op);
      if (v == nullptr) {
        Fail(ErrorCode::kInvalidConstraint,
             "full-space gray-box constraints need variable inputs, not expressions");
      }
      inputs.push_back(*v);
    }
    const std::vector<Interval> out_bounds = Propagate(p, InputIntervals(model, x));
    for (std::size_t i = 0; i < oracle->n_out(); ++i) {
      const VariableRef yi = model.AddVariable(Interval::Entire());
      model.TightenBounds(yi, out_bounds[i]);
      f.added_vars.push_back(yi);
      outs.push_back(yi);
      y.push_back(yi);
    }
    f.added_oracles.push_back(model.AddOracle({oracle, inputs, outs}));
  }
  f.outputs = y;
  f.witness = [oracle, outs](std::span<const double> x0, Assignment& out) {
    std::vector<double> v = oracle->Eval(x0);
    for (std::size_t i = 0; i < outs.size(); ++i) out.Set(outs[i], v[i]);
    return v;
  };
  return {y, std::move(f)};
}

}  // namespace mlembed
