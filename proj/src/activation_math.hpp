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

// Scalar activation formulas shared by Predict, the expression evaluator and
// the AD engine. Templated on the number type so that the dual-number pass
// differentiates exactly what the forward pass evaluates.

#include <cmath>
#include <cstddef>
#include <span>

namespace mlembed::detail {

template <typename T>
T SigmoidOf(const T& x) {
  using std::exp;
  return T(1.0) / (T(1.0) + exp(-x));
}

template <typename T>
T TanhOf(const T& x) {
  using std::tanh;
  return tanh(x);
}

// log(1 + e^x) without overflow.
template <typename T>
T Log1pExpOf(const T& x) {
  using std::exp;
  using std::log1p;
  if (x > 0.0) return x + log1p(exp(-x));
  return log1p(exp(x));
}

template <typename T>
T SoftPlusOf(const T& x, double beta) {
  return Log1pExpOf(T(beta) * x) / T(beta);
}

template <typename T>
T ReluOf(const T& x) {
  return x > 0.0 ? x : T(0.0);
}

// Derivatives, written in terms of the pre-activation z (and for sigmoid and
// tanh through their value, which is cheaper and exact to the same order).
template <typename T>
T SigmoidGrad(const T& z) {
  const T s = SigmoidOf(z);
  return s * (T(1.0) - s);
}

template <typename T>
T TanhGrad(const T& z) {
  const T t = TanhOf(z);
  return T(1.0) - t * t;
}

template <typename T>
T SoftPlusGrad(const T& z, double beta) {
  return SigmoidOf(T(beta) * z);
}

// Zero at the kink.
template <typename T>
T ReluGrad(const T& z) {
  return z > 0.0 ? T(1.0) : T(0.0);
}

// e^{x - max} / sum, written to `out`.
template <typename T>
void SoftMaxOf(std::span<const T> x, std::span<T> out) {
  using std::exp;
  T top = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] > top) top = x[i];
  }
  T total(0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = exp(x[i] - top);
    total = total + out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = out[i] / total;
}

}  // namespace mlembed::detail
