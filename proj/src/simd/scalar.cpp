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

#include "mlembed/simd.hpp"

namespace mlembed::simd::scalar {

void MatVec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, const double* b, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = b != nullptr ? acc + b[i] : acc;
  }
}

void MatVecTransposed(const double* a, std::size_t rows, std::size_t cols,
                      const double* v, double* y) {
  for (std::size_t j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) acc += a[i * cols + j] * v[i];
    y[j] = acc;
  }
}

void IntervalMatVec(const double* a, std::size_t rows, std::size_t cols,
                    const double* lo, const double* hi, const double* b,
                    double* out_lo, double* out_hi) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    double acc_lo = 0.0;
    double acc_hi = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double c = row[j];
      if (c > 0.0) {
        acc_lo += c * lo[j];
        acc_hi += c * hi[j];
      } else if (c < 0.0) {
        acc_lo += c * hi[j];
        acc_hi += c * lo[j];
      }
    }
    const double shift = b != nullptr ? b[i] : 0.0;
    out_lo[i] = acc_lo + shift;
    out_hi[i] = acc_hi + shift;
  }
}

}  // namespace mlembed::simd::scalar
