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

// Dense kernels behind affine evaluation, reverse sweeps and interval
// propagation. Every kernel has a portable scalar reference; wider variants
// are chosen once at startup from the host CPU and may be overridden with
// the MLEMBED_SIMD environment variable ("scalar" or "avx2").
//
// Matrices are row-major, `rows x cols`, contiguous.

#include <cstddef>
#include <string_view>

namespace mlembed::simd {

enum class Backend { kScalar, kAvx2 };

std::string_view BackendName(Backend backend);
bool BackendSupported(Backend backend);
Backend ActiveBackend();
// Throws std::invalid_argument if the backend is not supported on this host.
void SetBackend(Backend backend);

// y = A x (+ b when b != nullptr)
using MatVecFn = void (*)(const double* a, std::size_t rows, std::size_t cols,
                          const double* x, const double* b, double* y);
// y = A^T v
using MatVecTransposedFn = void (*)(const double* a, std::size_t rows,
                                    std::size_t cols, const double* v,
                                    double* y);
// Interval image of A [lo, hi] + b. Zero coefficients contribute nothing,
// so infinite input endpoints never produce 0 * inf.
using IntervalMatVecFn = void (*)(const double* a, std::size_t rows,
                                  std::size_t cols, const double* lo,
                                  const double* hi, const double* b,
                                  double* out_lo, double* out_hi);

struct KernelTable {
  MatVecFn matvec;
  MatVecTransposedFn matvec_transposed;
  IntervalMatVecFn interval_matvec;
};

const KernelTable& Kernels();
const KernelTable& KernelsFor(Backend backend);

namespace scalar {
void MatVec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, const double* b, double* y);
void MatVecTransposed(const double* a, std::size_t rows, std::size_t cols,
                      const double* v, double* y);
void IntervalMatVec(const double* a, std::size_t rows, std::size_t cols,
                    const double* lo, const double* hi, const double* b,
                    double* out_lo, double* out_hi);
}  // namespace scalar

#if defined(MLEMBED_HAVE_AVX2)
namespace avx2 {
void MatVec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, const double* b, double* y);
void MatVecTransposed(const double* a, std::size_t rows, std::size_t cols,
                      const double* v, double* y);
void IntervalMatVec(const double* a, std::size_t rows, std::size_t cols,
                    const double* lo, const double* hi, const double* b,
                    double* out_lo, double* out_hi);
}  // namespace avx2
#endif

}  // namespace mlembed::simd
