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

#include <immintrin.h>

#include "mlembed/simd.hpp"

namespace mlembed::simd::avx2 {

namespace {

inline double HorizontalSum(__m256d v) {
  const __m128d low = _mm256_castpd256_pd128(v);
  const __m128d high = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(low, high);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

}  // namespace

void MatVec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, const double* b, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(x + j), acc);
    }
    double sum = HorizontalSum(acc);
    for (; j < cols; ++j) sum += row[j] * x[j];
    y[i] = b != nullptr ? sum + b[i] : sum;
  }
}

// Row-wise axpy: y += v[i] * A[i, :], vectorised along the columns.
void MatVecTransposed(const double* a, std::size_t rows, std::size_t cols,
                      const double* v, double* y) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    const double scale = v[i];
    if (scale == 0.0) continue;
    const __m256d s = _mm256_set1_pd(scale);
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d acc = _mm256_loadu_pd(y + j);
      _mm256_storeu_pd(y + j, _mm256_fmadd_pd(_mm256_loadu_pd(row + j), s, acc));
    }
    for (; j < cols; ++j) y[j] += row[j] * scale;
  }
}

void IntervalMatVec(const double* a, std::size_t rows, std::size_t cols,
                    const double* lo, const double* hi, const double* b,
                    double* out_lo, double* out_hi) {
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    __m256d acc_lo = zero;
    __m256d acc_hi = zero;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d c = _mm256_loadu_pd(row + j);
      const __m256d l = _mm256_loadu_pd(lo + j);
      const __m256d h = _mm256_loadu_pd(hi + j);
      const __m256d positive = _mm256_cmp_pd(c, zero, _CMP_GT_OQ);
      const __m256d nonzero = _mm256_cmp_pd(c, zero, _CMP_NEQ_OQ);
      // For c > 0 the lower endpoint pairs with lo, for c < 0 with hi.
      const __m256d take_lo = _mm256_blendv_pd(h, l, positive);
      const __m256d take_hi = _mm256_blendv_pd(l, h, positive);
      acc_lo = _mm256_add_pd(acc_lo, _mm256_and_pd(_mm256_mul_pd(c, take_lo), nonzero));
      acc_hi = _mm256_add_pd(acc_hi, _mm256_and_pd(_mm256_mul_pd(c, take_hi), nonzero));
    }
    double sum_lo = HorizontalSum(acc_lo);
    double sum_hi = HorizontalSum(acc_hi);
    for (; j < cols; ++j) {
      const double c = row[j];
      if (c > 0.0) {
        sum_lo += c * lo[j];
        sum_hi += c * hi[j];
      } else if (c < 0.0) {
        sum_lo += c * hi[j];
        sum_hi += c * lo[j];
      }
    }
    const double shift = b != nullptr ? b[i] : 0.0;
    out_lo[i] = sum_lo + shift;
    out_hi[i] = sum_hi + shift;
  }
}

}  // namespace mlembed::simd::avx2
