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
#include <limits>
#include <vector>

#include "doctest.h"
#include "mlembed/simd.hpp"
#include "test_support.hpp"

using namespace mlembed;
using namespace mlembed::testing;

namespace {

// Straightforward reference, independent of both backends.
std::vector<double> NaiveMatVec(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                                const std::vector<double>& x, const std::vector<double>* b) {
  std::vector<double> y(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    long double acc = b ? (*b)[i] : 0.0L;
    for (std::size_t j = 0; j < cols; ++j) acc += static_cast<long double>(a[i * cols + j]) * x[j];
    y[i] = static_cast<double>(acc);
  }
  return y;
}

double Scale(const std::vector<double>& a, const std::vector<double>& x) {
  double s = 1.0;
  for (double v : a) s = std::max(s, std::fabs(v));
  double t = 1.0;
  for (double v : x) t = std::max(t, std::fabs(v));
  return s * t;
}

std::vector<simd::Backend> Backends() {
  std::vector<simd::Backend> out{simd::Backend::kScalar};
  if (simd::BackendSupported(simd::Backend::kAvx2)) out.push_back(simd::Backend::kAvx2);
  return out;
}

}  // namespace

TEST_CASE("backend selection") {
  CHECK(simd::BackendSupported(simd::Backend::kScalar));
  CHECK(simd::BackendName(simd::Backend::kScalar) == "scalar");
  const simd::Backend saved = simd::ActiveBackend();
  simd::SetBackend(simd::Backend::kScalar);
  CHECK(simd::ActiveBackend() == simd::Backend::kScalar);
  simd::SetBackend(saved);
  MESSAGE("active backend: " << simd::BackendName(simd::ActiveBackend()));
}

TEST_CASE("kernels agree with a naive reference on every backend") {
  Rng rng(17);
  for (simd::Backend backend : Backends()) {
    const simd::KernelTable& k = simd::KernelsFor(backend);
    CAPTURE(simd::BackendName(backend));
    for (std::size_t rows : {1u, 2u, 3u, 5u, 8u, 13u}) {
      for (std::size_t cols : {1u, 3u, 4u, 7u, 8u, 9u, 16u, 31u}) {
        std::vector<double> a(rows * cols), x(cols), b(rows), v(rows);
        for (double& e : a) e = Uniform(rng, -2, 2);
        for (double& e : x) e = Uniform(rng, -3, 3);
        for (double& e : b) e = Uniform(rng, -1, 1);
        for (double& e : v) e = Uniform(rng, -1, 1);
        const double tol = 1e-14 * Scale(a, x) * static_cast<double>(cols + 1);

        std::vector<double> y(rows);
        k.matvec(a.data(), rows, cols, x.data(), b.data(), y.data());
        CHECK(MaxAbsDiff(y, NaiveMatVec(a, rows, cols, x, &b)) <= tol);
        k.matvec(a.data(), rows, cols, x.data(), nullptr, y.data());
        CHECK(MaxAbsDiff(y, NaiveMatVec(a, rows, cols, x, nullptr)) <= tol);

        std::vector<double> at(cols * rows);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < cols; ++j) at[j * rows + i] = a[i * cols + j];
        }
        std::vector<double> yt(cols);
        k.matvec_transposed(a.data(), rows, cols, v.data(), yt.data());
        CHECK(MaxAbsDiff(yt, NaiveMatVec(at, cols, rows, v, nullptr)) <=
              1e-14 * Scale(a, v) * static_cast<double>(rows + 1));
      }
    }
  }
}

TEST_CASE("scalar and AVX2 kernels are equivalent") {
  if (!simd::BackendSupported(simd::Backend::kAvx2)) {
    MESSAGE("AVX2 not available on this host; equivalence not exercised");
    return;
  }
  const simd::KernelTable& s = simd::KernelsFor(simd::Backend::kScalar);
  const simd::KernelTable& v = simd::KernelsFor(simd::Backend::kAvx2);
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t rows = 1 + trial % 11;
    const std::size_t cols = 1 + (trial * 7) % 37;
    std::vector<double> a(rows * cols), x(cols), b(rows), lo(cols), hi(cols);
    for (double& e : a) e = trial % 5 == 0 && Uniform(rng, 0, 1) < 0.3 ? 0.0 : Uniform(rng, -2, 2);
    for (double& e : x) e = Uniform(rng, -3, 3);
    for (double& e : b) e = Uniform(rng, -1, 1);
    for (std::size_t j = 0; j < cols; ++j) {
      lo[j] = Uniform(rng, -2, 1);
      hi[j] = lo[j] + Uniform(rng, 0, 2);
      if (trial % 7 == 0 && j % 3 == 0) lo[j] = -std::numeric_limits<double>::infinity();
      if (trial % 11 == 0 && j % 4 == 1) hi[j] = std::numeric_limits<double>::infinity();
    }
    const double tol = 1e-13 * Scale(a, x) * static_cast<double>(cols + 1);

    std::vector<double> ys(rows), yv(rows);
    s.matvec(a.data(), rows, cols, x.data(), b.data(), ys.data());
    v.matvec(a.data(), rows, cols, x.data(), b.data(), yv.data());
    CHECK(MaxAbsDiff(ys, yv) <= tol);

    std::vector<double> ts(cols), tv(cols);
    s.matvec_transposed(a.data(), rows, cols, b.data(), ts.data());
    v.matvec_transposed(a.data(), rows, cols, b.data(), tv.data());
    CHECK(MaxAbsDiff(ts, tv) <= tol);

    std::vector<double> sl(rows), sh(rows), vl(rows), vh(rows);
    s.interval_matvec(a.data(), rows, cols, lo.data(), hi.data(), b.data(), sl.data(), sh.data());
    v.interval_matvec(a.data(), rows, cols, lo.data(), hi.data(), b.data(), vl.data(), vh.data());
    for (std::size_t i = 0; i < rows; ++i) {
      CHECK(std::isinf(sl[i]) == std::isinf(vl[i]));
      CHECK(std::isinf(sh[i]) == std::isinf(vh[i]));
      CHECK_FALSE(std::isnan(vl[i]));
      CHECK_FALSE(std::isnan(vh[i]));
      if (std::isfinite(sl[i])) CHECK(std::fabs(sl[i] - vl[i]) <= tol * 4);
      if (std::isfinite(sh[i])) CHECK(std::fabs(sh[i] - vh[i]) <= tol * 4);
      if (std::isinf(sl[i])) CHECK(sl[i] == vl[i]);
      if (std::isinf(sh[i])) CHECK(sh[i] == vh[i]);
    }
  }
}

TEST_CASE("interval kernel contains sampled images") {
  Rng rng(29);
  for (simd::Backend backend : Backends()) {
    const simd::KernelTable& k = simd::KernelsFor(backend);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t rows = 1 + trial % 6;
      const std::size_t cols = 1 + trial % 9;
      std::vector<double> a(rows * cols), b(rows), lo(cols), hi(cols);
      for (double& e : a) e = Uniform(rng, -2, 2);
      for (double& e : b) e = Uniform(rng, -1, 1);
      for (std::size_t j = 0; j < cols; ++j) {
        lo[j] = Uniform(rng, -2, 1);
        hi[j] = lo[j] + Uniform(rng, 0, 2);
      }
      std::vector<double> ol(rows), oh(rows), y(rows), x(cols);
      k.interval_matvec(a.data(), rows, cols, lo.data(), hi.data(), b.data(), ol.data(), oh.data());
      for (int s = 0; s < 100; ++s) {
        for (std::size_t j = 0; j < cols; ++j) x[j] = Uniform(rng, lo[j], hi[j]);
        k.matvec(a.data(), rows, cols, x.data(), b.data(), y.data());
        for (std::size_t i = 0; i < rows; ++i) {
          const double slack = 1e-12 * (1.0 + std::fabs(y[i]));
          CHECK(y[i] >= ol[i] - slack);
          CHECK(y[i] <= oh[i] + slack);
        }
      }
    }
  }
}

TEST_CASE("zero coefficients never meet infinite endpoints") {
  for (simd::Backend backend : Backends()) {
    const simd::KernelTable& k = simd::KernelsFor(backend);
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> a{0.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    const std::vector<double> lo{-inf, 0.0, 1.0, -inf, -inf, -inf};
    const std::vector<double> hi{inf, 2.0, 1.0, inf, inf, inf};
    const std::vector<double> b{0.5};
    double ol = 0, oh = 0;
    k.interval_matvec(a.data(), 1, 6, lo.data(), hi.data(), b.data(), &ol, &oh);
    CHECK(ol == 0.5);
    CHECK(oh == 2.5);
  }
}
