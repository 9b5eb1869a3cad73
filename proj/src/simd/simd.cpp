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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "mlembed/simd.hpp"

namespace mlembed::simd {

namespace {

constexpr KernelTable kScalarTable{scalar::MatVec, scalar::MatVecTransposed,
                                   scalar::IntervalMatVec};
#if defined(MLEMBED_HAVE_AVX2)
constexpr KernelTable kAvx2Table{avx2::MatVec, avx2::MatVecTransposed,
                                 avx2::IntervalMatVec};
#endif

bool HostHasAvx2() {
#if defined(MLEMBED_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend DetectBackend() {
  const char* forced = std::getenv("MLEMBED_SIMD");
  if (forced != nullptr && std::string(forced) == "scalar") return Backend::kScalar;
  return HostHasAvx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& ActiveSlot() {
  static std::atomic<Backend> slot{DetectBackend()};
  return slot;
}

}  // namespace

std::string_view BackendName(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
  }
  return "unknown";
}

bool BackendSupported(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return true;
    case Backend::kAvx2: return HostHasAvx2();
  }
  return false;
}

Backend ActiveBackend() { return ActiveSlot().load(std::memory_order_relaxed); }

void SetBackend(Backend backend) {
  if (!BackendSupported(backend)) {
    throw std::invalid_argument("SIMD backend not supported on this host: " +
                                std::string(BackendName(backend)));
  }
  ActiveSlot().store(backend, std::memory_order_relaxed);
}

const KernelTable& KernelsFor(Backend backend) {
#if defined(MLEMBED_HAVE_AVX2)
  if (backend == Backend::kAvx2) return kAvx2Table;
#else
  (void)backend;
#endif
  return kScalarTable;
}

const KernelTable& Kernels() { return KernelsFor(ActiveBackend()); }

}  // namespace mlembed::simd
