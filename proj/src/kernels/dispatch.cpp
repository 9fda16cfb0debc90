// Copyright 2026-present the cot project
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

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "cot/kernels.hpp"

namespace cot::kernels {

Backend default_backend() {
  static const Backend b = [] {
    if (const char* env = std::getenv("COT_SIMD")) {
      if (std::string(env) == "scalar") return Backend::Scalar;
    }
    return avx2_available() ? Backend::Avx2 : Backend::Scalar;
  }();
  return b;
}

std::string_view backend_name(Backend b) {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

void gauss_sums(Backend b, const PairInput& in, double* A, double* B0,
                double* B1, int threads) {
  auto run = [&](std::size_t lo, std::size_t hi) {
    if (b == Backend::Avx2 && avx2_available()) {
      gauss_sums_avx2(in, lo, hi, A, B0, B1);
    } else {
      gauss_sums_scalar(in, lo, hi, A, B0, B1);
    }
  };
  const std::size_t n = in.n;
  const std::size_t t = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (t == 1) {
    run(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + t - 1) / t;
  for (std::size_t k = 0; k < t; ++k) {
    const std::size_t lo = k * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(run, lo, hi);
  }
  for (auto& th : pool) th.join();
}

}  // namespace cot::kernels
