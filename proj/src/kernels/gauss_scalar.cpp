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

#include <cmath>

#include "cot/kernels.hpp"

namespace cot::kernels {

void gauss_sums_scalar(const PairInput& in, std::size_t begin, std::size_t end,
                       double* A, double* B0, double* B1) {
  const std::size_t n = in.n;
  for (std::size_t i = begin; i < end; ++i) {
    const double yi0 = in.y0[i];
    const double yi1 = in.y1 ? in.y1[i] : 0.0;
    double a = 0, b0 = 0, b1 = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d0 = in.y0[j] - yi0;
      double r2 = d0 * d0;
      double d1 = 0;
      if (in.y1) {
        d1 = in.y1[j] - yi1;
        r2 += d1 * d1;
      }
      const double e = in.w[j] * std::exp(-r2 * in.inv2h2);
      a += e;
      b0 += e * d0;
      b1 += e * d1;
    }
    A[i] = a;
    if (B0) B0[i] = b0;
    if (B1) B1[i] = b1;
  }
}

}  // namespace cot::kernels
