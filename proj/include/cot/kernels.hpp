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

#pragma once

#include <cstddef>
#include <string_view>

namespace cot::kernels {

enum class Backend { Scalar, Avx2 };

// Inputs for the pairwise Gaussian sums. Coordinates are stored one array
// per dimension; y1 is null in 1D.
struct PairInput {
  const double* y0;
  const double* y1;
  const double* w;
  std::size_t n;
  double inv2h2;  // 1 / (2 h^2)
};

// For rows i in [begin, end), with e_ij = exp(-|y_i - y_j|^2 * inv2h2):
//   A[i]  = sum_j w_j e_ij
//   B0[i] = sum_j w_j (y0_j - y0_i) e_ij   (skipped when B0 is null)
//   B1[i] = sum_j w_j (y1_j - y1_i) e_ij   (2D only, skipped when null)
void gauss_sums_scalar(const PairInput& in, std::size_t begin, std::size_t end,
                       double* A, double* B0, double* B1);
void gauss_sums_avx2(const PairInput& in, std::size_t begin, std::size_t end,
                     double* A, double* B0, double* B1);

bool avx2_available();
// Avx2 when the CPU supports it, unless COT_SIMD=scalar is set.
Backend default_backend();
std::string_view backend_name(Backend b);

// Dispatches to the chosen backend and splits rows over threads. Every row is
// computed by exactly one thread in a fixed order, so results do not depend
// on the thread count.
void gauss_sums(Backend b, const PairInput& in, double* A, double* B0,
                double* B1, int threads = 1);

}  // namespace cot::kernels
