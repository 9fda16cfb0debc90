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

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define COT_HAVE_X86 1
#endif

namespace cot::kernels {

#ifdef COT_HAVE_X86

namespace {

// exp(x) for x <= 0. Cody-Waite reduction x = n ln2 + r, |r| <= ln2 / 2,
// then a degree-13 Taylor polynomial; results below exp(-708) flush to 0.
__attribute__((target("avx2,fma"))) inline __m256d exp_neg(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d lower = _mm256_set1_pd(-708.0);
  const __m256d under = _mm256_cmp_pd(x, lower, _CMP_LT_OQ);
  x = _mm256_max_pd(x, lower);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);
  static constexpr double c[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
      1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
      1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
      1.0 / 24.0,         1.0 / 6.0,         0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(c[0]);
  for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[k]));
  // 2^n through the exponent field.
  const __m256d magic = _mm256_set1_pd(0x1.8p52);
  const __m256i bits = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)),
                                        _mm256_castpd_si256(magic));
  const __m256i expo = _mm256_slli_epi64(
      _mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
  const __m256d res = _mm256_mul_pd(p, _mm256_castsi256_pd(expo));
  return _mm256_andnot_pd(under, res);
}

__attribute__((target("avx2,fma"))) inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

__attribute__((target("avx2,fma"))) void gauss_sums_avx2(
    const PairInput& in, std::size_t begin, std::size_t end, double* A,
    double* B0, double* B1) {
  const std::size_t n = in.n;
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d neg_c = _mm256_set1_pd(-in.inv2h2);
  for (std::size_t i = begin; i < end; ++i) {
    const __m256d yi0 = _mm256_set1_pd(in.y0[i]);
    const __m256d yi1 = _mm256_set1_pd(in.y1 ? in.y1[i] : 0.0);
    __m256d a = _mm256_setzero_pd(), b0 = a, b1 = a;
    for (std::size_t j = 0; j < n4; j += 4) {
      const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(in.y0 + j), yi0);
      __m256d r2 = _mm256_mul_pd(d0, d0);
      __m256d d1 = _mm256_setzero_pd();
      if (in.y1) {
        d1 = _mm256_sub_pd(_mm256_loadu_pd(in.y1 + j), yi1);
        r2 = _mm256_fmadd_pd(d1, d1, r2);
      }
      const __m256d e =
          _mm256_mul_pd(_mm256_loadu_pd(in.w + j), exp_neg(_mm256_mul_pd(r2, neg_c)));
      a = _mm256_add_pd(a, e);
      b0 = _mm256_fmadd_pd(e, d0, b0);
      b1 = _mm256_fmadd_pd(e, d1, b1);
    }
    double sa = hsum(a), s0 = hsum(b0), s1 = hsum(b1);
    for (std::size_t j = n4; j < n; ++j) {
      const double d0 = in.y0[j] - in.y0[i];
      double r2 = d0 * d0, d1 = 0;
      if (in.y1) {
        d1 = in.y1[j] - in.y1[i];
        r2 += d1 * d1;
      }
      const double e = in.w[j] * std::exp(-r2 * in.inv2h2);
      sa += e;
      s0 += e * d0;
      s1 += e * d1;
    }
    A[i] = sa;
    if (B0) B0[i] = s0;
    if (B1) B1[i] = s1;
  }
}

bool avx2_available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

#else

void gauss_sums_avx2(const PairInput& in, std::size_t begin, std::size_t end,
                     double* A, double* B0, double* B1) {
  gauss_sums_scalar(in, begin, end, A, B0, B1);
}

bool avx2_available() { return false; }

#endif

}  // namespace cot::kernels
