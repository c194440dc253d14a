// Compiled with -mavx2 for this translation unit only; callers go through the
// runtime dispatch in stencil_scalar.cpp. No FMA intrinsics are used so results
// stay bitwise-identical to the scalar kernel.
#include <immintrin.h>

#include "hypo/stencil.hpp"

namespace hypo {

void stencil_row_avx2(const double* prev, const double* u, const double* next,
                      const double* c2s, const double* c1s, const double* c2f,
                      const double* c1f, double* out, int n) {
  const __m256d two = _mm256_set1_pd(2.0);
  int j = 1;
  for (; j + 4 <= n - 1; j += 4) {
    const __m256d uj = _mm256_loadu_pd(u + j);
    const __m256d pj = _mm256_loadu_pd(prev + j);
    const __m256d nj = _mm256_loadu_pd(next + j);
    const __m256d ul = _mm256_loadu_pd(u + j - 1);
    const __m256d ur = _mm256_loadu_pd(u + j + 1);
    const __m256d lap_s = _mm256_add_pd(_mm256_sub_pd(pj, _mm256_mul_pd(two, uj)), nj);
    const __m256d der_s = _mm256_sub_pd(nj, pj);
    const __m256d lap_f = _mm256_add_pd(_mm256_sub_pd(ul, _mm256_mul_pd(two, uj)), ur);
    const __m256d der_f = _mm256_sub_pd(ur, ul);
    const __m256d t1 = _mm256_add_pd(_mm256_mul_pd(_mm256_loadu_pd(c2s + j), lap_s),
                                     _mm256_mul_pd(_mm256_loadu_pd(c1s + j), der_s));
    const __m256d t2 = _mm256_add_pd(t1, _mm256_mul_pd(_mm256_loadu_pd(c2f + j), lap_f));
    const __m256d t3 = _mm256_add_pd(t2, _mm256_mul_pd(_mm256_loadu_pd(c1f + j), der_f));
    _mm256_storeu_pd(out + j, _mm256_add_pd(uj, t3));
  }
  for (; j < n - 1; ++j) {
    const double lap_s = (prev[j] - 2.0 * u[j]) + next[j];
    const double der_s = next[j] - prev[j];
    const double lap_f = (u[j - 1] - 2.0 * u[j]) + u[j + 1];
    const double der_f = u[j + 1] - u[j - 1];
    out[j] = u[j] + (((c2s[j] * lap_s + c1s[j] * der_s) + c2f[j] * lap_f) + c1f[j] * der_f);
  }
}

void diffuse_row_avx2(const double* prev, const double* u, const double* next, double c,
                      double* out, int n) {
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d cc = _mm256_set1_pd(c);
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d uj = _mm256_loadu_pd(u + j);
    const __m256d pj = _mm256_loadu_pd(prev + j);
    const __m256d nj = _mm256_loadu_pd(next + j);
    const __m256d lap = _mm256_add_pd(_mm256_sub_pd(pj, _mm256_mul_pd(two, uj)), nj);
    _mm256_storeu_pd(out + j, _mm256_add_pd(uj, _mm256_mul_pd(cc, lap)));
  }
  for (; j < n; ++j) out[j] = u[j] + c * ((prev[j] - 2.0 * u[j]) + next[j]);
}

} // namespace hypo
