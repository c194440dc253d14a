#include "hypo/stencil.hpp"

namespace hypo {

void stencil_row_scalar(const double* prev, const double* u, const double* next,
                        const double* c2s, const double* c1s, const double* c2f,
                        const double* c1f, double* out, int n) {
  for (int j = 1; j < n - 1; ++j) {
    const double lap_s = (prev[j] - 2.0 * u[j]) + next[j];
    const double der_s = next[j] - prev[j];
    const double lap_f = (u[j - 1] - 2.0 * u[j]) + u[j + 1];
    const double der_f = u[j + 1] - u[j - 1];
    out[j] = u[j] + (((c2s[j] * lap_s + c1s[j] * der_s) + c2f[j] * lap_f) + c1f[j] * der_f);
  }
}

void diffuse_row_scalar(const double* prev, const double* u, const double* next, double c,
                        double* out, int n) {
  for (int j = 0; j < n; ++j) out[j] = u[j] + c * ((prev[j] - 2.0 * u[j]) + next[j]);
}

bool avx2_available() { return __builtin_cpu_supports("avx2"); }

StencilRowFn stencil_row_dispatch() {
  return avx2_available() ? stencil_row_avx2 : stencil_row_scalar;
}

DiffuseRowFn diffuse_row_dispatch() {
  return avx2_available() ? diffuse_row_avx2 : diffuse_row_scalar;
}

} // namespace hypo
