#pragma once

namespace hypo {

// One row of the fused explicit step, j in [1, n-2]:
//   out[j] = u[j] + c2s[j]*((prev[j] - 2u[j]) + next[j]) + c1s[j]*(next[j] - prev[j])
//          + c2f[j]*((u[j-1] - 2u[j]) + u[j+1]) + c1f[j]*(u[j+1] - u[j-1])
// "s" = slow axis (prev/next rows), "f" = fast (contiguous) axis.
// The scalar and AVX2 variants use the identical operation tree per element and
// must produce bitwise-equal results (the build disables FP contraction).
using StencilRowFn = void (*)(const double* prev, const double* u, const double* next,
                              const double* c2s, const double* c1s, const double* c2f,
                              const double* c1f, double* out, int n);

void stencil_row_scalar(const double* prev, const double* u, const double* next,
                        const double* c2s, const double* c1s, const double* c2f,
                        const double* c1f, double* out, int n);
void stencil_row_avx2(const double* prev, const double* u, const double* next,
                      const double* c2s, const double* c1s, const double* c2f,
                      const double* c1f, double* out, int n);

// Slow-axis diffusion only with a constant coefficient (split scheme inner pass):
//   out[j] = u[j] + c*((prev[j] - 2u[j]) + next[j]),  j in [0, n-1]
using DiffuseRowFn = void (*)(const double* prev, const double* u, const double* next,
                              double c, double* out, int n);
void diffuse_row_scalar(const double* prev, const double* u, const double* next, double c,
                        double* out, int n);
void diffuse_row_avx2(const double* prev, const double* u, const double* next, double c,
                      double* out, int n);

bool avx2_available();
StencilRowFn stencil_row_dispatch();
DiffuseRowFn diffuse_row_dispatch();

} // namespace hypo
