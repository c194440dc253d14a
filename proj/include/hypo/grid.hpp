#pragma once
#include <functional>
#include <string>
#include <vector>

#include "hypo/coeffs.hpp"
#include "hypo/sde.hpp"
#include "hypo/word.hpp"

namespace hypo {

// 2-d explicit finite-difference oracle for P_t. Axis 2 is contiguous in
// memory; callers lay out coordinates so the finely resolved axis is axis 2.
enum class Scheme {
  fused, // central diffusion + per-axis Lax-Wendroff advection, one pass
  split  // exact integer-shift advection along axis 2 + explicit diffusion
         // along axis 1 (advection coefficient must be constant per row and
         // shift a whole number of cells per step)
};

struct GridConfig {
  int n1 = 201, n2 = 201;
  double lo1 = -4.0, hi1 = 4.0, lo2 = -4.0, hi2 = 4.0;
  Scheme scheme = Scheme::fused;
  double safety = 0.5;        // fraction of the diffusion stability bound
  double cfl = 0.9;           // fraction of the advective limit (fused scheme)
  double dt_override = 0.0;   // required for split: the base advection step
  int split_macro_target = 8; // split: aim for ~this many macro steps per call
                              // (macro step = whole multiple of dt_override)
  double interior_margin = 0.15;
  double contamination_tol = 1e-6; // relative to sup|f0|
  bool enforce_contamination = true;

  double h1() const { return (hi1 - lo1) / (n1 - 1); }
  double h2() const { return (hi2 - lo2) / (n2 - 1); }
};

struct GridFn {
  int n1 = 0, n2 = 0;
  double lo1 = 0, h1 = 0, lo2 = 0, h2 = 0;
  std::vector<double> v; // row-major, axis-2 contiguous

  double& at(int i, int j) { return v[static_cast<size_t>(i) * n2 + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * n2 + j]; }
  double x1(int i) const { return lo1 + i * h1; }
  double x2(int j) const { return lo2 + j * h2; }
};

GridFn sample_grid(const GridConfig& cfg, const std::function<double(double, double)>& f);
// Sup of |f| over the interior sub-box (margin fraction excluded per axis).
double interior_sup(const GridFn& f, double margin);

struct EvolveResult {
  GridFn f;
  double contamination = 0.0; // max |change| on the boundary-adjacent ring
  double dt = 0.0;
  long steps = 0;
  double t_actual = 0.0; // split scheme lands on a whole number of steps
};

// Explicit time stepping of du/dt = Lu with frozen boundary values.
// Throws on stability violations, unsupported operator shapes (the diffusion
// direction must be axis-aligned), or excessive boundary contamination.
EvolveResult grid_evolve(const ModelOperator& op, const GridFn& f0, double t,
                         const GridConfig& cfg);
// Move-in variant: avoids holding a third full-size buffer during stepping.
EvolveResult grid_evolve(const ModelOperator& op, GridFn&& f0, double t, const GridConfig& cfg);

// Z_{k_1}...Z_{k_n} f via central differences, fields applied right to left;
// cells whose stencil touched the boundary are masked to zero.
GridFn word_derivative(const GridFn& f, const OperatorWord& word,
                       const std::vector<VectorField>& Z_fields);

struct SmoothingPoint {
  double t = 0, sup_norm = 0, contamination = 0;
};
struct SmoothingResult {
  std::vector<SmoothingPoint> points;
  double fitted_slope = 0, predicted_slope = 0, r2 = 0, residual = 0;
};

// Sup-norm decay of the word derivative of P_t f over t_list (log-log fit);
// predicted slope is -(2|k| + n)/2. Throws when norms fall below the 1e-10
// noise floor (degenerate fit).
SmoothingResult smoothing_exponent(const ModelOperator& op,
                                   const std::function<double(double, double)>& f,
                                   const OperatorWord& word, const std::vector<double>& t_list,
                                   const GridConfig& cfg);

// min over sample points of d_n*(P_t f^2 - (P_t f)^2) - Gamma_t^{(n)} f_t.
double variance_bound_check(const ModelOperator& op,
                            const std::function<double(double, double)>& f,
                            const CoefficientTable& table, double t, int sample_points,
                            const GridConfig& cfg);

struct ProbeResult {
  std::vector<double> s_values;
  std::vector<double> q_values; // P_{t-s}(Q_s f_s) at the probe point
  bool non_increasing = false;
  double tolerance = 0.0;
  double identity_lhs = 0.0, identity_rhs = 0.0, identity_rel_err = 0.0;
  std::string diagnostic;
};

// Evaluates s -> P_{t-s}(Q_s^{(n)} f_s) at the box-center node; also checks the
// product-derivation identity (-L + d/ds)(Wh*Vh) = -2(Z0Wh)(Z0Vh) + ([W,L]h)Vh
// + Wh([V,L]h) numerically with W = V = Z0 at the midpoint s.
ProbeResult q_monotonicity_probe(const ModelOperator& op,
                                 const std::function<double(double, double)>& f,
                                 const CoefficientTable& table, double t,
                                 const std::vector<double>& s_list, const GridConfig& cfg);

} // namespace hypo
