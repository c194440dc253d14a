#pragma once
#include <string>
#include <vector>

namespace hypo {

// Structural constants of the coupled-chain generator, evaluated from the
// model's summed interaction norms. S_row_sum is sup_z sum_y over interaction
// entries touching (y,z) plus (z,y); S_sup is the largest single row sum.
struct StructuralConstants {
  // inputs echoed
  int n = 1;
  double cardI = 0, c = 0, b = 0, kappa = 0, lambda = 0, epsilon = 0;
  double qbar = 0, S_row_sum = 0, S_sup = 0;
  // derived
  double A_n = 0;    // drift/commutator growth constant
  double B_n = 0;    // 2 n qbar c |I|
  double C_n = 0;    // interaction cross-term constant
  double Cbar_n = 0; // 2 c S_sup
  double v_n = 0;    // -lambda n kappa + A_n
};

StructuralConstants structural_constants(int n, double cardI, double c, double b, double kappa,
                                         double lambda, double epsilon, double qbar,
                                         double S_row_sum, double S_sup);

struct BoundEnvelope {
  double B = 0, c = 0, v = 0; // value = B * exp(c*t - v*distance)
  std::string provenance;     // "fitted" or "propagated"
};

// Solution surface of the propagation recursion. In band mode (default), k is
// a lattice distance and
//   u_l,k(t) = e^{v_l t} u0_l,k
//            + C0 * sum_{l' <= l} sum_{|j-k| <= R} int_0^t e^{v_l (t-s)} u_l',j(s) ds .
// In graded mode, k counts R-sized distance grades and every neighbor is
// majorized by the adjacent grade,
//   u_l,k(t) = e^{v_l t} u0_l,k
//            + C0 (2R+1) * sum_{l' <= l} int_0^t e^{v_l (t-s)} (u_l',k + u_l',k-1)(s) ds
// (grade -1 clamps to grade 0); for a single level with u0 supported at grade 0
// its exact solution is e^{(v + C')t} * sum_{j >= k} (C' t)^j / j!, C' = C0(2R+1).
// Iterated to a fixed point on a uniform time grid (trapezoid rule), with a
// doubled-resolution rerun as a discretization check. Distances beyond the
// initial-norm vectors are treated as zero; callers pad with zeros out to the
// largest distance they query.
struct EnvelopeSurface {
  std::vector<double> t_grid;
  // bound[l-1][k][m]: level l, distance k, time t_grid[m]
  std::vector<std::vector<std::vector<double>>> bound;
  BoundEnvelope fitted; // least-squares B e^{ct - v k} over the surface
  bool converged = false;
  double refinement_error = 0.0; // max relative change under step doubling
  std::string diagnostic;
};

EnvelopeSurface gronwall_envelope(int n, const std::vector<double>& v_levels, double C0, int R,
                                  const std::vector<std::vector<double>>& initial_norms,
                                  double t, int steps = 400, bool graded = false);

} // namespace hypo
