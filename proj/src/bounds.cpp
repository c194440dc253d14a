#include "hypo/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hypo {

StructuralConstants structural_constants(int n, double cardI, double c, double b, double kappa,
                                         double lambda, double epsilon, double qbar,
                                         double S_row_sum, double S_sup) {
  if (n < 1) throw std::invalid_argument("level n must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0,1)");
  for (double x : {cardI, c, b, kappa, qbar, S_row_sum, S_sup})
    if (x < 0.0) throw std::invalid_argument("structural inputs must be non-negative");
  StructuralConstants s;
  s.n = n;
  s.cardI = cardI;
  s.c = c;
  s.b = b;
  s.kappa = kappa;
  s.lambda = lambda;
  s.epsilon = epsilon;
  s.qbar = qbar;
  s.S_row_sum = S_row_sum;
  s.S_sup = S_sup;
  const double nn = n;
  s.A_n = 2.0 * nn * b * c * cardI + nn / epsilon * cardI +
          0.5 * nn * nn * c * c * cardI * cardI * (cardI + 1.0);
  s.B_n = 2.0 * nn * qbar * c * cardI;
  s.Cbar_n = 2.0 * c * S_sup;
  s.C_n = nn * nn * nn * c * cardI / epsilon * S_row_sum +
          0.5 * nn * nn * s.Cbar_n * (cardI * cardI + 1.0);
  s.v_n = -lambda * nn * kappa + s.A_n;
  return s;
}

namespace {

// u[l][k][m] on an N-step grid; one forward sweep of the recursion with the
// coupling term g taken from the previous iterate.
using Surface = std::vector<std::vector<std::vector<double>>>;

Surface solve_grid(int n, const std::vector<double>& v, double C0, int R,
                   const std::vector<std::vector<double>>& u0, int K, double t, int N,
                   bool graded, bool& converged) {
  const double dt = t / N;
  Surface u(n, std::vector<std::vector<double>>(K, std::vector<double>(N + 1, 0.0)));
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < K; ++k) {
      const double base = k < static_cast<int>(u0[l].size()) ? u0[l][k] : 0.0;
      for (int m = 0; m <= N; ++m) u[l][k][m] = base * std::exp(v[l] * dt * m);
    }
  if (C0 == 0.0) {
    converged = true;
    return u;
  }
  std::vector<double> g(N + 1);
  converged = false;
  for (int sweep = 0; sweep < 500; ++sweep) {
    double change = 0.0;
    Surface next = u;
    for (int l = 0; l < n; ++l) {
      const double ef = std::exp(v[l] * dt);
      for (int k = 0; k < K; ++k) {
        for (int m = 0; m <= N; ++m) {
          double s = 0.0;
          if (graded) {
            for (int lp = 0; lp <= l; ++lp) s += u[lp][k][m] + u[lp][std::max(0, k - 1)][m];
            s *= 2.0 * R + 1.0;
          } else {
            for (int lp = 0; lp <= l; ++lp)
              for (int j = std::max(0, k - R); j <= std::min(K - 1, k + R); ++j)
                s += u[lp][j][m];
          }
          g[m] = C0 * s;
        }
        const double base = k < static_cast<int>(u0[l].size()) ? u0[l][k] : 0.0;
        double integ = 0.0;
        next[l][k][0] = base;
        for (int m = 1; m <= N; ++m) {
          integ = ef * (integ + 0.5 * dt * g[m - 1]) + 0.5 * dt * g[m];
          next[l][k][m] = base * std::exp(v[l] * dt * m) + integ;
        }
      }
    }
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < K; ++k)
        for (int m = 0; m <= N; ++m)
          change = std::max(change,
                            std::abs(next[l][k][m] - u[l][k][m]) / (1.0 + std::abs(u[l][k][m])));
    u = std::move(next);
    if (change < 1e-13) {
      converged = true;
      break;
    }
  }
  return u;
}

} // namespace

EnvelopeSurface gronwall_envelope(int n, const std::vector<double>& v_levels, double C0, int R,
                                  const std::vector<std::vector<double>>& initial_norms, double t,
                                  int steps, bool graded) {
  if (n < 1 || v_levels.size() != static_cast<size_t>(n) ||
      initial_norms.size() != static_cast<size_t>(n))
    throw std::invalid_argument("need one rate and one initial-norm vector per level");
  if (C0 < 0.0 || R < 0 || t < 0.0 || steps < 1)
    throw std::invalid_argument("C0, R, t must be non-negative and steps positive");
  int K = 1;
  for (const auto& row : initial_norms) K = std::max(K, static_cast<int>(row.size()));

  EnvelopeSurface out;
  if (t == 0.0) {
    out.t_grid = {0.0};
    out.bound.assign(n, std::vector<std::vector<double>>(K, std::vector<double>(1, 0.0)));
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < static_cast<int>(initial_norms[l].size()); ++k)
        out.bound[l][k][0] = initial_norms[l][k];
    out.converged = true;
    out.fitted.provenance = "propagated";
    return out;
  }

  bool conv1 = false, conv2 = false;
  const Surface coarse = solve_grid(n, v_levels, C0, R, initial_norms, K, t, steps, graded, conv1);
  const Surface fine =
      solve_grid(n, v_levels, C0, R, initial_norms, K, t, 2 * steps, graded, conv2);

  out.t_grid.resize(steps + 1);
  for (int m = 0; m <= steps; ++m) out.t_grid[m] = t * m / steps;
  out.bound.assign(n, std::vector<std::vector<double>>(K, std::vector<double>(steps + 1, 0.0)));
  double max_u = 0.0;
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < K; ++k)
      for (int m = 0; m <= steps; ++m) {
        const double f = fine[l][k][2 * m];
        out.bound[l][k][m] = f;
        max_u = std::max(max_u, f);
      }
  // Step-doubling check, restricted to entries large enough to be resolved
  // (the far tail sits many orders of magnitude below the surface maximum).
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < K; ++k)
      for (int m = 0; m <= steps; ++m) {
        const double f = out.bound[l][k][m];
        if (f > 1e-6 * max_u)
          out.refinement_error =
              std::max(out.refinement_error, std::abs(f - coarse[l][k][m]) / f);
      }

  // Sanity cap: total mass cannot beat twice the single-level exponential rate.
  double u0_sum = 0.0;
  for (const auto& row : initial_norms)
    for (double x : row) u0_sum += x;
  const double rate = *std::max_element(v_levels.begin(), v_levels.end()) +
                      C0 * (2.0 * R + 1.0) * n;
  const double cap = u0_sum * std::exp(2.0 * std::max(rate, 0.0) * t) + 1.0;
  std::ostringstream diag;
  out.converged = conv1 && conv2;
  if (!out.converged) diag << "fixed-point iteration did not converge; ";
  if (max_u > cap) {
    out.converged = false;
    diag << "growth " << max_u << " beyond sanity cap " << cap << "; ";
  }
  out.diagnostic = diag.str();

  // Least-squares fit of log u = log B + c t - v k over well-resolved entries.
  const double floor = std::max(max_u * 1e-14, 1e-280);
  double a[3][3] = {{0}}, rhs[3] = {0};
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < K; ++k)
      for (int m = 0; m <= steps; ++m) {
        const double uval = out.bound[l][k][m];
        if (uval < floor) continue;
        const double x[3] = {1.0, out.t_grid[m], -static_cast<double>(k)};
        const double y = std::log(uval);
        for (int r = 0; r < 3; ++r) {
          for (int c2 = 0; c2 < 3; ++c2) a[r][c2] += x[r] * x[c2];
          rhs[r] += x[r] * y;
        }
      }
  // 3x3 Gaussian elimination with partial pivoting; degenerate fits fall back
  // to a flat envelope at the max value.
  double sol[3] = {std::log(std::max(max_u, 1e-300)), 0.0, 0.0};
  {
    double M[3][4];
    for (int r = 0; r < 3; ++r) {
      for (int c2 = 0; c2 < 3; ++c2) M[r][c2] = a[r][c2];
      M[r][3] = rhs[r];
    }
    bool ok = true;
    for (int col = 0; col < 3 && ok; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
      if (std::abs(M[piv][col]) < 1e-12) {
        ok = false;
        break;
      }
      std::swap(M[piv], M[col]);
      for (int r = 0; r < 3; ++r)
        if (r != col) {
          const double f = M[r][col] / M[col][col];
          for (int c2 = col; c2 < 4; ++c2) M[r][c2] -= f * M[col][c2];
        }
    }
    if (ok)
      for (int r = 0; r < 3; ++r) sol[r] = M[r][3] / M[r][r];
  }
  out.fitted.B = std::exp(sol[0]);
  out.fitted.c = sol[1];
  out.fitted.v = sol[2];
  out.fitted.provenance = "propagated";
  return out;
}

} // namespace hypo
