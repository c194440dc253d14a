#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hypo/bounds.hpp"

using namespace hypo;

namespace {

// Exact value of the band recursion with a point initial condition: the fixed
// point solves u' = (vI + C0 M)u for the 0/1 band matrix M (|i-j| <= R), so
// u_k(t) = e^{vt} (e^{C0 t M})_{k0}, evaluated here by a truncated series.
double band_exact(double v, double C0, int R, int K, int k, double t) {
  std::vector<double> x(K, 0.0), y(K);
  x[0] = 1.0;
  double result = x[k], term = 1.0;
  for (int p = 1; p < 200; ++p) {
    for (int i = 0; i < K; ++i) {
      double s = 0.0;
      for (int j = std::max(0, i - R); j <= std::min(K - 1, i + R); ++j) s += x[j];
      y[i] = s;
    }
    x = y;
    term *= C0 * t / p;
    result += term * x[k];
    if (term * std::exp(C0 * t * (2 * R + 1)) < 1e-18) break;
  }
  return std::exp(v * t) * result;
}

double tail(double z, int N) {
  double term = 1.0, s = 0.0;
  for (int j = 0; j < N; ++j) term *= z / (j + 1);
  for (int j = N; j < N + 200; ++j) {
    s += term;
    term *= z / (j + 1);
  }
  return s;
}

} // namespace

TEST_CASE("structural constants reproduce hand-evaluated example") {
  StructuralConstants s = structural_constants(1, 1, 1, 1, 0, 0, 1 - 1e-12, 0, 0, 0);
  CHECK(s.A_n == doctest::Approx(4.0));
  CHECK(s.v_n == doctest::Approx(4.0));
  CHECK(s.B_n == 0.0);
  CHECK(s.C_n == 0.0);
  CHECK(s.Cbar_n == 0.0);
}

TEST_CASE("abelian case zeroes the interaction constants") {
  StructuralConstants s = structural_constants(3, 2, 0, 1.5, 0.3, 1.0, 0.5, 2.0, 4.0, 7.0);
  CHECK(s.A_n == doctest::Approx(3.0 / 0.5 * 2.0));
  CHECK(s.Cbar_n == 0.0);
  CHECK(s.C_n == 0.0);
  CHECK(s.B_n == 0.0);
}

TEST_CASE("strong dilation makes the drift rate negative") {
  StructuralConstants s = structural_constants(1, 1, 0, 0, 1.0, 100.0, 0.5, 0, 0, 0);
  CHECK(s.A_n == doctest::Approx(2.0));
  CHECK(s.v_n == doctest::Approx(-98.0));
}

TEST_CASE("structural constants reject bad inputs") {
  CHECK_THROWS(structural_constants(1, 1, 1, 1, 0, 0, 0.0, 0, 0, 0));
  CHECK_THROWS(structural_constants(1, 1, 1, 1, 0, 0, 1.0, 0, 0, 0));
  CHECK_THROWS(structural_constants(1, -1, 1, 1, 0, 0, 0.5, 0, 0, 0));
  CHECK_THROWS(structural_constants(0, 1, 1, 1, 0, 0, 0.5, 0, 0, 0));
}

TEST_CASE("zero coupling collapses the envelope to the exponential term") {
  std::vector<std::vector<double>> u0 = {{2.0, 0.5, 0.0, 0.0}};
  EnvelopeSurface e = gronwall_envelope(1, {0.7}, 0.0, 1, u0, 1.0, 100);
  REQUIRE(e.converged);
  for (size_t m = 0; m < e.t_grid.size(); ++m) {
    CHECK(e.bound[0][0][m] == doctest::Approx(2.0 * std::exp(0.7 * e.t_grid[m])));
    CHECK(e.bound[0][1][m] == doctest::Approx(0.5 * std::exp(0.7 * e.t_grid[m])));
    CHECK(e.bound[0][2][m] == 0.0);
  }
}

TEST_CASE("zero-time envelope returns the initial norms") {
  std::vector<std::vector<double>> u0 = {{1.0, 0.25}};
  EnvelopeSurface e = gronwall_envelope(1, {3.0}, 2.0, 2, u0, 0.0, 400);
  REQUIRE(e.converged);
  CHECK(e.t_grid.size() == 1);
  CHECK(e.bound[0][0][0] == 1.0);
  CHECK(e.bound[0][1][0] == 0.25);
}

TEST_CASE("band recursion matches the matrix-exponential solution") {
  const double v = 0.3, C0 = 0.4;
  const int R = 1, K = 12;
  std::vector<std::vector<double>> u0(1, std::vector<double>(K, 0.0));
  u0[0][0] = 1.0;
  EnvelopeSurface e = gronwall_envelope(1, {v}, C0, R, u0, 1.0, 400);
  REQUIRE(e.converged);
  CHECK(e.refinement_error < 1e-2);
  for (int k = 0; k <= 6; ++k) {
    const double exact = band_exact(v, C0, R, 40, k, 1.0);
    CHECK(e.bound[0][k].back() == doctest::Approx(exact).epsilon(0.01));
  }
}

TEST_CASE("graded recursion reproduces the factorial-tail closed form") {
  const double v = 0.5, C0 = 0.4;
  const int R = 1, K = 8;
  const double Cp = C0 * (2 * R + 1);
  std::vector<std::vector<double>> u0(1, std::vector<double>(K, 0.0));
  u0[0][0] = 1.0;
  EnvelopeSurface e = gronwall_envelope(1, {v}, C0, R, u0, 1.5, 400, true);
  REQUIRE(e.converged);
  for (int N = 0; N <= 6; ++N) {
    const double exact = std::exp((v + Cp) * 1.5) * tail(Cp * 1.5, N);
    CHECK(e.bound[0][N].back() == doctest::Approx(exact).epsilon(0.01));
  }
}

TEST_CASE("envelope values never decrease when constants grow") {
  std::vector<std::vector<double>> u0 = {{1.0, 0.2, 0.0, 0.0, 0.0, 0.0}};
  EnvelopeSurface small = gronwall_envelope(1, {0.2}, 0.3, 1, u0, 1.0, 200);
  EnvelopeSurface big_c = gronwall_envelope(1, {0.2}, 0.5, 1, u0, 1.0, 200);
  EnvelopeSurface big_v = gronwall_envelope(1, {0.4}, 0.3, 1, u0, 1.0, 200);
  EnvelopeSurface big_r = gronwall_envelope(1, {0.2}, 0.3, 2, u0, 1.0, 200);
  REQUIRE(small.converged);
  for (size_t k = 0; k < u0[0].size(); ++k)
    for (size_t m = 0; m < small.t_grid.size(); ++m) {
      CHECK(big_c.bound[0][k][m] >= small.bound[0][k][m] - 1e-12);
      CHECK(big_v.bound[0][k][m] >= small.bound[0][k][m] - 1e-12);
      CHECK(big_r.bound[0][k][m] >= small.bound[0][k][m] - 1e-12);
    }
}

TEST_CASE("propagated bound decays at least geometrically at large distance") {
  const int K = 14;
  std::vector<std::vector<double>> u0(1, std::vector<double>(K, 0.0));
  u0[0][0] = 1.0;
  const double C0 = 0.4, t = 1.0;
  const int R = 1;
  EnvelopeSurface e = gronwall_envelope(1, {0.3}, C0, R, u0, t, 300);
  REQUIRE(e.converged);
  const int kmin = static_cast<int>(std::exp(1.0) * C0 * (2 * R + 1) * t / R) + 1;
  for (int k = kmin; k + 1 < K - 1; ++k) {
    CHECK(e.bound[0][k + 1].back() < e.bound[0][k].back());
    CHECK(e.bound[0][k + 1].back() / e.bound[0][k].back() < 0.9);
  }
}

TEST_CASE("two-level surface feeds lower levels into higher ones") {
  std::vector<std::vector<double>> u0 = {{1.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}};
  EnvelopeSurface e = gronwall_envelope(2, {0.1, 0.2}, 0.3, 1, u0, 1.0, 200);
  REQUIRE(e.converged);
  // level 2 starts at zero but is driven by level 1 mass
  CHECK(e.bound[1][0].back() > 0.0);
  CHECK(e.bound[1][1].back() > 0.0);
  CHECK(e.fitted.provenance == "propagated");
  CHECK(e.fitted.v > 0.0);
  CHECK(e.fitted.c > 0.0);
}

TEST_CASE("envelope rejects malformed inputs") {
  std::vector<std::vector<double>> u0 = {{1.0}};
  CHECK_THROWS(gronwall_envelope(2, {0.1}, 0.3, 1, u0, 1.0, 100));
  CHECK_THROWS(gronwall_envelope(1, {0.1}, -0.3, 1, u0, 1.0, 100));
  CHECK_THROWS(gronwall_envelope(1, {0.1}, 0.3, 1, u0, -1.0, 100));
  CHECK_THROWS(gronwall_envelope(1, {0.1}, 0.3, 1, u0, 1.0, 0));
}
