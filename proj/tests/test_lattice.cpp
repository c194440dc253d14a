#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hypo/chain.hpp"
#include "hypo/lattice.hpp"

using namespace hypo;

namespace {

// Ornstein-Uhlenbeck fiber: Y0 = d/du, dilation D = u d/du.
LatticeModel ou_chain(int radius, double lambda) {
  VectorField Y0(std::vector<Polynomial>{Polynomial::constant(1, 1)});
  LatticeModel m = make_chain(radius, 1, {Y0}, 1);
  m.lambda = lambda;
  VectorField D(std::vector<Polynomial>{Polynomial::variable(1, 0)});
  m.D = D;
  return m;
}

// Nearest-neighbor first-order coupling q_{0,x} = theta (u_{x-1} + u_{x+1}).
void add_nn_coupling(LatticeModel& m, const Rational& theta) {
  for (int x = 0; x < m.nsites(); ++x) {
    Polynomial p(m.nvars());
    for (int y = 0; y < m.nsites(); ++y)
      if (m.distance(x, y) == 1) p = p + Polynomial::variable(m.nvars(), m.var(y, 0)) * theta;
    if (!p.is_zero()) m.q[x][0] = p;
  }
}

CylinderFn site_fn(const LatticeModel& m, int site, const Polynomial& fiber_poly) {
  CylinderFn f;
  f.support = {m.sites[site]};
  f.p = fiber_poly;
  return f;
}

} // namespace

TEST_CASE("SDE generator matches the exact lattice generator on polynomials") {
  LatticeModel m = ou_chain(1, 1.0);
  add_nn_coupling(m, Rational(1, 5));
  m.S[{0, 1}] = {{0.25}};
  m.S[{1, 2}] = {{0.25}};
  LatticeSde sde = build_coupled_sde(m);
  std::vector<Polynomial> tests;
  const int n = m.nvars();
  tests.push_back(Polynomial::variable(n, 1));
  tests.push_back(Polynomial::variable(n, 0) * Polynomial::variable(n, 0));
  tests.push_back(Polynomial::variable(n, 0) * Polynomial::variable(n, 2));
  tests.push_back(Polynomial::variable(n, 1) * Polynomial::variable(n, 1) *
                  Polynomial::variable(n, 1));
  for (const Polynomial& g : tests) CHECK(m.apply_generator(g) == sde.apply_generator(g));
}

TEST_CASE("noise mixing accepts contractive couplings and rejects the rest") {
  LatticeModel m = ou_chain(1, 1.0);
  m.S[{0, 1}] = {{0.9}};
  CHECK_NOTHROW(build_coupled_sde(m));
  m.S[{0, 1}] = {{2.5}};
  m.delta = 1.25;
  try {
    build_coupled_sde(m);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("delta") != std::string::npos);
  }
}

TEST_CASE("model validation flags malformed couplings") {
  LatticeModel m = ou_chain(1, 1.0);
  m.S[{1, 1}] = {{0.1}};
  CHECK_THROWS(m.validate());
  m.S.clear();
  m.S[{0, 2}] = {{0.1}}; // distance 2 > range 1
  CHECK_THROWS(m.validate());
  m.S.clear();
  m.S[{0, 1}] = {{0.1, 0.2}}; // wrong block shape for nJ = 1
  CHECK_THROWS(m.validate());
}

TEST_CASE("single-site OU mean decays at the exact rate, bitwise reproducibly") {
  LatticeModel m = ou_chain(0, 1.0);
  CylinderFn f = site_fn(m, 0, Polynomial::variable(1, 0));
  Configuration w0{{{2.0}}};
  LatticeMcParams mc;
  mc.paths = 2000;
  mc.dt = 1e-3;
  LatticeMcCurve a = lattice_mc(m, f, w0, {0.5, 1.0}, mc);
  LatticeMcCurve b = lattice_mc(m, f, w0, {0.5, 1.0}, mc);
  CHECK(a.mean == b.mean);
  CHECK(a.stderr_ == b.stderr_);
  for (size_t i = 0; i < a.t.size(); ++i) {
    const double exact = 2.0 * std::exp(-a.t[i]);
    CHECK(std::abs(a.mean[i] - exact) < 4.0 * a.stderr_[i] + 1e-3);
  }
}

TEST_CASE("decoupled derivative profile: exact local response, exact zero at distance 1") {
  LatticeModel m = ou_chain(1, 1.0);
  CylinderFn f = site_fn(m, 1, Polynomial::variable(1, 0)); // center site
  Configuration w0{{{0.3}, {-0.2}, {0.1}}};
  LatticeMcParams mc;
  mc.paths = 400;
  mc.dt = 1e-3;
  auto prof = derivative_profile(m, f, 0.5, 1, {{1}, {2}}, w0, mc);
  REQUIRE(prof.size() == 2);
  CHECK(prof[0].distance == 0.0);
  // linear drift + shared noise: the quotient is the exact Euler decay factor
  CHECK(prof[0].norm == doctest::Approx(std::pow(1.0 - mc.dt, 500)).epsilon(1e-9));
  CHECK_FALSE(prof[0].inconclusive);
  CHECK(prof[1].distance == 1.0);
  CHECK(prof[1].norm == 0.0);
  CHECK(prof[1].stderr_ == 0.0);
}

TEST_CASE("second-order decoupled profile vanishes on linear observables") {
  LatticeModel m = ou_chain(1, 1.0);
  CylinderFn f = site_fn(m, 1, Polynomial::variable(1, 0));
  Configuration w0{{{0.3}, {-0.2}, {0.1}}};
  LatticeMcParams mc;
  mc.paths = 200;
  mc.dt = 1e-3;
  auto prof = derivative_profile(m, f, 0.3, 2, {{1, 1}, {1, 2}}, w0, mc);
  REQUIRE(prof.size() == 2);
  // P_t of a linear function stays linear, so all second derivatives vanish
  CHECK(prof[0].norm < 1e-8);
  CHECK(prof[1].norm < 1e-12);
  CHECK(prof[1].distance == 1.0);
}

TEST_CASE("regression recovers a synthetic propagation profile exactly") {
  std::vector<ProfileEntry> entries;
  for (double t : {0.3, 0.6})
    for (int d = 0; d <= 4; ++d) {
      ProfileEntry e;
      e.t = t;
      e.distance = d;
      e.norm = std::exp(1.0 + 2.0 * t - 0.7 * d);
      e.stderr_ = 1e-6;
      entries.push_back(e);
    }
  FspFit fit = fsp_fit(entries);
  REQUIRE(fit.ok);
  CHECK(fit.env.B == doctest::Approx(std::exp(1.0)).epsilon(1e-8));
  CHECK(fit.env.c == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(fit.env.v == doctest::Approx(0.7).epsilon(1e-8));
  CHECK(fit.r2 == doctest::Approx(1.0));
  CHECK(fit.env.provenance == "fitted");

  // single measurement time: the time column is dropped and v still recovered
  std::vector<ProfileEntry> single;
  for (int d = 0; d <= 4; ++d) {
    ProfileEntry e;
    e.t = 0.5;
    e.distance = d;
    e.norm = std::exp(0.3 - 1.1 * d);
    single.push_back(e);
  }
  FspFit sf = fsp_fit(single);
  REQUIRE(sf.ok);
  CHECK(sf.env.v == doctest::Approx(1.1).epsilon(1e-9));
  CHECK(sf.env.c == 0.0);
  CHECK(sf.r2 == doctest::Approx(1.0));
}

TEST_CASE("regression refuses degenerate or growing profiles") {
  std::vector<ProfileEntry> few;
  for (int d = 0; d <= 2; ++d) {
    ProfileEntry e;
    e.t = 0.5;
    e.distance = d;
    e.norm = std::exp(-0.5 * d);
    few.push_back(e);
  }
  CHECK_FALSE(fsp_fit(few).ok); // only 3 distinct distances
  std::vector<ProfileEntry> growing;
  for (double t : {0.3, 0.6})
    for (int d = 0; d <= 4; ++d) {
      ProfileEntry e;
      e.t = t;
      e.distance = d;
      e.norm = std::exp(0.5 * d);
      growing.push_back(e);
    }
  FspFit g = fsp_fit(growing);
  CHECK_FALSE(g.ok);
  CHECK(g.diagnostic.find("non-negative") != std::string::npos);
}

TEST_CASE("nested decoupled volumes agree exactly under shared noise") {
  std::vector<LatticeModel> family;
  for (int r = 1; r <= 3; ++r) family.push_back(ou_chain(r, 1.0));
  CylinderFn f;
  f.support = {{0}};
  f.p = Polynomial::variable(1, 0);
  std::vector<std::function<std::vector<double>(const std::vector<int>&)>> samples = {
      [](const std::vector<int>&) { return std::vector<double>{0.5}; },
      [](const std::vector<int>& c) { return std::vector<double>{0.1 * c[0]}; }};
  LatticeMcParams mc;
  mc.paths = 200;
  mc.dt = 2e-3;
  VolumeResult vr = volume_convergence(family, f, 0.4, samples, mc);
  REQUIRE(vr.sup_diff.size() == 2);
  CHECK(vr.sup_diff[0] == 0.0);
  CHECK(vr.sup_diff[1] == 0.0);
  CHECK(vr.ratios.empty());
  CHECK(vr.mean_ratio == 0.0);
}

TEST_CASE("condition checker separates compliant and violating models") {
  // per-site chain from the two-variable model with Z0 = [1;0], B = [0;x1]
  VectorField Z0 = parse_vector_field("[1; 0]");
  VectorField B = parse_vector_field("[0; x1]");
  ChainResult chain = generate_chain(Z0, B, 5);
  REQUIRE(chain.closed);
  verify_cri(chain);

  LatticeModel compliant = make_chain(1, 2, chain.chain, 1);
  for (int x = 0; x < 3; ++x)
    compliant.q[x][1] = Polynomial::constant(compliant.nvars(), Rational(1, 4));
  ConditionReport ok = smoothing_conditions_check(compliant, chain);
  CHECK(ok.all_core());
  CHECK(ok.si1);
  CHECK(ok.q_diagonal);

  // q_1 depending on a coordinate that Z_0 moves breaks the triangular rule
  LatticeModel bad1 = make_chain(1, 2, chain.chain, 1);
  bad1.q[0][1] = Polynomial::variable(bad1.nvars(), bad1.var(1, 0));
  ConditionReport r1 = smoothing_conditions_check(bad1, chain);
  CHECK_FALSE(r1.si1);
  CHECK_FALSE(r1.all_core());
  CHECK_FALSE(r1.violations.empty());

  // doctored structure constants: c_{102} != 0 with k = 2 > i = 1
  ChainResult doctored = chain;
  doctored.constants.N = 2;
  doctored.constants.c_ij[{1, 0}] = {Rational(0), Rational(0), Rational(1)};
  LatticeModel m3 = make_chain(1, 2, chain.chain, 1);
  ConditionReport r3 = smoothing_conditions_check(m3, doctored);
  CHECK_FALSE(r3.si3);
  CHECK(r3.si1);
  CHECK_FALSE(r3.all_core());
}

TEST_CASE("site Lyapunov certification reproduces the analytic constant") {
  LatticeModel m = ou_chain(0, 1.0);
  auto rho = [](const std::vector<double>& u) { return std::sqrt(1.0 + u[0] * u[0]); };
  // L rho + rho = 1/rho^3 + 1/rho, maximal value 2 at u = 0
  const double C1 = certify_site_lyapunov(m, rho, 1.0, 40.0, 40001);
  CHECK(C1 == doctest::Approx(2.0).epsilon(1e-4));
  // with C2 = 3 the maximum escapes to the window edge
  CHECK_THROWS(certify_site_lyapunov(m, rho, 3.0, 5.0, 2001));
}

TEST_CASE("weighted-sum validation accepts the geometric weights and rejects tight C4") {
  LatticeModel m = ou_chain(2, 1.0);
  const double theta = 0.2;
  LyapunovSpec spec;
  spec.rho = [](const std::vector<double>& u) { return std::sqrt(1.0 + u[0] * u[0]); };
  spec.C1 = 2.0;
  spec.C2 = 1.0;
  spec.C3 = 0.0;
  spec.C4 = 2.5 * theta;
  const int ns = m.nsites();
  spec.eta.assign(ns, std::vector<double>(ns, 0.0));
  for (int x = 0; x < ns; ++x)
    for (int y = 0; y < ns; ++y)
      if (m.distance(x, y) == 1) spec.eta[x][y] = theta;
  spec.S_sup = 2.0 * theta;
  for (int x = 0; x < ns; ++x)
    spec.weights.push_back(std::pow(2.0, -std::abs(m.sites[x][0])));
  CHECK_NOTHROW(validate_lyapunov_spec(m, spec));
  LyapunovSpec tight = spec;
  tight.C4 = 2.4 * theta;
  CHECK_THROWS(validate_lyapunov_spec(m, tight));
  LyapunovSpec under = spec;
  under.S_sup = theta; // below the true row-sum supremum
  CHECK_THROWS(validate_lyapunov_spec(m, under));
}

TEST_CASE("coupled chain stays under the uniform Lyapunov bound") {
  const double theta = 0.2;
  LatticeModel m = ou_chain(1, 1.0);
  add_nn_coupling(m, Rational(1, 5));
  LyapunovSpec spec;
  spec.rho = [](const std::vector<double>& u) { return std::sqrt(1.0 + u[0] * u[0]); };
  spec.C1 = 2.0;
  spec.C2 = 1.0;
  spec.C3 = 0.0;
  spec.C4 = 2.5 * theta;
  const int ns = m.nsites();
  spec.eta.assign(ns, std::vector<double>(ns, 0.0));
  for (int x = 0; x < ns; ++x)
    for (int y = 0; y < ns; ++y)
      if (m.distance(x, y) == 1) spec.eta[x][y] = theta;
  spec.S_sup = 2.0 * theta;
  for (int x = 0; x < ns; ++x)
    spec.weights.push_back(std::pow(2.0, -std::abs(m.sites[x][0])));
  Configuration w0{{{1.0}, {-1.0}, {0.5}}};
  LatticeMcParams mc;
  mc.paths = 400;
  mc.dt = 2e-3;
  auto drift = lyapunov_drift(m, spec, w0, {1.0, 2.0}, mc);
  REQUIRE(drift.size() == 2);
  for (const LyapunovPoint& p : drift) {
    CHECK_FALSE(p.violated);
    CHECK(p.F - 3.0 * p.stderr_ <= p.bound);
  }
  auto probs = tightness_probe(drift, {drift[0].bound * 2, drift[0].bound * 10});
  CHECK(probs[0] == doctest::Approx(0.5));
  CHECK(probs[1] == doctest::Approx(0.9));
  CHECK(tightness_probe(drift, {drift[0].bound / 2})[0] == 0.0);
}

TEST_CASE("ergodic contraction recovers the exact OU rate") {
  LatticeModel m = ou_chain(0, 2.0);
  CylinderFn f = site_fn(m, 0, Polynomial::variable(1, 0));
  LatticeMcParams mc;
  mc.paths = 50;
  mc.dt = 1e-3;
  ErgodicResult r = ergodic_contraction(m, f, Configuration{{{2.0}}}, Configuration{{{-2.0}}},
                                        {0.25, 0.5, 0.75, 1.0}, mc);
  REQUIRE_FALSE(r.inconclusive);
  // linear drift: the coupled difference is deterministic, 4 e^{-2t}
  for (const ErgodicPoint& p : r.points) CHECK(p.stderr_ < 1e-12);
  CHECK(r.fitted_rate == doctest::Approx(2.0).epsilon(0.01));

  ErgodicResult same = ergodic_contraction(m, f, Configuration{{{1.0}}}, Configuration{{{1.0}}},
                                           {0.25, 0.5}, mc);
  CHECK(same.inconclusive);
}
