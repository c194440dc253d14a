#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hypo/bounds.hpp"
#include "hypo/chain.hpp"
#include "hypo/vector_field.hpp"

namespace hypo {

// Finite truncation of a lattice of interacting m-dimensional fibers:
//   L = sum_x [ sum_{g in J} Y_g,x^2 + sum_a b_a Y_a,x - lambda D_x ]
//     + sum_{x,a} q_a,x . Y_a,x
//     + sum_{x != y} sum_{g,g' in J} S_gg',xy Y_g,x Y_g',y .
// Fiber variables are flattened site-major: coordinate j of site s is
// variable s*m + j. Coupling coefficients q are polynomials in the flattened
// variables; the second-order couplings S are constants.
struct LatticeModel {
  int d = 1;                            // lattice dimension
  std::vector<std::vector<int>> sites;  // integer coordinates, one per site
  int m = 1;                            // fiber dimension
  std::vector<VectorField> Y;           // site fields on R^m; first nJ form J
  int nJ = 1;
  std::vector<double> b;                // per-alpha first-order drift weights
  double lambda = 0.0;
  std::optional<VectorField> D;         // dilation field on R^m
  int range = 1;                        // interaction range R
  std::vector<std::vector<Polynomial>> q; // q[x][alpha] over nvars(); empty poly = 0
  // S[{x,y}]: nJ x nJ constant coupling block, zero for x == y or dist >= range
  std::map<std::pair<int, int>, std::vector<std::vector<double>>> S;
  double delta = 0.0; // spectral bound: Id + sym(S) >= (1 - delta) Id

  int nsites() const { return static_cast<int>(sites.size()); }
  int nvars() const { return nsites() * m; }
  int var(int site, int j) const { return site * m + j; }
  int distance(int x, int y) const; // L1 distance between site coordinates
  int site_at(const std::vector<int>& coord) const; // -1 if absent
  // Throws if an invariant fails (S diagonal/range support, delta bound,
  // dimensions).
  void validate() const;
  // Exact generator application (the oracle for SDE matching).
  Polynomial apply_generator(const Polynomial& g) const;
};

// Convenience: 1-d chain of sites at coordinates -radius..radius.
LatticeModel make_chain(int radius, int m, std::vector<VectorField> Y, int nJ);

struct Configuration {
  std::vector<std::vector<double>> omega; // per site, m entries
};

// Cylinder function: polynomial over support.size()*m variables, attached to
// the listed site coordinates (so it transfers across nested volumes).
struct CylinderFn {
  Polynomial p;
  std::vector<std::vector<int>> support;
};

struct LatticeSde {
  int nvars = 0, nchannels = 0;
  std::vector<Polynomial> drift;              // per flattened coordinate
  std::vector<std::vector<double>> mixing;    // nchannels x nchannels, = chol(2(Id+sym S))
  std::vector<int> channel_coord;             // flattened coordinate driven by channel
  std::vector<double> channel_scale;          // constant field coefficient
  std::vector<std::uint64_t> channel_key;     // coordinate-derived noise id
  Polynomial apply_generator(const Polynomial& g) const;
};

// Euler-Maruyama realization of the lattice generator. Requires the J fields
// to have constant coefficients (so the noise mixing is state independent);
// throws otherwise, and throws naming delta if Id + sym(S) is not positive
// definite.
LatticeSde build_coupled_sde(const LatticeModel& model);

struct LatticeMcParams {
  std::uint64_t seed = 1;
  long paths = 2000;
  double dt = 1e-3;
};

// Mean and standard error of f(omega_t) over CRN paths started at omega0,
// reported at every t in t_grid (increasing).
struct LatticeMcCurve {
  std::vector<double> t, mean, stderr_;
  long bad_paths = 0;
};
LatticeMcCurve lattice_mc(const LatticeModel& model, const CylinderFn& f,
                          const Configuration& omega0, const std::vector<double>& t_grid,
                          const LatticeMcParams& mc);

struct ProfileEntry {
  std::vector<int> site_tuple; // site indices, size = derivative order
  double distance = 0;         // tree distance to the support of f
  double t = 0;
  double norm = 0;     // sqrt(sum over direction tuples of the squared estimate)
  double stderr_ = 0;
  bool inconclusive = false; // CRN variance exceeded the estimate
};

// Common-random-number finite-difference estimates of |Y_x^{(n)} P_t f| at
// the probe site tuples (n = 1 or 2), perturbing omega0 by h = 1e-3(1+|w_x|).
std::vector<ProfileEntry> derivative_profile(const LatticeModel& model, const CylinderFn& f,
                                             double t, int order,
                                             const std::vector<std::vector<int>>& probes,
                                             const Configuration& omega0,
                                             const LatticeMcParams& mc);

struct FspFit {
  BoundEnvelope env; // provenance "fitted"
  double r2 = 0;
  bool ok = false;
  std::string diagnostic;
};

// log norm ~ log B + c t - v dist regression over usable entries.
FspFit fsp_fit(const std::vector<ProfileEntry>& entries);

struct VolumeResult {
  std::vector<double> sup_diff; // per consecutive pair of volumes
  std::vector<double> ratios;
  double mean_ratio = 0;
};

// CRN-coupled sup_k |P^{k+1}_t f - P^k_t f| over the sample configurations
// (configurations keyed by site coordinate so they restrict to every volume).
VolumeResult volume_convergence(
    const std::vector<LatticeModel>& family, const CylinderFn& f, double t,
    const std::vector<std::function<std::vector<double>(const std::vector<int>&)>>& samples,
    const LatticeMcParams& mc);

struct ConditionReport {
  bool si1 = true;      // Z_i,x q_j,y = 0 for j > i
  bool si2 = true;      // sum_j c_ijk q_j,x = 0 for k > i
  bool si3 = true;      // c_i0k = 0 for k > i
  bool si4 = true;      // sum_k c_i0k c_k0l = 0 for l > i
  bool q_diagonal = true; // Z_i,x q_j,y = 0 for j != i (global-in-time variant)
  bool S_constant = true; // couplings do not depend on the chain directions
  std::vector<std::string> violations;
  bool all_core() const { return si1 && si2 && si3 && si4; }
};

// Symbolic checks of the interaction conditions against the per-site chain
// Z_0..Z_N (model.Y must be that chain; q indexed by chain position).
ConditionReport smoothing_conditions_check(const LatticeModel& model, const ChainResult& chain);

struct LyapunovSpec {
  std::function<double(const std::vector<double>&)> rho; // on one fiber
  double C1 = 0, C2 = 0;                // site drift: L_site rho <= C1 - C2 rho
  std::vector<std::vector<double>> eta; // coupling domination matrix
  double C3 = 0, C4 = 0;
  double S_sup = 0;                     // sup_x sum_y eta_xy
  std::vector<double> weights;          // eps_x > 0
  double kappa_bar() const { return C4 / C2; }
};

// Certify C1 = max over |u| <= window of (L_site rho + C2 rho) on a fine grid
// (m = 1 fibers); throws if the maximum sits in the outer fifth of the window
// (tail not dominated, enlarge the window).
double certify_site_lyapunov(const LatticeModel& model,
                             const std::function<double(const std::vector<double>&)>& rho,
                             double C2, double window = 40.0, int grid = 40001);

// Exact verification of the weighted-sum condition
// sum_x eps_x eta_xy <= C4 eps_y and kappa_bar in (0,1); throws on failure.
void validate_lyapunov_spec(const LatticeModel& model, const LyapunovSpec& spec);

struct LyapunovPoint {
  double t = 0, F = 0, stderr_ = 0, bound = 0;
  bool violated = false; // F - 3 stderr exceeds the bound
};

// Trajectory of F_t = E sum_x eps_x rho(omega_x(t)) against the uniform bound
// (1 - kappa_bar)^{-1} ((C1 + C3) S_sup + F_0).
std::vector<LyapunovPoint> lyapunov_drift(const LatticeModel& model, const LyapunovSpec& spec,
                                          const Configuration& omega0,
                                          const std::vector<double>& t_grid,
                                          const LatticeMcParams& mc);

// Markov lower bounds mu(|sum eps rho| <= L) >= max(0, 1 - bound/L).
std::vector<double> tightness_probe(const std::vector<LyapunovPoint>& drift,
                                    const std::vector<double>& L_list);

struct ErgodicPoint {
  double t = 0, diff = 0, stderr_ = 0;
};
struct ErgodicResult {
  std::vector<ErgodicPoint> points;
  double fitted_rate = 0; // decay exponent of |P_t f(w) - P_t f(w')|
  bool inconclusive = false;
  std::string diagnostic;
};

// CRN-coupled difference of P_t f from two initial configurations, with an
// exponential fit of the resolvable decay.
ErgodicResult ergodic_contraction(const LatticeModel& model, const CylinderFn& f,
                                  const Configuration& omega, const Configuration& omega_prime,
                                  const std::vector<double>& t_grid, const LatticeMcParams& mc);

} // namespace hypo
