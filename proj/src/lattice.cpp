#include "hypo/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hypo/rng.hpp"

namespace hypo {

namespace {

double pairwise_sum(const double* v, size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

std::pair<double, double> mean_stderr(const std::vector<double>& vals) {
  const size_t n = vals.size();
  if (n == 0) return {0.0, 0.0};
  const double mean = pairwise_sum(vals.data(), n) / static_cast<double>(n);
  if (n == 1) return {mean, 0.0};
  std::vector<double> sq(n);
  for (size_t i = 0; i < n; ++i) sq[i] = (vals[i] - mean) * (vals[i] - mean);
  const double var = pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

// Lift a fiber-level polynomial (m variables) to the flattened lattice space.
Polynomial lift(const Polynomial& p, int site, int m, int nvars) {
  Polynomial out(nvars);
  for (const auto& [e, c] : p.terms()) {
    ExpVec le(nvars, 0);
    for (int j = 0; j < m; ++j) le[site * m + j] = e[j];
    out.add_term(le, c);
  }
  return out;
}

// Apply the site-x copy of a fiber field to a flattened polynomial.
Polynomial apply_site_field(const VectorField& Y, int site, int m, const Polynomial& g) {
  const int nvars = g.dimension();
  Polynomial out(nvars);
  for (int j = 0; j < m; ++j) {
    const Polynomial& comp = Y.component(j);
    if (comp.is_zero()) continue;
    out = out + lift(comp, site, m, nvars) * g.derivative(site * m + j);
  }
  return out;
}

} // namespace

int LatticeModel::distance(int x, int y) const {
  int s = 0;
  for (int i = 0; i < d; ++i) s += std::abs(sites[x][i] - sites[y][i]);
  return s;
}

int LatticeModel::site_at(const std::vector<int>& coord) const {
  for (int s = 0; s < nsites(); ++s)
    if (sites[s] == coord) return s;
  return -1;
}

void LatticeModel::validate() const {
  if (m < 1 || d < 1 || sites.empty()) throw std::invalid_argument("empty lattice model");
  for (const auto& c : sites)
    if (static_cast<int>(c.size()) != d) throw std::invalid_argument("site coordinate arity");
  if (Y.empty() || nJ < 1 || nJ > static_cast<int>(Y.size()))
    throw std::invalid_argument("need site fields with a nonempty J prefix");
  for (const VectorField& f : Y)
    if (f.dimension() != m) throw std::invalid_argument("site field dimension mismatch");
  if (!b.empty() && b.size() != Y.size())
    throw std::invalid_argument("drift weights must match the field count");
  if (!q.empty() && static_cast<int>(q.size()) != nsites())
    throw std::invalid_argument("q must have one row per site");
  for (const auto& row : q)
    for (const Polynomial& p : row)
      if (!p.is_zero() && p.dimension() != nvars())
        throw std::invalid_argument("q entries live on the flattened variables");
  for (const auto& [key, blk] : S) {
    if (key.first == key.second)
      throw std::invalid_argument("S must vanish on the diagonal");
    if (distance(key.first, key.second) > range)
      throw std::invalid_argument("S must vanish beyond the interaction range");
    if (static_cast<int>(blk.size()) != nJ)
      throw std::invalid_argument("S block shape must be nJ x nJ");
    for (const auto& r : blk)
      if (static_cast<int>(r.size()) != nJ)
        throw std::invalid_argument("S block shape must be nJ x nJ");
  }
}

Polynomial LatticeModel::apply_generator(const Polynomial& g) const {
  if (g.dimension() != nvars()) throw std::invalid_argument("polynomial dimension mismatch");
  Polynomial out(nvars());
  for (int x = 0; x < nsites(); ++x) {
    for (int gm = 0; gm < nJ; ++gm)
      out = out + apply_site_field(Y[gm], x, m, apply_site_field(Y[gm], x, m, g));
    for (size_t a = 0; a < Y.size(); ++a)
      if (!b.empty() && b[a] != 0.0) {
        Polynomial t = apply_site_field(Y[a], x, m, g);
        // scale by the real weight via rational approximation-free path: the
        // weights enter measurements only, so exact rationals are not needed;
        // restrict symbolic use to rational-valued weights.
        out = out + t * Rational(static_cast<long long>(std::llround(b[a] * 1048576)), 1048576);
      }
    if (D && lambda != 0.0)
      out = out - apply_site_field(*D, x, m, g) *
                      Rational(static_cast<long long>(std::llround(lambda * 1048576)), 1048576);
    if (!q.empty())
      for (size_t a = 0; a < q[x].size(); ++a)
        if (!q[x][a].is_zero()) out = out + q[x][a] * apply_site_field(Y[a], x, m, g);
  }
  for (const auto& [key, blk] : S)
    for (int g1 = 0; g1 < nJ; ++g1)
      for (int g2 = 0; g2 < nJ; ++g2)
        if (blk[g1][g2] != 0.0)
          out = out + apply_site_field(Y[g1], key.first, m,
                                       apply_site_field(Y[g2], key.second, m, g)) *
                          Rational(static_cast<long long>(std::llround(blk[g1][g2] * 1048576)),
                                   1048576);
  return out;
}

LatticeModel make_chain(int radius, int m, std::vector<VectorField> Y, int nJ) {
  LatticeModel mod;
  mod.d = 1;
  mod.m = m;
  for (int c = -radius; c <= radius; ++c) mod.sites.push_back({c});
  mod.Y = std::move(Y);
  mod.nJ = nJ;
  mod.q.assign(mod.sites.size(), std::vector<Polynomial>(mod.Y.size(), Polynomial()));
  return mod;
}

Polynomial LatticeSde::apply_generator(const Polynomial& g) const {
  Polynomial out(nvars);
  for (int i = 0; i < nvars; ++i)
    if (!drift[i].is_zero()) out = out + drift[i] * g.derivative(i);
  // second-order part: (M M^T / 2)_{cc'} scale_c scale_c' d_c d_c'
  for (int c1 = 0; c1 < nchannels; ++c1)
    for (int c2 = 0; c2 < nchannels; ++c2) {
      double a = 0.0;
      for (int k = 0; k < nchannels; ++k) a += mixing[c1][k] * mixing[c2][k];
      a *= 0.5 * channel_scale[c1] * channel_scale[c2];
      if (a == 0.0) continue;
      out = out + g.derivative(channel_coord[c1]).derivative(channel_coord[c2]) *
                      Rational(static_cast<long long>(std::llround(a * 1048576)), 1048576);
    }
  return out;
}

LatticeSde build_coupled_sde(const LatticeModel& model) {
  model.validate();
  const int ns = model.nsites(), m = model.m, nJ = model.nJ;
  LatticeSde sde;
  sde.nvars = model.nvars();
  sde.nchannels = ns * nJ;

  // channels require single-coordinate constant J fields (state-independent
  // noise mixing)
  std::vector<int> dir_coord(nJ, -1);
  std::vector<double> dir_scale(nJ, 0.0);
  for (int g = 0; g < nJ; ++g) {
    for (int j = 0; j < m; ++j) {
      const Polynomial& c = model.Y[g].component(j);
      if (c.is_zero()) continue;
      if (c.total_degree() != 0 || dir_coord[g] != -1)
        throw std::runtime_error(
            "coupled SDE requires each J field to be a constant single-coordinate direction");
      dir_coord[g] = j;
      ExpVec zero(m, 0);
      dir_scale[g] = to_double(c.terms().at(zero));
    }
    if (dir_coord[g] == -1) throw std::runtime_error("zero J field");
  }
  sde.channel_coord.resize(sde.nchannels);
  sde.channel_scale.resize(sde.nchannels);
  sde.channel_key.resize(sde.nchannels);
  for (int s = 0; s < ns; ++s)
    for (int g = 0; g < nJ; ++g) {
      const int c = s * nJ + g;
      sde.channel_coord[c] = model.var(s, dir_coord[g]);
      sde.channel_scale[c] = dir_scale[g];
      std::uint64_t k = static_cast<std::uint64_t>(g);
      for (int i = 0; i < model.d; ++i)
        k = k * 2053u + static_cast<std::uint64_t>(model.sites[s][i] + 1000);
      sde.channel_key[c] = k;
    }

  // A = Id + sym(S) over channels; mixing = chol(2A)
  std::vector<std::vector<double>> A(sde.nchannels, std::vector<double>(sde.nchannels, 0.0));
  for (int c = 0; c < sde.nchannels; ++c) A[c][c] = 1.0;
  for (const auto& [key, blk] : model.S)
    for (int g1 = 0; g1 < nJ; ++g1)
      for (int g2 = 0; g2 < nJ; ++g2) {
        const int c1 = key.first * nJ + g1, c2 = key.second * nJ + g2;
        A[c1][c2] += 0.5 * blk[g1][g2];
        A[c2][c1] += 0.5 * blk[g1][g2];
      }
  sde.mixing.assign(sde.nchannels, std::vector<double>(sde.nchannels, 0.0));
  for (int i = 0; i < sde.nchannels; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = 2.0 * A[i][j];
      for (int k = 0; k < j; ++k) s -= sde.mixing[i][k] * sde.mixing[j][k];
      if (i == j) {
        if (s <= 0.0) {
          std::ostringstream os;
          os << "diffusion matrix Id + sym(S) not positive definite at channel " << i
             << " (recorded delta = " << model.delta << ")";
          throw std::runtime_error(os.str());
        }
        sde.mixing[i][i] = std::sqrt(s);
      } else {
        sde.mixing[i][j] = s / sde.mixing[j][j];
      }
    }
  }

  sde.drift.assign(sde.nvars, Polynomial(sde.nvars));
  for (int x = 0; x < ns; ++x)
    for (int j = 0; j < m; ++j) {
      Polynomial dr(m);
      for (int g = 0; g < nJ; ++g) // Ito part of Y_g^2 (zero for constant fields)
        dr = dr + model.Y[g].apply(model.Y[g].component(j));
      for (size_t a = 0; a < model.Y.size(); ++a)
        if (!model.b.empty() && model.b[a] != 0.0)
          dr = dr + model.Y[a].component(j) *
                        Rational(static_cast<long long>(std::llround(model.b[a] * 1048576)),
                                 1048576);
      if (model.D && model.lambda != 0.0)
        dr = dr - model.D->component(j) *
                      Rational(static_cast<long long>(std::llround(model.lambda * 1048576)),
                               1048576);
      Polynomial flat = lift(dr, x, m, sde.nvars);
      if (!model.q.empty())
        for (size_t a = 0; a < model.q[x].size(); ++a)
          if (!model.q[x][a].is_zero() && !model.Y[a].component(j).is_zero())
            flat = flat + model.q[x][a] * lift(model.Y[a].component(j), x, m, sde.nvars);
      sde.drift[model.var(x, j)] = std::move(flat);
    }
  return sde;
}

namespace {

// Compact evaluator for the drift polynomials (hot loop).
struct FlatPoly {
  struct Term {
    double c;
    std::vector<std::pair<int, unsigned>> pows;
  };
  std::vector<Term> terms;

  static FlatPoly from(const Polynomial& p) {
    FlatPoly f;
    for (const auto& [e, c] : p.terms()) {
      Term t;
      t.c = to_double(c);
      for (size_t i = 0; i < e.size(); ++i)
        if (e[i] > 0) t.pows.push_back({static_cast<int>(i), e[i]});
      f.terms.push_back(std::move(t));
    }
    return f;
  }
  double eval(const double* x) const {
    double s = 0.0;
    for (const Term& t : terms) {
      double v = t.c;
      for (const auto& [i, p] : t.pows)
        for (unsigned k = 0; k < p; ++k) v *= x[i];
      s += v;
    }
    return s;
  }
};

struct Simulator {
  const LatticeSde& sde;
  std::vector<FlatPoly> drift;
  std::uint64_t seed;
  double dt;

  Simulator(const LatticeSde& s, const LatticeMcParams& mc) : sde(s), seed(mc.seed), dt(mc.dt) {
    for (const Polynomial& p : sde.drift) drift.push_back(FlatPoly::from(p));
  }

  // Advance all variants through t_grid with shared noise; returns
  // states[variant][t_index][var], or empty on a non-finite excursion.
  std::vector<std::vector<std::vector<double>>> run(
      long path, const std::vector<std::vector<double>>& starts,
      const std::vector<double>& t_grid) const {
    const int nv = sde.nvars, nc = sde.nchannels;
    std::vector<std::vector<double>> state = starts;
    std::vector<std::vector<std::vector<double>>> out(
        starts.size(), std::vector<std::vector<double>>());
    std::vector<double> xi(nc), mixed(nv), dr(nv);
    double t_cur = 0.0;
    std::uint64_t step_counter = 0;
    for (double tk : t_grid) {
      double remaining = tk - t_cur;
      while (remaining > 1e-15) {
        const double h = std::min(dt, remaining);
        const double sh = std::sqrt(h);
        for (int c = 0; c < nc; ++c)
          xi[c] = normal_draw(seed, static_cast<std::uint64_t>(path), step_counter,
                              sde.channel_key[c]);
        std::fill(mixed.begin(), mixed.end(), 0.0);
        for (int c = 0; c < nc; ++c) {
          double s = 0.0;
          for (int k = 0; k <= c; ++k) s += sde.mixing[c][k] * xi[k];
          mixed[sde.channel_coord[c]] += sde.channel_scale[c] * s * sh;
        }
        for (auto& st : state) {
          for (int i = 0; i < nv; ++i) dr[i] = drift[i].eval(st.data());
          for (int i = 0; i < nv; ++i) st[i] += dr[i] * h + mixed[i];
        }
        ++step_counter;
        remaining -= h;
      }
      t_cur = tk;
      for (size_t v = 0; v < state.size(); ++v) {
        for (double x : state[v])
          if (!std::isfinite(x)) return {};
        out[v].push_back(state[v]);
      }
    }
    return out;
  }
};

std::vector<double> flatten(const Configuration& omega, const LatticeModel& model) {
  if (static_cast<int>(omega.omega.size()) != model.nsites())
    throw std::invalid_argument("configuration size mismatch");
  std::vector<double> x;
  for (const auto& site : omega.omega) {
    if (static_cast<int>(site.size()) != model.m)
      throw std::invalid_argument("fiber dimension mismatch");
    for (double v : site) x.push_back(v);
  }
  return x;
}

// Evaluate a cylinder function on a flattened state of the given model.
struct BoundCylinder {
  FlatPoly p;
  std::vector<int> var_map; // cylinder variable -> model variable

  static BoundCylinder bind(const CylinderFn& f, const LatticeModel& model) {
    BoundCylinder b;
    b.p = FlatPoly::from(f.p);
    if (f.p.dimension() != static_cast<int>(f.support.size()) * model.m)
      throw std::invalid_argument("cylinder polynomial dimension != support * m");
    for (const auto& coord : f.support) {
      const int s = model.site_at(coord);
      if (s < 0) throw std::invalid_argument("cylinder support site outside the box");
      for (int j = 0; j < model.m; ++j) b.var_map.push_back(model.var(s, j));
    }
    return b;
  }
  double eval(const std::vector<double>& state) const {
    std::vector<double> local(var_map.size());
    for (size_t i = 0; i < var_map.size(); ++i) local[i] = state[var_map[i]];
    return p.eval(local.data());
  }
};

void check_bad(long bad, long paths) {
  if (bad * 1000 > paths)
    throw std::runtime_error("more than 0.1% of paths left the finite range");
}

} // namespace

LatticeMcCurve lattice_mc(const LatticeModel& model, const CylinderFn& f,
                          const Configuration& omega0, const std::vector<double>& t_grid,
                          const LatticeMcParams& mc) {
  const LatticeSde sde = build_coupled_sde(model);
  const BoundCylinder bf = BoundCylinder::bind(f, model);
  Simulator sim(sde, mc);
  const std::vector<std::vector<double>> starts = {flatten(omega0, model)};
  std::vector<std::vector<double>> vals(t_grid.size());
  long bad = 0;
  for (long p = 0; p < mc.paths; ++p) {
    auto states = sim.run(p, starts, t_grid);
    if (states.empty()) {
      ++bad;
      continue;
    }
    for (size_t ti = 0; ti < t_grid.size(); ++ti) vals[ti].push_back(bf.eval(states[0][ti]));
  }
  check_bad(bad, mc.paths);
  LatticeMcCurve out;
  out.t = t_grid;
  out.bad_paths = bad;
  for (auto& v : vals) {
    auto [m_, se] = mean_stderr(v);
    out.mean.push_back(m_);
    out.stderr_.push_back(se);
  }
  return out;
}

namespace {

// 1-d tree distance: hull length of support+tuple minus hull length of support.
double tree_distance(const LatticeModel& model, const std::vector<int>& tuple,
                     const CylinderFn& f) {
  if (model.d == 1) {
    int lo = 1 << 30, hi = -(1 << 30);
    for (const auto& c : f.support) {
      lo = std::min(lo, c[0]);
      hi = std::max(hi, c[0]);
    }
    int lo2 = lo, hi2 = hi;
    for (int s : tuple) {
      lo2 = std::min(lo2, model.sites[s][0]);
      hi2 = std::max(hi2, model.sites[s][0]);
    }
    return (hi2 - lo2) - (hi - lo);
  }
  double total = 0.0; // fallback: sum of L1 distances to the support
  for (int s : tuple) {
    int best = 1 << 30;
    for (const auto& c : f.support) {
      int d1 = 0;
      for (int i = 0; i < model.d; ++i) d1 += std::abs(model.sites[s][i] - c[i]);
      best = std::min(best, d1);
    }
    total += best;
  }
  return total;
}

} // namespace

std::vector<ProfileEntry> derivative_profile(const LatticeModel& model, const CylinderFn& f,
                                             double t, int order,
                                             const std::vector<std::vector<int>>& probes,
                                             const Configuration& omega0,
                                             const LatticeMcParams& mc) {
  if (order < 1 || order > 2) throw std::invalid_argument("derivative order must be 1 or 2");
  const LatticeSde sde = build_coupled_sde(model);
  const BoundCylinder bf = BoundCylinder::bind(f, model);
  Simulator sim(sde, mc);
  const std::vector<double> base = flatten(omega0, model);
  const std::vector<double> t_grid = {t};
  const int nI = static_cast<int>(model.Y.size());

  std::vector<ProfileEntry> out;
  for (const auto& tuple : probes) {
    if (static_cast<int>(tuple.size()) != order)
      throw std::invalid_argument("probe tuple size must equal the order");
    // perturbation direction per (site, field): Y_a evaluated at omega_x
    auto dir = [&](int site, int a) {
      std::vector<double> v(model.m);
      for (int j = 0; j < model.m; ++j)
        v[j] = model.Y[a].component(j).eval_double(omega0.omega[site].data());
      return v;
    };
    auto hstep = [&](int site) {
      double n2 = 0.0;
      for (double v : omega0.omega[site]) n2 += v * v;
      return 1e-3 * (1.0 + std::sqrt(n2));
    };

    const int combos = order == 1 ? nI : nI * nI;
    std::vector<double> means(combos), errs(combos);
    for (int combo = 0; combo < combos; ++combo) {
      const int a1 = combo % nI, a2 = combo / nI;
      std::vector<std::vector<double>> starts;
      const double h1 = hstep(tuple[0]);
      const double h2 = order == 2 ? hstep(tuple[1]) : 0.0;
      auto shifted = [&](double s1, double s2) {
        std::vector<double> x = base;
        const auto d1 = dir(tuple[0], a1);
        for (int j = 0; j < model.m; ++j) x[model.var(tuple[0], j)] += s1 * d1[j];
        if (order == 2) {
          const auto d2 = dir(tuple[1], a2);
          for (int j = 0; j < model.m; ++j) x[model.var(tuple[1], j)] += s2 * d2[j];
        }
        return x;
      };
      if (order == 1) {
        starts = {shifted(h1, 0), shifted(-h1, 0)};
      } else {
        starts = {shifted(h1, h2), shifted(h1, -h2), shifted(-h1, h2), shifted(-h1, -h2)};
      }
      std::vector<double> quot;
      long bad = 0;
      for (long p = 0; p < mc.paths; ++p) {
        auto st = sim.run(p, starts, t_grid);
        if (st.empty()) {
          ++bad;
          continue;
        }
        if (order == 1)
          quot.push_back((bf.eval(st[0][0]) - bf.eval(st[1][0])) / (2.0 * h1));
        else
          quot.push_back((bf.eval(st[0][0]) - bf.eval(st[1][0]) - bf.eval(st[2][0]) +
                          bf.eval(st[3][0])) /
                         (4.0 * h1 * h2));
      }
      check_bad(bad, mc.paths);
      auto [m_, se] = mean_stderr(quot);
      means[combo] = m_;
      errs[combo] = se;
    }
    ProfileEntry e;
    e.site_tuple = tuple;
    e.distance = tree_distance(model, tuple, f);
    e.t = t;
    double n2 = 0.0, s2 = 0.0;
    for (int c = 0; c < combos; ++c) {
      n2 += means[c] * means[c];
      s2 += errs[c] * errs[c];
    }
    e.norm = std::sqrt(n2);
    e.stderr_ = std::sqrt(s2);
    e.inconclusive = e.stderr_ > e.norm && e.stderr_ > 1e-10;
    out.push_back(std::move(e));
  }
  return out;
}

FspFit fsp_fit(const std::vector<ProfileEntry>& entries) {
  FspFit fit;
  std::vector<double> ts, ds, ys;
  bool far_all_floor = true;
  for (const ProfileEntry& e : entries) {
    if (e.norm < 1e-12 || e.inconclusive) continue;
    if (e.distance >= 1.0) far_all_floor = false;
    ts.push_back(e.t);
    ds.push_back(e.distance);
    ys.push_back(std::log(e.norm));
  }
  std::vector<double> uniq = ds;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < 4) {
    fit.diagnostic = far_all_floor ? "norms at positive distance below noise floor"
                                   : "need at least 4 distinct distances";
    return fit;
  }
  // single-time profiles: drop the c-column (it is collinear with the
  // intercept) and fit log norm = b0 - v d
  const auto [tmin, tmax] = std::minmax_element(ts.begin(), ts.end());
  if (*tmax - *tmin < 1e-12) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(ds.size());
    for (size_t i = 0; i < ds.size(); ++i) {
      sx += ds[i];
      sy += ys[i];
      sxx += ds[i] * ds[i];
      sxy += ds[i] * ys[i];
    }
    const double det = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / det;
    const double b0 = (sy - slope * sx) / n;
    fit.env.B = std::exp(b0);
    fit.env.c = 0.0;
    fit.env.v = -slope;
    fit.env.provenance = "fitted";
    double ss_tot = 0, ss_res = 0;
    const double my = sy / n;
    for (size_t i = 0; i < ds.size(); ++i) {
      const double pred = b0 + slope * ds[i];
      ss_res += (ys[i] - pred) * (ys[i] - pred);
      ss_tot += (ys[i] - my) * (ys[i] - my);
    }
    fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    if (fit.env.v <= 0.0) {
      fit.diagnostic = "non-negative distance slope";
      return fit;
    }
    fit.ok = true;
    return fit;
  }
  // least squares for log norm = b0 + c t - v d
  double a[3][3] = {{0}}, rhs[3] = {0};
  for (size_t i = 0; i < ys.size(); ++i) {
    const double x[3] = {1.0, ts[i], -ds[i]};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a[r][c] += x[r] * x[c];
      rhs[r] += x[r] * ys[i];
    }
  }
  double M[3][4];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) M[r][c] = a[r][c];
    M[r][3] = rhs[r];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
    if (std::abs(M[piv][col]) < 1e-12) {
      fit.diagnostic = "degenerate regression (collinear probe design)";
      return fit;
    }
    std::swap(M[piv], M[col]);
    for (int r = 0; r < 3; ++r)
      if (r != col) {
        const double fct = M[r][col] / M[col][col];
        for (int c = col; c < 4; ++c) M[r][c] -= fct * M[col][c];
      }
  }
  const double b0 = M[0][3] / M[0][0], c = M[1][3] / M[1][1], v = M[2][3] / M[2][2];
  fit.env.B = std::exp(b0);
  fit.env.c = c;
  fit.env.v = v;
  fit.env.provenance = "fitted";
  double my = 0;
  for (double y : ys) my += y;
  my /= static_cast<double>(ys.size());
  double ss_tot = 0, ss_res = 0;
  for (size_t i = 0; i < ys.size(); ++i) {
    const double pred = b0 + c * ts[i] - v * ds[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - my) * (ys[i] - my);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (v <= 0.0) {
    fit.diagnostic = "non-negative distance slope";
    return fit;
  }
  fit.ok = true;
  return fit;
}

VolumeResult volume_convergence(
    const std::vector<LatticeModel>& family, const CylinderFn& f, double t,
    const std::vector<std::function<std::vector<double>(const std::vector<int>&)>>& samples,
    const LatticeMcParams& mc) {
  if (family.size() < 2) throw std::invalid_argument("need at least two nested volumes");
  VolumeResult out;
  // P^k_t f per volume and sample
  std::vector<std::vector<double>> est(family.size(), std::vector<double>(samples.size(), 0.0));
  for (size_t k = 0; k < family.size(); ++k) {
    for (size_t s = 0; s < samples.size(); ++s) {
      Configuration c;
      for (const auto& coord : family[k].sites) c.omega.push_back(samples[s](coord));
      est[k][s] = lattice_mc(family[k], f, c, {t}, mc).mean[0];
    }
  }
  for (size_t k = 0; k + 1 < family.size(); ++k) {
    double sup = 0.0;
    for (size_t s = 0; s < samples.size(); ++s)
      sup = std::max(sup, std::abs(est[k + 1][s] - est[k][s]));
    out.sup_diff.push_back(sup);
  }
  for (size_t k = 0; k + 1 < out.sup_diff.size(); ++k)
    if (out.sup_diff[k] > 1e-14) out.ratios.push_back(out.sup_diff[k + 1] / out.sup_diff[k]);
  if (!out.ratios.empty()) {
    for (double r : out.ratios) out.mean_ratio += r;
    out.mean_ratio /= static_cast<double>(out.ratios.size());
  }
  return out;
}

ConditionReport smoothing_conditions_check(const LatticeModel& model, const ChainResult& chain) {
  ConditionReport rep;
  const int N = chain.constants.N;
  const int nI = static_cast<int>(model.Y.size());
  auto cijk = [&](int i, int j, int k) {
    auto it = chain.constants.c_ij.find({i, j});
    if (it != chain.constants.c_ij.end()) return it->second[k];
    it = chain.constants.c_ij.find({j, i});
    if (it != chain.constants.c_ij.end()) return Rational(-it->second[k]);
    return Rational(0);
  };
  auto qpoly = [&](int x, int j) {
    if (model.q.empty() || j >= static_cast<int>(model.q[x].size())) return Polynomial();
    return model.q[x][j];
  };
  std::ostringstream viol;
  for (int x = 0; x < model.nsites(); ++x) {
    for (int i = 0; i < nI; ++i)
      for (int y = 0; y < model.nsites(); ++y)
        for (int j = 0; j < nI; ++j) {
          const Polynomial qj = qpoly(y, j);
          if (qj.is_zero()) continue;
          if (!apply_site_field(model.Y[i], x, model.m, qj).is_zero()) {
            if (j > i) {
              rep.si1 = false;
              viol << "si1: Z_" << i << " at site " << x << " moves q_" << j << " at site " << y
                   << "; ";
            }
            if (j != i) rep.q_diagonal = false;
          }
        }
    for (int i = 1; i <= N; ++i)
      for (int k = i + 1; k <= N; ++k) {
        Polynomial s;
        for (int j = 1; j <= N; ++j) {
          const Polynomial qj = qpoly(x, j);
          if (!qj.is_zero() && cijk(i, j, k) != Rational(0))
            s = s.dimension() == 0 ? qj * cijk(i, j, k) : s + qj * cijk(i, j, k);
        }
        if (s.dimension() != 0 && !s.is_zero()) {
          rep.si2 = false;
          viol << "si2: sum_j c_" << i << "jk q_j nonzero for k = " << k << " at site " << x
               << "; ";
        }
      }
  }
  for (int i = 1; i <= N; ++i)
    for (int k = i + 1; k <= N; ++k)
      if (cijk(i, 0, k) != Rational(0)) {
        rep.si3 = false;
        viol << "si3: c_" << i << "0" << k << " nonzero; ";
      }
  for (int i = 1; i <= N; ++i)
    for (int l = i + 1; l <= N; ++l) {
      Rational s(0);
      for (int k = 1; k <= N; ++k) s = s + cijk(i, 0, k) * cijk(k, 0, l);
      if (s != Rational(0)) {
        rep.si4 = false;
        viol << "si4: sum_k c_" << i << "0k c_k0" << l << " nonzero for l = " << l << "; ";
      }
    }
  // S entries are stored as constants, so the chain directions cannot move
  // them; recorded as satisfied by construction.
  rep.S_constant = true;
  rep.violations.clear();
  if (!viol.str().empty()) rep.violations.push_back(viol.str());
  return rep;
}

double certify_site_lyapunov(const LatticeModel& model,
                             const std::function<double(const std::vector<double>&)>& rho,
                             double C2, double window, int grid) {
  if (model.m != 1) throw std::invalid_argument("site certification supports m = 1 fibers");
  if (C2 <= 0.0) throw std::invalid_argument("C2 must be positive");
  // site generator on the fiber: sum_g (g^2 rho'' + g g' rho') + drift rho'
  Polynomial drift1(1);
  for (size_t a = 0; a < model.Y.size(); ++a)
    if (!model.b.empty() && model.b[a] != 0.0)
      drift1 = drift1 + model.Y[a].component(0) *
                            Rational(static_cast<long long>(std::llround(model.b[a] * 1048576)),
                                     1048576);
  if (model.D && model.lambda != 0.0)
    drift1 = drift1 - model.D->component(0) *
                          Rational(static_cast<long long>(std::llround(model.lambda * 1048576)),
                                   1048576);
  double best = 0.0;
  int best_idx = 0;
  const double fd = 1e-5;
  for (int i = 0; i < grid; ++i) {
    const double u = -window + 2.0 * window * i / (grid - 1);
    auto r = [&](double x) { return rho(std::vector<double>{x}); };
    const double rp = (r(u + fd) - r(u - fd)) / (2.0 * fd);
    const double rpp = (r(u + fd) - 2.0 * r(u) + r(u - fd)) / (fd * fd);
    double val = 0.0;
    for (int g = 0; g < model.nJ; ++g) {
      const double gc = model.Y[g].component(0).eval_double(&u);
      const double gp = model.Y[g].component(0).derivative(0).eval_double(&u);
      val += gc * gc * rpp + gc * gp * rp;
    }
    val += drift1.eval_double(&u) * rp + C2 * r(u);
    if (i == 0 || val > best) {
      best = val;
      best_idx = i;
    }
  }
  if (best_idx < grid / 5 || best_idx > grid - grid / 5)
    throw std::runtime_error("Lyapunov maximum sits at the window edge; enlarge the window");
  return std::max(best, 0.0);
}

void validate_lyapunov_spec(const LatticeModel& model, const LyapunovSpec& spec) {
  const int ns = model.nsites();
  if (static_cast<int>(spec.weights.size()) != ns ||
      static_cast<int>(spec.eta.size()) != ns)
    throw std::invalid_argument("weights/eta must have one entry per site");
  for (double w : spec.weights)
    if (w <= 0.0) throw std::invalid_argument("weights must be positive");
  if (spec.C2 <= 0.0 || spec.C4 < 0.0) throw std::invalid_argument("need C2 > 0 and C4 >= 0");
  if (!(spec.kappa_bar() < 1.0))
    throw std::invalid_argument("kappa_bar = C4/C2 must lie in (0,1)");
  double s_sup = 0.0;
  for (int x = 0; x < ns; ++x) {
    if (static_cast<int>(spec.eta[x].size()) != ns)
      throw std::invalid_argument("eta must be square");
    double row = 0.0;
    for (int y = 0; y < ns; ++y) {
      if (spec.eta[x][y] < 0.0) throw std::invalid_argument("eta must be non-negative");
      row += spec.eta[x][y];
    }
    s_sup = std::max(s_sup, row);
  }
  if (s_sup > spec.S_sup + 1e-12)
    throw std::invalid_argument("recorded S_sup below the actual row-sum supremum");
  for (int y = 0; y < ns; ++y) {
    double col = 0.0;
    for (int x = 0; x < ns; ++x) col += spec.weights[x] * spec.eta[x][y];
    if (col > spec.C4 * spec.weights[y] + 1e-12)
      throw std::invalid_argument("weighted-sum condition fails at site " + std::to_string(y));
  }
}

std::vector<LyapunovPoint> lyapunov_drift(const LatticeModel& model, const LyapunovSpec& spec,
                                          const Configuration& omega0,
                                          const std::vector<double>& t_grid,
                                          const LatticeMcParams& mc) {
  validate_lyapunov_spec(model, spec);
  const LatticeSde sde = build_coupled_sde(model);
  Simulator sim(sde, mc);
  const std::vector<std::vector<double>> starts = {flatten(omega0, model)};
  auto F_of = [&](const std::vector<double>& state) {
    double s = 0.0;
    for (int x = 0; x < model.nsites(); ++x) {
      std::vector<double> fib(state.begin() + model.var(x, 0),
                              state.begin() + model.var(x, 0) + model.m);
      s += spec.weights[x] * spec.rho(fib);
    }
    return s;
  };
  const double F0 = F_of(starts[0]);
  const double bound = ((spec.C1 + spec.C3) * spec.S_sup + F0) / (1.0 - spec.kappa_bar());

  std::vector<std::vector<double>> vals(t_grid.size());
  long bad = 0;
  for (long p = 0; p < mc.paths; ++p) {
    auto st = sim.run(p, starts, t_grid);
    if (st.empty()) {
      ++bad;
      continue;
    }
    for (size_t ti = 0; ti < t_grid.size(); ++ti) vals[ti].push_back(F_of(st[0][ti]));
  }
  check_bad(bad, mc.paths);
  std::vector<LyapunovPoint> out;
  for (size_t ti = 0; ti < t_grid.size(); ++ti) {
    auto [m_, se] = mean_stderr(vals[ti]);
    LyapunovPoint pt;
    pt.t = t_grid[ti];
    pt.F = m_;
    pt.stderr_ = se;
    pt.bound = bound;
    pt.violated = m_ - 3.0 * se > bound;
    out.push_back(pt);
  }
  return out;
}

std::vector<double> tightness_probe(const std::vector<LyapunovPoint>& drift,
                                    const std::vector<double>& L_list) {
  if (drift.empty()) throw std::invalid_argument("empty drift trajectory");
  const double bound = drift.front().bound;
  std::vector<double> out;
  for (double L : L_list) out.push_back(std::max(0.0, 1.0 - bound / L));
  return out;
}

ErgodicResult ergodic_contraction(const LatticeModel& model, const CylinderFn& f,
                                  const Configuration& omega, const Configuration& omega_prime,
                                  const std::vector<double>& t_grid, const LatticeMcParams& mc) {
  const LatticeSde sde = build_coupled_sde(model);
  const BoundCylinder bf = BoundCylinder::bind(f, model);
  Simulator sim(sde, mc);
  const std::vector<std::vector<double>> starts = {flatten(omega, model),
                                                   flatten(omega_prime, model)};
  std::vector<std::vector<double>> diffs(t_grid.size());
  long bad = 0;
  for (long p = 0; p < mc.paths; ++p) {
    auto st = sim.run(p, starts, t_grid);
    if (st.empty()) {
      ++bad;
      continue;
    }
    for (size_t ti = 0; ti < t_grid.size(); ++ti)
      diffs[ti].push_back(bf.eval(st[0][ti]) - bf.eval(st[1][ti]));
  }
  check_bad(bad, mc.paths);
  ErgodicResult out;
  std::vector<double> ts, ys;
  for (size_t ti = 0; ti < t_grid.size(); ++ti) {
    auto [m_, se] = mean_stderr(diffs[ti]);
    out.points.push_back({t_grid[ti], m_, se});
    if (std::abs(m_) > 3.0 * se && std::abs(m_) > 1e-12) {
      ts.push_back(t_grid[ti]);
      ys.push_back(std::log(std::abs(m_)));
    }
  }
  if (ts.size() < 3) {
    out.inconclusive = true;
    out.diagnostic = "difference below MC noise before the decay is resolvable";
    return out;
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    mx += ts[i];
    my += ys[i];
  }
  mx /= static_cast<double>(ts.size());
  my /= static_cast<double>(ts.size());
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - mx) * (ts[i] - mx);
    sxy += (ts[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) {
    out.inconclusive = true;
    out.diagnostic = "degenerate time grid";
    return out;
  }
  out.fitted_rate = -sxy / sxx;
  return out;
}

} // namespace hypo
