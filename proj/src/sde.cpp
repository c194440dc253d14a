#include "hypo/sde.hpp"

#include <cmath>
#include <stdexcept>

#include "hypo/rng.hpp"

namespace hypo {

namespace {

// Flattened polynomial for fast repeated evaluation inside the path loop.
struct FlatPoly {
  int m = 0;
  std::vector<double> coef;
  std::vector<unsigned> exps; // coef.size() * m, row-major

  explicit FlatPoly(const Polynomial& p) : m(p.dimension()) {
    for (const auto& [e, c] : p.terms()) {
      coef.push_back(to_double(c));
      exps.insert(exps.end(), e.begin(), e.end());
    }
  }
  double eval(const double* x) const {
    double s = 0.0;
    for (size_t t = 0; t < coef.size(); ++t) {
      double term = coef[t];
      const unsigned* e = exps.data() + t * m;
      for (int i = 0; i < m; ++i)
        for (unsigned k = 0; k < e[i]; ++k) term *= x[i];
      s += term;
    }
    return s;
  }
};

// Fixed-order pairwise sum: the reduction tree depends only on the length.
double pairwise_sum(const double* v, size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

} // namespace

ModelOperator ModelOperator::build(const VectorField& Z0, const VectorField& B, int max_depth,
                                   double lambda, std::optional<VectorField> D) {
  ChainResult cr = generate_chain(Z0, B, max_depth);
  if (!cr.closed)
    throw std::runtime_error("operator chain does not close: " + cr.diagnostic);
  verify_cri(cr);

  ModelOperator op;
  op.m = Z0.dimension();
  op.Z_fields = cr.chain;
  op.B = B;
  op.constants = cr.constants;
  op.lambda = lambda;
  op.D = std::move(D);
  if (op.D) {
    // Each chain field must be an eigenvector of ad(D): [Z_a, D] = kappa_a Z_a.
    for (const VectorField& Z : op.Z_fields) {
      const VectorField W = commutator(Z, *op.D);
      Rational kappa(0);
      bool found = false;
      for (int i = 0; i < op.m && !found; ++i)
        if (!Z.component(i).is_zero()) {
          const auto& zt = Z.component(i).terms();
          const auto& wt = W.component(i).terms();
          if (!wt.empty()) {
            auto it = wt.find(zt.begin()->first);
            if (it == wt.end())
              throw std::runtime_error("dilation field does not scale chain field " + Z.str());
            kappa = it->second / zt.begin()->second;
          }
          found = true;
        }
      if (!(W == Z * kappa))
        throw std::runtime_error("dilation field does not scale chain field " + Z.str());
      op.kappa.push_back(kappa);
    }
  }
  return op;
}

Polynomial ModelOperator::apply_L(const Polynomial& g) const {
  const VectorField& Z0 = Z_fields.front();
  Polynomial out = Z0.apply(Z0.apply(g)) + B.apply(g);
  if (D && lambda != 0.0) {
    // lambda is rational in every model we instantiate; require exactness.
    Rational lam(lambda);
    out = out - (D->apply(g) * lam);
  }
  return out;
}

Polynomial SdeSystem::apply_generator(const Polynomial& g) const {
  Polynomial out(m);
  std::vector<Polynomial> grad;
  grad.reserve(m);
  for (int i = 0; i < m; ++i) grad.push_back(g.derivative(i));
  for (int i = 0; i < m; ++i) out = out + drift[i] * grad[i];
  for (const auto& col : diffusion_columns)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) out = out + col[i] * col[j] * grad[i].derivative(j);
  return out;
}

SdeSystem to_sde(const ModelOperator& op) {
  SdeSystem sde;
  sde.m = op.m;
  const VectorField& Z0 = op.Z_fields.front();
  std::vector<Polynomial> col;
  col.reserve(op.m);
  for (int i = 0; i < op.m; ++i) col.push_back(Z0.component(i));
  sde.diffusion_columns.push_back(col);
  for (int i = 0; i < op.m; ++i) {
    // Z_0^2 = sigma sigma^T : grad^2 + (Z_0 sigma) . grad; the first-order
    // remainder joins the drift so the generator matches exactly.
    Polynomial d = op.B.component(i) + Z0.apply(Z0.component(i));
    if (op.D && op.lambda != 0.0) d = d - op.D->component(i) * Rational(op.lambda);
    sde.drift.push_back(d);
  }
  // Generator-match invariant: exact agreement on all monomials of degree <= 3.
  std::vector<ExpVec> mons;
  ExpVec e(op.m, 0);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == op.m) {
      mons.push_back(e);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      e[i] = k;
      rec(i + 1, left - k);
    }
    e[i] = 0;
  };
  rec(0, 3);
  for (const ExpVec& mon : mons) {
    Polynomial g(op.m);
    g.add_term(mon, Rational(1));
    if (!(sde.apply_generator(g) == op.apply_L(g)))
      throw std::logic_error("SDE generator mismatch on monomial " + g.str());
  }
  return sde;
}

McResult mc_expectation(const SdeSystem& sde, const std::function<double(const double*)>& f,
                        const std::vector<double>& x0, double t, long paths, double dt,
                        std::uint64_t seed) {
  if (static_cast<int>(x0.size()) != sde.m) throw std::invalid_argument("x0 dimension mismatch");
  if (paths < 1 || dt <= 0.0 || t < 0.0) throw std::invalid_argument("bad mc parameters");
  const long steps = t > 0.0 ? static_cast<long>(std::ceil(t / dt - 1e-12)) : 0;

  std::vector<FlatPoly> drift;
  for (const Polynomial& p : sde.drift) drift.emplace_back(p);
  std::vector<std::vector<FlatPoly>> cols;
  for (const auto& c : sde.diffusion_columns) {
    std::vector<FlatPoly> fc;
    for (const Polynomial& p : c) fc.emplace_back(p);
    cols.push_back(std::move(fc));
  }

  std::vector<double> vals;
  vals.reserve(paths);
  long bad = 0;
  std::vector<double> x(sde.m), dx(sde.m);
  for (long p = 0; p < paths; ++p) {
    x = x0;
    bool ok = true;
    for (long s = 0; s < steps && ok; ++s) {
      const double h = (s == steps - 1) ? t - s * dt : dt;
      const double sq = std::sqrt(2.0 * h);
      for (int i = 0; i < sde.m; ++i) dx[i] = h * drift[i].eval(x.data());
      for (size_t c = 0; c < cols.size(); ++c) {
        const double xi = normal_draw(seed, p, s, c);
        for (int i = 0; i < sde.m; ++i) dx[i] += sq * xi * cols[c][i].eval(x.data());
      }
      for (int i = 0; i < sde.m; ++i) {
        x[i] += dx[i];
        if (!std::isfinite(x[i])) ok = false;
      }
    }
    const double v = ok ? f(x.data()) : 0.0;
    if (ok && std::isfinite(v))
      vals.push_back(v);
    else
      ++bad;
  }
  if (bad * 1000 > paths)
    throw std::runtime_error("mc_expectation: more than 0.1% of paths diverged");

  McResult r;
  r.bad_paths = bad;
  const size_t n = vals.size();
  r.mean = pairwise_sum(vals.data(), n) / static_cast<double>(n);
  std::vector<double> dev(n);
  for (size_t i = 0; i < n; ++i) dev[i] = (vals[i] - r.mean) * (vals[i] - r.mean);
  if (n > 1)
    r.stderr_ = std::sqrt(pairwise_sum(dev.data(), n) / (static_cast<double>(n - 1) *
                                                         static_cast<double>(n)));
  return r;
}

} // namespace hypo
