#include "hypo/chain.hpp"

#include <set>
#include <sstream>

namespace hypo {

std::optional<std::vector<Rational>> span_coefficients(const std::vector<VectorField>& fields,
                                                       const VectorField& target) {
  if (fields.empty()) return target.is_zero() ? std::optional<std::vector<Rational>>{std::vector<Rational>{}} : std::nullopt;
  const int m = target.dimension();
  // Row space: one equation per (component, monomial) appearing anywhere.
  std::set<std::pair<int, ExpVec>> keys;
  for (int i = 0; i < m; ++i) {
    for (const auto& [e, c] : target.component(i).terms()) keys.insert({i, e});
    for (const auto& f : fields)
      for (const auto& [e, c] : f.component(i).terms()) keys.insert({i, e});
  }
  std::vector<std::vector<Rational>> A;
  std::vector<Rational> b;
  for (const auto& [i, e] : keys) {
    std::vector<Rational> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      auto it = f.component(i).terms().find(e);
      row.push_back(it == f.component(i).terms().end() ? Rational(0) : it->second);
    }
    auto it = target.component(i).terms().find(e);
    b.push_back(it == target.component(i).terms().end() ? Rational(0) : it->second);
    A.push_back(std::move(row));
  }
  auto sol = solve_exact(std::move(A), std::move(b));
  if (!sol) return std::nullopt;
  // Verify exactly (solve_exact returns some solution of the linear system;
  // reconstruct to guard against any bookkeeping slip).
  VectorField combo(m);
  for (size_t j = 0; j < fields.size(); ++j) combo = combo + fields[j] * (*sol)[j];
  if (!(combo == target)) return std::nullopt;
  return sol;
}

ChainResult generate_chain(const VectorField& Z0, const VectorField& B, int max_depth) {
  ChainResult r;
  r.chain.push_back(Z0);
  for (int depth = 0; depth <= max_depth; ++depth) {
    VectorField next = commutator(B, r.chain.back());
    auto coeffs = span_coefficients(r.chain, next);
    if (coeffs) {
      r.closed = true;
      r.constants.N = static_cast<int>(r.chain.size()) - 1;
      r.constants.c = *coeffs;
      const Rational& cN = r.constants.c.back();
      r.constants.sign_cN = cN == 0 ? 0 : (cN > 0 ? 1 : -1);
      return r;
    }
    r.chain.push_back(next);
  }
  std::ostringstream os;
  os << "chain does not close within max_depth=" << max_depth
     << "; last bracket: " << commutator(B, r.chain.back()).str();
  r.diagnostic = os.str();
  return r;
}

CriReport verify_cri(ChainResult& cr) {
  CriReport rep;
  if (!cr.closed) {
    rep.closure = false;
    rep.failures.push_back("chain not closed: " + cr.diagnostic);
    return rep;
  }
  auto& sc = cr.constants;
  const int N = sc.N;
  for (const Rational& cj : sc.c)
    if (cj != 0) rep.all_zero = false;
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      VectorField br = commutator(cr.chain[i], cr.chain[j]);
      auto coeffs = span_coefficients(cr.chain, br);
      if (!coeffs) {
        rep.closure = false;
        std::ostringstream os;
        os << "[Z_" << i << ",Z_" << j << "] not in span; residual " << br.str();
        rep.failures.push_back(os.str());
        continue;
      }
      sc.c_ij[{i, j}] = *coeffs;
      if (i == 0) {
        for (int h = 0; h <= N; ++h) {
          if ((*coeffs)[h] == 0) continue;
          rep.all_zero = false;
          if (h >= j - 2) {
            rep.lower_triangular_ok = false;
            std::ostringstream os;
            os << "c_{0," << j << "," << h << "} = " << (*coeffs)[h] << " nonzero with h >= j-2";
            rep.failures.push_back(os.str());
          }
        }
      }
    }
  }
  rep.sign_cN = sc.sign_cN;
  sc.commutation_closed = rep.closure;
  sc.lower_triangular_ok = rep.lower_triangular_ok;
  sc.all_zero = rep.all_zero;
  return rep;
}

std::pair<bool, int> hormander_span_check(const std::vector<VectorField>& fields,
                                          const std::vector<Rational>& point,
                                          int max_bracket_depth) {
  if (fields.empty()) return {false, 0};
  const int m = fields[0].dimension();
  std::vector<VectorField> generated = fields;
  std::vector<VectorField> frontier = fields;
  for (int depth = 1; depth <= max_bracket_depth; ++depth) {
    std::vector<VectorField> next;
    for (const auto& f : frontier)
      for (const auto& g : fields) {
        VectorField br = commutator(g, f);
        if (!br.is_zero()) next.push_back(br);
      }
    generated.insert(generated.end(), next.begin(), next.end());
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  std::vector<std::vector<Rational>> rows;
  for (const auto& f : generated) {
    std::vector<Rational> row(m);
    for (int i = 0; i < m; ++i) row[i] = f.component(i).eval(point);
    rows.push_back(std::move(row));
  }
  const int r = rank_exact(std::move(rows));
  return {r == m, r};
}

} // namespace hypo
