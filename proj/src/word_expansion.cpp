#include "hypo/word_expansion.hpp"

#include <stdexcept>

namespace hypo {

WordCombo word_commutator_with_B(const OperatorWord& word, int N) {
  WordCombo out;
  for (int j = 0; j < word.length(); ++j) {
    if (word.indices[j] == N) continue;
    OperatorWord w = word;
    w.indices[j] += 1;
    out[w] += Rational(-1);
  }
  for (auto it = out.begin(); it != out.end();)
    it = it->second == 0 ? out.erase(it) : std::next(it);
  return out;
}

namespace {

// Accumulate coef * (prefix .. Z_0 .. rest) into canonical Z_0-prefixed form,
// commuting Z_0 leftward through the prefix with [Z_0, Z_p] = sum_h c_{0ph} Z_h.
void push_z0_left(std::vector<int> prefix, std::vector<int> rest, const Rational& coef,
                  const StructureConstants& sc, Z0sqExpansion& out) {
  while (true) {
    if (prefix.empty()) {
      OperatorWord w{std::move(rest)};
      out.eta[w] += coef;
      return;
    }
    const int p = prefix.back();
    prefix.pop_back();
    // Z_p Z_0 = Z_0 Z_p - [Z_0, Z_p]
    for (int h = 0; h <= sc.N; ++h) {
      const Rational c = sc.c0(p, h);
      if (c == 0) continue;
      std::vector<int> w = prefix;
      w.push_back(h);
      w.insert(w.end(), rest.begin(), rest.end());
      out.zeta[OperatorWord{std::move(w)}] += -coef * c;
    }
    rest.insert(rest.begin(), p);
  }
}

} // namespace

Z0sqExpansion word_commutator_with_Z0sq(const OperatorWord& word, const StructureConstants& sc) {
  Z0sqExpansion out;
  const int n = word.length();
  for (int j = 0; j < n; ++j) {
    const int kj = word.indices[j];
    std::vector<int> prefix(word.indices.begin(), word.indices.begin() + j);
    std::vector<int> suffix(word.indices.begin() + j + 1, word.indices.end());
    // [Z_kj, Z_0^2] = -2 sum_l c_{0,kj,l} Z_0 Z_l + sum_h gamma_{kj,h} Z_h,
    // gamma_{kj,h} = sum_l c_{0,kj,l} c_{0,l,h}.
    for (int l = 0; l <= sc.N; ++l) {
      const Rational cl = sc.c0(kj, l);
      if (cl == 0) continue;
      std::vector<int> rest;
      rest.push_back(l);
      rest.insert(rest.end(), suffix.begin(), suffix.end());
      push_z0_left(prefix, rest, Rational(-2) * cl, sc, out);
      for (int h = 0; h <= sc.N; ++h) {
        const Rational ch = sc.c0(l, h);
        if (ch == 0) continue;
        std::vector<int> w = prefix;
        w.push_back(h);
        w.insert(w.end(), suffix.begin(), suffix.end());
        out.zeta[OperatorWord{std::move(w)}] += cl * ch;
      }
    }
  }
  for (auto* m : {&out.eta, &out.zeta})
    for (auto it = m->begin(); it != m->end();)
      it = it->second == 0 ? m->erase(it) : std::next(it);
  const int bound = word.weight() - 1;
  for (const auto* m : {&out.eta, &out.zeta})
    for (const auto& [w, c] : *m)
      if (!(w.weight() < bound))
        throw std::logic_error("word-commutator expansion emitted a word of weight >= |k|-1");
  return out;
}

Polynomial apply_word(const std::vector<VectorField>& chain, const OperatorWord& word,
                      const Polynomial& g) {
  Polynomial r = g;
  for (int j = word.length() - 1; j >= 0; --j) r = chain[word.indices[j]].apply(r);
  return r;
}

Polynomial apply_combo(const std::vector<VectorField>& chain, const WordCombo& combo,
                       const Polynomial& g) {
  Polynomial r(g.dimension());
  for (const auto& [w, c] : combo) r = r + apply_word(chain, w, g) * c;
  return r;
}

} // namespace hypo
