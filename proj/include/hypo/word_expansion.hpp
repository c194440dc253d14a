#pragma once
#include <map>
#include <vector>

#include "hypo/chain.hpp"
#include "hypo/word.hpp"

namespace hypo {

using WordCombo = std::map<OperatorWord, Rational>; // formal rational combination

// [Z_{k,n}, B] in the c_j = 0 regime: exactly the words k + e_j (coefficient -1)
// for every slot j with k_j != N.
WordCombo word_commutator_with_B(const OperatorWord& word, int N);

// [Z_{k,n}, Z_0^2] expanded against the chain's structure constants:
//   eta:  coefficients of Z_0 * (word of length n)
//   zeta: coefficients of plain words of length n
// Every emitted word w satisfies weight(w) < weight(k) - 1 (asserted).
struct Z0sqExpansion {
  WordCombo eta;
  WordCombo zeta;
};
Z0sqExpansion word_commutator_with_Z0sq(const OperatorWord& word, const StructureConstants& sc);

// Apply Z_{k_1}(...(Z_{k_n} g)) right-to-left.
Polynomial apply_word(const std::vector<VectorField>& chain, const OperatorWord& word,
                      const Polynomial& g);

// Apply a formal combination of words to g.
Polynomial apply_combo(const std::vector<VectorField>& chain, const WordCombo& combo,
                       const Polynomial& g);

} // namespace hypo
