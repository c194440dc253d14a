#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hypo/linsolve.hpp"
#include "hypo/vector_field.hpp"

namespace hypo {

// Constant-coefficient structure of a closed chain Z_0..Z_N:
//   [B, Z_N] = sum_j c_j Z_j,   [Z_i, Z_j] = sum_h c_ijh Z_h.
struct StructureConstants {
  int N = 0;
  std::vector<Rational> c;                       // c_j, size N+1
  std::map<std::pair<int, int>, std::vector<Rational>> c_ij; // (i,j) -> c_ijh, size N+1
  bool commutation_closed = false;               // all [Z_i,Z_j] in span
  bool lower_triangular_ok = false;              // c_{0jh} = 0 for h >= j-2
  bool all_zero = false;                         // c_j = 0 and c_{0jh} = 0 (global-horizon regime)
  int sign_cN = 0;                               // -1/0/+1

  Rational c0(int j, int h) const {
    auto it = c_ij.find({0, j});
    return it == c_ij.end() ? Rational(0) : it->second[h];
  }
};

struct ChainResult {
  std::vector<VectorField> chain; // Z_0..Z_N
  StructureConstants constants;
  bool closed = false;
  std::string diagnostic;
};

// Express target as a constant-rational combination of fields; nullopt if not in span.
std::optional<std::vector<Rational>> span_coefficients(const std::vector<VectorField>& fields,
                                                       const VectorField& target);

// Iterate Z_{j+1} = [B, Z_j] until [B, Z_N] lies in span{Z_0..Z_N}; fail past max_depth.
ChainResult generate_chain(const VectorField& Z0, const VectorField& B, int max_depth);

struct CriReport {
  bool closure = true;
  bool lower_triangular_ok = true;  // c_{0jh} = 0 for h >= j-2
  int sign_cN = 0;
  bool all_zero = true;             // c_j = 0 and c_{0jh} = 0 for all j,h
  std::vector<std::string> failures;
};

// Fill c_ijh for all pairs and evaluate the commutation-relation hypotheses.
CriReport verify_cri(ChainResult& chain_result);

// Iterated brackets up to depth, evaluated at a rational point; do they span R^m?
std::pair<bool, int> hormander_span_check(const std::vector<VectorField>& fields,
                                          const std::vector<Rational>& point,
                                          int max_bracket_depth);

} // namespace hypo
