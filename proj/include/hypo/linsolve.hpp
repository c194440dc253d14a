#pragma once
#include <optional>
#include <vector>

#include "hypo/rational.hpp"

namespace hypo {

// Exact Gaussian elimination over the rationals.
// Solves A x = b (rows x cols); returns a solution if one exists (any solution
// when underdetermined), std::nullopt when inconsistent.
std::optional<std::vector<Rational>> solve_exact(std::vector<std::vector<Rational>> A,
                                                 std::vector<Rational> b);

// Rank of a rational matrix.
int rank_exact(std::vector<std::vector<Rational>> A);

} // namespace hypo
