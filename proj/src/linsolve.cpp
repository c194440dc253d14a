#include "hypo/linsolve.hpp"

namespace hypo {

std::optional<std::vector<Rational>> solve_exact(std::vector<std::vector<Rational>> A,
                                                 std::vector<Rational> b) {
  const int rows = static_cast<int>(A.size());
  const int cols = rows ? static_cast<int>(A[0].size()) : 0;
  std::vector<int> pivot_col_of_row(rows, -1);
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int p = -1;
    for (int i = r; i < rows; ++i)
      if (A[i][c] != 0) { p = i; break; }
    if (p < 0) continue;
    std::swap(A[p], A[r]);
    std::swap(b[p], b[r]);
    const Rational inv = Rational(1) / A[r][c];
    for (int j = c; j < cols; ++j) A[r][j] *= inv;
    b[r] *= inv;
    for (int i = 0; i < rows; ++i) {
      if (i == r || A[i][c] == 0) continue;
      const Rational f = A[i][c];
      for (int j = c; j < cols; ++j) A[i][j] -= f * A[r][j];
      b[i] -= f * b[r];
    }
    pivot_col_of_row[r] = c;
    ++r;
  }
  for (int i = r; i < rows; ++i)
    if (b[i] != 0) return std::nullopt; // inconsistent
  std::vector<Rational> x(cols, 0);
  for (int i = 0; i < r; ++i) x[pivot_col_of_row[i]] = b[i];
  return x;
}

int rank_exact(std::vector<std::vector<Rational>> A) {
  const int rows = static_cast<int>(A.size());
  const int cols = rows ? static_cast<int>(A[0].size()) : 0;
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int p = -1;
    for (int i = r; i < rows; ++i)
      if (A[i][c] != 0) { p = i; break; }
    if (p < 0) continue;
    std::swap(A[p], A[r]);
    const Rational inv = Rational(1) / A[r][c];
    for (int j = c; j < cols; ++j) A[r][j] *= inv;
    for (int i = r + 1; i < rows; ++i) {
      if (A[i][c] == 0) continue;
      const Rational f = A[i][c];
      for (int j = c; j < cols; ++j) A[i][j] -= f * A[r][j];
    }
    ++r;
  }
  return r;
}

} // namespace hypo
