#pragma once
#include <map>
#include <string>
#include <vector>

#include "hypo/rational.hpp"

namespace hypo {

using ExpVec = std::vector<unsigned>; // exponent multi-index, length = dimension

// Sparse multivariate polynomial over exact rationals.
// Invariants: no stored zero coefficients; all keys have length m.
class Polynomial {
public:
  explicit Polynomial(int m = 0) : m_(m) {}
  static Polynomial constant(int m, const Rational& c);
  static Polynomial variable(int m, int i); // x_{i+1}, 0-based index i

  int dimension() const { return m_; }
  bool is_zero() const { return terms_.empty(); }
  const std::map<ExpVec, Rational>& terms() const { return terms_; }

  void add_term(const ExpVec& e, const Rational& c); // accumulates, prunes zeros

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(const Rational& c) const;
  Polynomial operator-() const;
  bool operator==(const Polynomial& o) const { return m_ == o.m_ && terms_ == o.terms_; }

  Polynomial derivative(int i) const;                 // d/dx_{i+1}
  Rational eval(const std::vector<Rational>& x) const;
  double eval_double(const double* x) const;
  int total_degree() const; // -1 for the zero polynomial

  std::string str() const; // canonical text form, monomials in key order

private:
  int m_;
  std::map<ExpVec, Rational> terms_;
};

} // namespace hypo
