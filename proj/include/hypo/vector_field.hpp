#pragma once
#include <string>
#include <vector>

#include "hypo/polynomial.hpp"

namespace hypo {

// First-order operator sum_i p_i(x) d/dx_i with polynomial components.
class VectorField {
public:
  explicit VectorField(int m = 0) : m_(m), comps_(m, Polynomial(m)) {}
  explicit VectorField(std::vector<Polynomial> comps);

  int dimension() const { return m_; }
  bool is_zero() const;
  const Polynomial& component(int i) const { return comps_[i]; }
  void set_component(int i, Polynomial p);

  Polynomial apply(const Polynomial& g) const; // exact Xg
  VectorField operator+(const VectorField& o) const;
  VectorField operator-(const VectorField& o) const;
  VectorField operator*(const Rational& c) const;
  bool operator==(const VectorField& o) const { return m_ == o.m_ && comps_ == o.comps_; }

  std::string str() const; // "[p1; p2; ...; pm]"

private:
  int m_;
  std::vector<Polynomial> comps_;
};

// Exact commutator [X,Y], component i = X(q_i) - Y(p_i).
VectorField commutator(const VectorField& X, const VectorField& Y);

// Parse "[p1; p2; ...; pm]"; polynomials over x1..xm with + - * ^ and
// integer / rational (a/b) literals. Throws std::runtime_error on bad input.
VectorField parse_vector_field(const std::string& text);
Polynomial parse_polynomial(const std::string& text, int m);

} // namespace hypo
