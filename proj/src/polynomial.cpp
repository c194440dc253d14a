#include "hypo/polynomial.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hypo {

Polynomial Polynomial::constant(int m, const Rational& c) {
  Polynomial p(m);
  p.add_term(ExpVec(m, 0), c);
  return p;
}

Polynomial Polynomial::variable(int m, int i) {
  if (i < 0 || i >= m) throw std::invalid_argument("variable index out of range");
  Polynomial p(m);
  ExpVec e(m, 0);
  e[i] = 1;
  p.add_term(e, 1);
  return p;
}

void Polynomial::add_term(const ExpVec& e, const Rational& c) {
  if (static_cast<int>(e.size()) != m_) throw std::invalid_argument("exponent length mismatch");
  if (c == 0) return;
  auto it = terms_.find(e);
  if (it == terms_.end()) {
    terms_.emplace(e, c);
  } else {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  if (m_ != o.m_) throw std::invalid_argument("dimension mismatch");
  Polynomial r = *this;
  for (const auto& [e, c] : o.terms_) r.add_term(e, c);
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  if (m_ != o.m_) throw std::invalid_argument("dimension mismatch");
  Polynomial r = *this;
  for (const auto& [e, c] : o.terms_) r.add_term(e, -c);
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  if (m_ != o.m_) throw std::invalid_argument("dimension mismatch");
  Polynomial r(m_);
  for (const auto& [e1, c1] : terms_)
    for (const auto& [e2, c2] : o.terms_) {
      ExpVec e(m_);
      for (int i = 0; i < m_; ++i) e[i] = e1[i] + e2[i];
      r.add_term(e, c1 * c2);
    }
  return r;
}

Polynomial Polynomial::operator*(const Rational& c) const {
  Polynomial r(m_);
  if (c == 0) return r;
  for (const auto& [e, k] : terms_) r.terms_.emplace(e, k * c);
  return r;
}

Polynomial Polynomial::operator-() const { return *this * Rational(-1); }

Polynomial Polynomial::derivative(int i) const {
  Polynomial r(m_);
  for (const auto& [e, c] : terms_) {
    if (e[i] == 0) continue;
    ExpVec d = e;
    d[i] -= 1;
    r.add_term(d, c * Rational(e[i]));
  }
  return r;
}

Rational Polynomial::eval(const std::vector<Rational>& x) const {
  if (static_cast<int>(x.size()) != m_) throw std::invalid_argument("point dimension mismatch");
  Rational s = 0;
  for (const auto& [e, c] : terms_) {
    Rational t = c;
    for (int i = 0; i < m_; ++i)
      for (unsigned k = 0; k < e[i]; ++k) t *= x[i];
    s += t;
  }
  return s;
}

double Polynomial::eval_double(const double* x) const {
  double s = 0.0;
  for (const auto& [e, c] : terms_) {
    double t = to_double(c);
    for (int i = 0; i < m_; ++i)
      for (unsigned k = 0; k < e[i]; ++k) t *= x[i];
    s += t;
  }
  return s;
}

int Polynomial::total_degree() const {
  int d = -1;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (unsigned k : e) s += static_cast<int>(k);
    if (s > d) d = s;
  }
  return d;
}

std::string Polynomial::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c;
    for (int i = 0; i < m_; ++i) {
      if (e[i] == 0) continue;
      os << "*x" << (i + 1);
      if (e[i] > 1) os << "^" << e[i];
    }
  }
  return os.str();
}

} // namespace hypo
