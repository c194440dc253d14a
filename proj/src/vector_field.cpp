#include "hypo/vector_field.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

namespace hypo {

VectorField::VectorField(std::vector<Polynomial> comps)
    : m_(static_cast<int>(comps.size())), comps_(std::move(comps)) {
  for (const auto& p : comps_)
    if (p.dimension() != m_)
      throw std::invalid_argument("component dimension must equal number of components");
}

bool VectorField::is_zero() const {
  for (const auto& p : comps_)
    if (!p.is_zero()) return false;
  return true;
}

void VectorField::set_component(int i, Polynomial p) {
  if (p.dimension() != m_) throw std::invalid_argument("component dimension mismatch");
  comps_[i] = std::move(p);
}

Polynomial VectorField::apply(const Polynomial& g) const {
  if (g.dimension() != m_) throw std::invalid_argument("dimension mismatch");
  Polynomial r(m_);
  for (int i = 0; i < m_; ++i) r = r + comps_[i] * g.derivative(i);
  return r;
}

VectorField VectorField::operator+(const VectorField& o) const {
  if (m_ != o.m_) throw std::invalid_argument("dimension mismatch");
  VectorField r(m_);
  for (int i = 0; i < m_; ++i) r.comps_[i] = comps_[i] + o.comps_[i];
  return r;
}

VectorField VectorField::operator-(const VectorField& o) const {
  if (m_ != o.m_) throw std::invalid_argument("dimension mismatch");
  VectorField r(m_);
  for (int i = 0; i < m_; ++i) r.comps_[i] = comps_[i] - o.comps_[i];
  return r;
}

VectorField VectorField::operator*(const Rational& c) const {
  VectorField r(m_);
  for (int i = 0; i < m_; ++i) r.comps_[i] = comps_[i] * c;
  return r;
}

std::string VectorField::str() const {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < m_; ++i) {
    if (i) os << "; ";
    os << comps_[i].str();
  }
  os << "]";
  return os.str();
}

VectorField commutator(const VectorField& X, const VectorField& Y) {
  if (X.dimension() != Y.dimension()) throw std::invalid_argument("dimension mismatch");
  const int m = X.dimension();
  VectorField r(m);
  for (int i = 0; i < m; ++i)
    r.set_component(i, X.apply(Y.component(i)) - Y.apply(X.component(i)));
  return r;
}

namespace {

// Recursive-descent parser for the polynomial expression grammar.
class Parser {
public:
  Parser(const std::string& s, int m) : s_(s), m_(m) {}

  Polynomial parse() {
    Polynomial p = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing input");
    return p;
  }

private:
  const std::string& s_;
  int m_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error("parse error at position " + std::to_string(pos_) + ": " + what);
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; }
    return false;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  Polynomial expr() {
    Polynomial p = eat('-') ? -term() : term();
    for (;;) {
      if (eat('+')) p = p + term();
      else if (eat('-')) p = p - term();
      else return p;
    }
  }

  Polynomial term() {
    Polynomial p = factor();
    while (eat('*')) p = p * factor();
    return p;
  }

  Polynomial factor() {
    Polynomial b = base();
    if (eat('^')) {
      unsigned n = uint_lit();
      Polynomial r = Polynomial::constant(m_, 1);
      for (unsigned k = 0; k < n; ++k) r = r * b;
      return r;
    }
    return b;
  }

  Polynomial base() {
    char c = peek();
    if (c == '(') {
      eat('(');
      Polynomial p = expr();
      if (!eat(')')) fail("expected ')'");
      return p;
    }
    if (c == '-') { eat('-'); return -base(); }
    if (c == 'x') {
      ++pos_;
      unsigned i = uint_lit();
      if (i < 1 || static_cast<int>(i) > m_) fail("variable index out of range");
      return Polynomial::variable(m_, static_cast<int>(i) - 1);
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      BigInt num = int_lit();
      if (eat('/')) {
        BigInt den = int_lit();
        if (den == 0) fail("division by zero");
        return Polynomial::constant(m_, Rational(num, den));
      }
      return Polynomial::constant(m_, Rational(num));
    }
    fail("expected number, variable or '('");
  }

  unsigned uint_lit() {
    skip_ws();
    if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) fail("expected integer");
    unsigned v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
      v = v * 10 + static_cast<unsigned>(s_[pos_++] - '0');
    return v;
  }

  BigInt int_lit() {
    skip_ws();
    if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) fail("expected integer");
    BigInt v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
      v = v * 10 + (s_[pos_++] - '0');
    return v;
  }
};

} // namespace

Polynomial parse_polynomial(const std::string& text, int m) { return Parser(text, m).parse(); }

VectorField parse_vector_field(const std::string& text) {
  size_t lb = text.find('[');
  size_t rb = text.rfind(']');
  if (lb == std::string::npos || rb == std::string::npos || rb <= lb)
    throw std::runtime_error("vector field must be bracketed: [p1; ...; pm]");
  std::string body = text.substr(lb + 1, rb - lb - 1);
  std::vector<std::string> parts;
  size_t start = 0, depth = 0;
  for (size_t i = 0; i <= body.size(); ++i) {
    if (i == body.size() || (body[i] == ';' && depth == 0)) {
      parts.push_back(body.substr(start, i - start));
      start = i + 1;
    } else if (body[i] == '(') ++depth;
    else if (body[i] == ')') --depth;
  }
  const int m = static_cast<int>(parts.size());
  std::vector<Polynomial> comps;
  comps.reserve(m);
  for (const auto& part : parts) comps.push_back(parse_polynomial(part, m));
  return VectorField(std::move(comps));
}

} // namespace hypo
