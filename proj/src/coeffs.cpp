#include "hypo/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hypo {

std::vector<WordKey> all_words(int l, int N) {
  std::vector<WordKey> out;
  WordKey w(l, 0);
  for (;;) {
    out.push_back(w);
    int i = l - 1;
    while (i >= 0 && w[i] == N) w[i--] = 0;
    if (i < 0) break;
    w[i]++;
  }
  if (l == 0) out = {WordKey{}};
  return out;
}

double CoefficientTable::a_at(int l, const WordKey& k) const {
  auto it = a[l - 1].find(k);
  if (it == a[l - 1].end()) throw std::out_of_range("missing a coefficient");
  return it->second;
}

double CoefficientTable::b_at(int l, const WordKey& k) const {
  if (k.empty() || k[0] < 1 || k[0] > N) return 0.0;
  auto it = b[l - 1].find(k);
  return it == b[l - 1].end() ? 0.0 : it->second; // absent entries read as 0
}

namespace {

// One schedule pass for a single level l with given (C, C').
void assign_level(CoefficientTable& t, int l, double C, double Cp) {
  t.a[l - 1].clear();
  t.b[l - 1].clear();
  const int N = t.N;
  for (int k1 = N; k1 >= 0; --k1) {
    for (const WordKey& tail : all_words(l - 1, N)) {
      WordKey k;
      k.push_back(k1);
      k.insert(k.end(), tail.begin(), tail.end());
      WordKey kp = k; // k + e_1
      kp[0] += 1;
      const double b_up = t.b_at(l, kp);
      t.a[l - 1][k] = 2.0 * (C * b_up * b_up + Cp);
      if (k1 >= 1) {
        double mx = std::max(t.a[l - 1][k], b_up);
        if (kp[0] <= N)
          for (int j = 1; j < l; ++j) {
            if (k[j] < 1) continue;
            WordKey kj = kp;
            kj[j] -= 1;
            mx = std::max(mx, t.b_at(l, kj));
          }
        t.b[l - 1][k] = C * mx * mx + Cp;
      }
    }
  }
}

} // namespace

DissipativityReport verify(const CoefficientTable& t) {
  DissipativityReport rep;
  rep.B_values.resize(t.n);
  rep.A_values.resize(t.n);
  rep.cond1_ok = true;
  rep.epsilon_ok = true;
  std::ostringstream diag;
  for (int l = 1; l <= t.n; ++l) {
    const int N = t.N;
    const double eps = t.level_epsilon(l);
    if (eps * l * (2 * N + 1) >= 1.0) rep.epsilon_ok = false;
    const double front = 0.5 * (1.0 - eps * l * (2 * N + 1));
    for (const WordKey& k : all_words(l, N)) {
      WordKey kp = k;
      kp[0] += 1;
      const double a_k = t.a_at(l, k);
      const double b_up = t.b_at(l, kp);
      // cond.1: a_k/2 > b_{k+e1}^2 + 1, strict
      if (!(a_k / 2.0 > b_up * b_up + 1.0)) {
        rep.cond1_ok = false;
        diag << "cond.1 fails at level " << l << "\n";
      }
      if (k[0] >= 1) {
        const double b_k = t.b_at(l, k);
        double cross = 0.0;
        for (int j = 1; j < l; ++j) {
          if (k[j] == N || k[j] < 1) continue;
          WordKey kj = kp;
          kj[j] -= 1;
          cross += t.b_at(l, kj);
        }
        const double B = -front * b_k + (2.0 * l * N + l) * (a_k + b_up / eps) + a_k * a_k +
                         double(l) * l + 0.5 * (l - 1) * cross + 0.5 * b_up * b_up +
                         0.5 * double(l) * l;
        rep.B_values[l - 1][k] = B;
        rep.worst_B = std::max(rep.worst_B, B);
        rep.min_neg_margin = std::min(rep.min_neg_margin, -B);
      }
    }
    for (const WordKey& tail : all_words(l - 1, N)) {
      WordKey k0, k1;
      k0.push_back(0);
      k1.push_back(1);
      k0.insert(k0.end(), tail.begin(), tail.end());
      k1.insert(k1.end(), tail.begin(), tail.end());
      const double a0 = t.a_at(l, k0);
      const double b1 = N >= 1 ? t.b_at(l, k1) : 0.0;
      const double A = (2.0 * l * N + l) * (a0 + 0.5 * eps * b1) + a0 * a0 + double(l) * l +
                       0.5 * b1 * b1;
      rep.A_values[l - 1][tail] = A;
      rep.max_A = std::max(rep.max_A, A);
    }
  }
  rep.pass = rep.cond1_ok && rep.epsilon_ok && rep.worst_B < 0.0;
  rep.diagnostic = diag.str();
  return rep;
}

CoefficientTable synthesize(int n, int N, double C, double Cprime) {
  if (n < 1 || N < 1 || C < 1 || Cprime < 1)
    throw std::invalid_argument("synthesize requires n,N >= 1 and C,C' >= 1");
  CoefficientTable t;
  t.n = n;
  t.N = N;
  t.a.resize(n);
  t.b.resize(n);
  t.epsilon = 1.0 / (2.0 * n * (2 * N + 1));
  double c = C, cp = Cprime;
  DissipativityReport rep;
  for (int round = 0; round < 60; ++round) {
    for (int l = 1; l <= n; ++l) assign_level(t, l, c, cp);
    t.C = c;
    t.Cprime = cp;
    rep = verify(t);
    if (rep.pass) {
      // Inductive offset constants: level-0 negative margin is the 2*d_0
      // dissipation coefficient; each level's max script-A is divided by the
      // margin below it.
      t.d_levels.assign(1, 1.0);
      t.varsigma.clear();
      double margin_below = 2.0; // 2*d_0
      for (int l = 1; l <= n; ++l) {
        double maxA = 0.0;
        for (const auto& [k, v] : rep.A_values[l - 1]) maxA = std::max(maxA, v);
        double minB = 1e300;
        for (const auto& [k, v] : rep.B_values[l - 1]) minB = std::min(minB, -v);
        const double sigma = std::max(1.0, 2.0 * maxA / margin_below);
        t.varsigma.push_back(sigma);
        t.d_levels.push_back(t.d_levels.back() * sigma);
        margin_below = minB;
      }
      return t;
    }
    cp *= 2.0;
    if (round % 2 == 1) c *= 2.0; // C'-escalation alone cannot beat the a^2 term
  }
  throw std::runtime_error("synthesize escalation exhausted (bug sentinel): worst B = " +
                           std::to_string(rep.worst_B));
}

double comparability(const CoefficientTable& t) {
  double bar_d = 1e300;
  for (const WordKey& k : all_words(t.n, t.N)) {
    WordKey kp = k;
    kp[0] += 1;
    const double a_k = t.a_at(t.n, k);
    const double b_up = t.b_at(t.n, kp);
    const double num = a_k - b_up * b_up - (k[0] >= 1 ? 1.0 : 0.0);
    if (num <= 0.0) {
      std::ostringstream os;
      os << "comparability numerator non-positive at word (";
      for (size_t i = 0; i < k.size(); ++i) os << (i ? "," : "") << k[i];
      os << ")";
      throw std::runtime_error(os.str());
    }
    bar_d = std::min(bar_d, num / a_k);
  }
  return bar_d;
}

std::pair<double, double> evaluate_gamma(const CoefficientTable& tab,
                                         const std::map<WordKey, double>& derivs, double t) {
  const int n = tab.n;
  double bar = 0.0, cross = 0.0;
  for (const WordKey& k : all_words(n, tab.N)) {
    auto it = derivs.find(k);
    if (it == derivs.end()) throw std::invalid_argument("missing derivative value");
    int wt = 0;
    for (int x : k) wt += x;
    const double v = it->second;
    bar += tab.a_at(n, k) * std::pow(t, 2 * wt + n) * v * v;
    if (k[0] >= 1) {
      WordKey km = k;
      km[0] -= 1;
      auto jt = derivs.find(km);
      if (jt == derivs.end()) throw std::invalid_argument("missing derivative value");
      cross += tab.b_at(n, k) * std::pow(t, 2 * wt + n - 1) * jt->second * v;
    }
  }
  return {bar, bar + cross};
}

std::string serialize_table(const CoefficientTable& t) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "n=" << t.n << ",N=" << t.N << ",eps=" << num(t.epsilon) << ",C=" << num(t.C)
     << ",Cprime=" << num(t.Cprime) << "\n";
  for (int l = 1; l <= t.n; ++l) {
    for (const auto& [k, v] : t.a[l - 1]) {
      os << "a";
      for (int x : k) os << " " << x;
      os << " = " << num(v) << "\n";
    }
    for (const auto& [k, v] : t.b[l - 1]) {
      os << "b";
      for (int x : k) os << " " << x;
      os << " = " << num(v) << "\n";
    }
  }
  for (size_t l = 0; l < t.d_levels.size(); ++l)
    os << "d " << l << " = " << num(t.d_levels[l]) << "\n";
  for (size_t l = 0; l < t.varsigma.size(); ++l)
    os << "varsigma " << (l + 1) << " = " << num(t.varsigma[l]) << "\n";
  return os.str();
}

CoefficientTable parse_table(const std::string& text) {
  CoefficientTable t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty table");
  {
    std::map<std::string, std::string> hdr;
    std::istringstream hs(line);
    std::string kv;
    while (std::getline(hs, kv, ',')) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::runtime_error("bad table header");
      hdr[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    t.n = std::stoi(hdr.at("n"));
    t.N = std::stoi(hdr.at("N"));
    t.epsilon = std::stod(hdr.at("eps"));
    t.C = std::stod(hdr.at("C"));
    t.Cprime = std::stod(hdr.at("Cprime"));
  }
  t.a.resize(t.n);
  t.b.resize(t.n);
  t.d_levels.clear();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) toks.push_back(tok);
    if (toks.size() < 3 || toks[toks.size() - 2] != "=")
      throw std::runtime_error("bad table line: " + line);
    const double v = std::stod(toks.back());
    if (tag == "d") {
      size_t idx = std::stoul(toks[0]);
      if (t.d_levels.size() <= idx) t.d_levels.resize(idx + 1, 0.0);
      t.d_levels[idx] = v;
    } else if (tag == "varsigma") {
      size_t idx = std::stoul(toks[0]);
      if (t.varsigma.size() < idx) t.varsigma.resize(idx, 0.0);
      t.varsigma[idx - 1] = v;
    } else if (tag == "a" || tag == "b") {
      WordKey k;
      for (size_t i = 0; i + 2 < toks.size(); ++i) k.push_back(std::stoi(toks[i]));
      const int l = static_cast<int>(k.size());
      if (l < 1 || l > t.n) throw std::runtime_error("word length out of range: " + line);
      (tag == "a" ? t.a : t.b)[l - 1][k] = v;
    } else {
      throw std::runtime_error("unknown table line tag: " + tag);
    }
  }
  return t;
}

} // namespace hypo
