#pragma once
#include <map>
#include <string>
#include <vector>

namespace hypo {

using WordKey = std::vector<int>; // (k_1,...,k_l), each in 0..N

// Coefficients of the time-dependent quadratic forms of order n over a chain of
// depth N. Levels 1..n each carry maps a (all words) and b (words with k_1 >= 1).
struct CoefficientTable {
  int n = 0;
  int N = 0;
  double C = 0, Cprime = 0;
  double epsilon = 0;                    // top-level epsilon = 1/(2n(2N+1))
  std::vector<double> d_levels;          // d_0..d_n, d_0 = 1
  std::vector<double> varsigma;          // varsigma[l] for l = 1..n (index l-1)
  std::vector<std::map<WordKey, double>> a; // a[l-1]: words of length l
  std::vector<std::map<WordKey, double>> b; // b[l-1]: words of length l, k_1 >= 1

  double level_epsilon(int l) const { return 1.0 / (2.0 * l * (2 * N + 1)); }
  double a_at(int l, const WordKey& k) const;
  double b_at(int l, const WordKey& k) const; // 0 when k_1 > N or k_1 < 1
};

struct DissipativityReport {
  bool pass = false;
  bool cond1_ok = false;
  bool epsilon_ok = false;
  double worst_B = -1e300;               // max over all levels/words of script-B
  double min_neg_margin = 1e300;         // min over k1>=1 words of -script-B
  std::vector<std::map<WordKey, double>> B_values; // per level, k_1 >= 1 words
  std::vector<std::map<WordKey, double>> A_values; // per level, (k_2..k_l) suffixes
  double max_A = 0;
  std::string diagnostic;
};

// Deterministic assignment schedule + geometric escalation until verify passes.
CoefficientTable synthesize(int n, int N, double C, double Cprime);

DissipativityReport verify(const CoefficientTable& t);

// min over top-level words of (a_k - b_{k+e1}^2 - [k1>=1]) / a_k; throws on
// non-positive numerator (with the offending word named).
double comparability(const CoefficientTable& t);

// Returns {barGamma, Gamma} at time t from supplied word-derivative values.
std::pair<double, double> evaluate_gamma(const CoefficientTable& tab,
                                         const std::map<WordKey, double>& derivs, double t);

std::string serialize_table(const CoefficientTable& t);
CoefficientTable parse_table(const std::string& text);

// Enumerate all words of length l with letters 0..N.
std::vector<WordKey> all_words(int l, int N);

} // namespace hypo
