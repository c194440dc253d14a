#pragma once
#include <numeric>
#include <vector>

namespace hypo {

// Index tuple k = (k_1,...,k_n) denoting the composition Z_{k_1}...Z_{k_n},
// applied right-to-left: word(f) = Z_{k_1}(Z_{k_2}(...(Z_{k_n} f))).
struct OperatorWord {
  std::vector<int> indices;

  int length() const { return static_cast<int>(indices.size()); }
  int weight() const { return std::accumulate(indices.begin(), indices.end(), 0); }
  int rank() const { return 2 * weight() + length(); }

  bool operator==(const OperatorWord& o) const = default;
  auto operator<=>(const OperatorWord& o) const = default;
};

inline OperatorWord concat(const OperatorWord& a, const OperatorWord& b) {
  OperatorWord r = a;
  r.indices.insert(r.indices.end(), b.indices.begin(), b.indices.end());
  return r;
}

} // namespace hypo
