#pragma once
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hypo/chain.hpp"
#include "hypo/vector_field.hpp"

namespace hypo {

// L = Z_0^2 + B - lambda*D with a verified chain Z_0..Z_N.
struct ModelOperator {
  int m = 0;
  std::vector<VectorField> Z_fields; // Z_0..Z_N
  VectorField B;
  StructureConstants constants;
  double lambda = 0.0;
  std::optional<VectorField> D;
  std::vector<Rational> kappa; // kappa_alpha when D is present: [Z_a, D] = kappa_a Z_a

  // Build from Z0 and B (chain generated and verified); throws if the chain
  // does not close or a supplied D violates the dilation relation.
  static ModelOperator build(const VectorField& Z0, const VectorField& B, int max_depth = 8,
                             double lambda = 0.0,
                             std::optional<VectorField> D = std::nullopt);
  // L applied symbolically (exact) -- the oracle for generator matching.
  Polynomial apply_L(const Polynomial& g) const;
};

// dX = drift dt + sqrt(2) * sum_cols sigma_col dW_col
struct SdeSystem {
  int m = 0;
  std::vector<Polynomial> drift;
  std::vector<std::vector<Polynomial>> diffusion_columns; // unscaled sigma; noise carries sqrt(2)

  // Generator applied symbolically: drift.grad + sum_cols sigma sigma^T : grad^2.
  Polynomial apply_generator(const Polynomial& g) const;
};

// Generator-match invariant asserted on all monomials of degree <= 3.
SdeSystem to_sde(const ModelOperator& op);

struct McResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  long bad_paths = 0; // non-finite path values (excluded if < 0.1%)
};

// Euler-Maruyama estimate of P_t f(x0). Per-path noise is a pure function of
// (seed, path-index, step, channel); reduction is a fixed-order pairwise sum.
McResult mc_expectation(const SdeSystem& sde, const std::function<double(const double*)>& f,
                        const std::vector<double>& x0, double t, long paths, double dt,
                        std::uint64_t seed);

} // namespace hypo
