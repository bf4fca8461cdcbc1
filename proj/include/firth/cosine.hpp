#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "firth/model.hpp"

namespace firth {

inline constexpr double kDefaultCosineScale = 10.0;
inline constexpr double kMinNorm = 1e-12;

// Cosine classifier: every one of the J+1 classes carries a weight vector
// (no zero reference, whose direction would be undefined). logit_ij =
// scale * cos(beta_j, x_i).
struct CosineParams {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // (J+1) x d row-major
  double scale = kDefaultCosineScale;

  // Weights uniform in +-sqrt(6 / (d + J + 1)).
  static CosineParams glorot(std::size_t num_classes, std::size_t dim, std::uint64_t seed,
                             double scale = kDefaultCosineScale);

  std::span<double> weight(std::size_t j) { return {weights.data() + j * dim, dim}; }
  std::span<const double> weight(std::size_t j) const { return {weights.data() + j * dim, dim}; }
  std::span<double> flat() noexcept { return weights; }
  std::span<const double> flat() const noexcept { return weights; }
};

// Row-wise unit normalization T(.). Throws DegenerateData on a row with
// norm below kMinNorm.
Matrix normalize_rows(const Matrix& m);

Matrix cosine_logits(const CosineParams& params, const Matrix& x);
ProbMatrix cosine_probs(const CosineParams& params, const Matrix& x);

// mean_i CE(y_i || P_i) + lambda * mean_i KL(U || P_i) on cosine_probs.
double cosine_firth_loss(const CosineParams& params, const FeatureSet& data, double lambda);

// Jacobian block of beta -> beta/|beta| applied to v:
// (1/|beta|) (I - beta beta^T / beta^T beta) v.
std::vector<double> jacobian_block_check(std::span<const double> beta, std::span<const double> v);

}  // namespace firth
