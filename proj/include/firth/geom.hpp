#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "firth/rng.hpp"

namespace firth::geom {

// Draws on {1, 2, ...} with P(Y = k) = (1 - beta)^(k-1) beta, by inverse
// CDF: k = ceil(ln u / ln(1 - beta)).
template <class Rng>
std::uint64_t draw_geometric(double beta, Rng& rng) {
  const double ratio = std::log(uniform_open01(rng)) / std::log1p(-beta);
  const double k = std::ceil(ratio);
  return k < 1.0 ? 1 : static_cast<std::uint64_t>(k);
}

std::vector<std::uint64_t> sample_geometric(double beta, std::size_t n, std::uint64_t seed);

// 1 / mean(samples).
double mle_geometric(std::span<const std::uint64_t> samples);
// (N - 1) / (N * mean - 1); needs N >= 2.
double firth_geometric(std::span<const std::uint64_t> samples);

struct ExperimentConfig {
  double beta_star = 0.5;
  std::vector<std::size_t> sample_sizes{4, 8, 16, 32, 64, 128};
  std::size_t trials_per_size = 200000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BiasRow {
  std::size_t n = 0;
  double mean_mle = 0.0;
  double mean_firth = 0.0;
  double bias_mle = 0.0;
  double bias_firth = 0.0;
  double se_mle = 0.0;  // standard error of the mean; NaN for a single trial
  double se_firth = 0.0;
};

struct BiasCurve {
  std::vector<BiasRow> rows;
  // Least-squares slope of log|bias_mle| against log N over all rows.
  double mle_slope = 0.0;
};

// Each (N, trial) pair draws from its own stream seeded by
// derive_seed(derive_seed(seed, "geom", N), "trial", t).
BiasCurve bias_curve(const ExperimentConfig& config);

double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace firth::geom
