#pragma once

// Hand-rolled generators for the property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "firth/linalg.hpp"
#include "firth/matrix.hpp"
#include "firth/model.hpp"

namespace testgen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  std::uint64_t bits() { return rng_(); }
  std::mt19937_64& engine() { return rng_; }

  firth::Matrix matrix(std::size_t r, std::size_t c, double sd = 1.0) {
    firth::Matrix m(r, c);
    for (double& v : m.values()) v = normal(sd);
    return m;
  }

  // Strictly positive probability row; `spread` controls how peaked it is.
  std::vector<double> prob_row(std::size_t k, double spread = 1.0) {
    std::vector<double> p(k);
    double total = 0.0;
    for (double& v : p) total += (v = std::exp(normal(spread)));
    for (double& v : p) v /= total;
    return p;
  }

  firth::ProbMatrix probs(std::size_t n, std::size_t k, double spread = 1.0) {
    firth::Matrix m(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = prob_row(k, spread);
      for (std::size_t j = 0; j < k; ++j) m(i, j) = row[j];
    }
    return firth::ProbMatrix(std::move(m));
  }

  firth::SymMatrix symmetric(std::size_t n) {
    firth::SymMatrix s = firth::SymMatrix::zeros(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) s.set(i, j, normal());
    return s;
  }

  // B^T B with B of shape rank x n.
  firth::SymMatrix psd(std::size_t n, std::size_t rank) {
    const firth::Matrix b = matrix(rank, n);
    firth::SymMatrix s = firth::SymMatrix::zeros(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double v = 0.0;
        for (std::size_t r = 0; r < rank; ++r) v += b(r, i) * b(r, j);
        s.set(i, j, v);
      }
    return s;
  }

  firth::FeatureSet features(std::size_t n, std::size_t d, std::size_t k) {
    std::vector<std::uint32_t> labels(n);
    for (auto& l : labels) l = static_cast<std::uint32_t>(index(0, k - 1));
    return firth::FeatureSet(matrix(n, d), std::move(labels), k);
  }

  firth::LogisticParams logistic(std::size_t j, std::size_t d, double sd = 0.5) {
    auto p = firth::LogisticParams::zeros(j, d);
    for (double& v : p.betas) v = normal(sd);
    return p;
  }

 private:
  std::mt19937_64 rng_;
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace testgen
