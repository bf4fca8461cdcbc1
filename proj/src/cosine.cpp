#include "firth/cosine.hpp"

#include <cmath>
#include <random>
#include <string>

#include "firth/error.hpp"
#include "firth/penalty.hpp"

namespace firth {

CosineParams CosineParams::glorot(std::size_t num_classes, std::size_t dim, std::uint64_t seed,
                                  double scale) {
  if (num_classes < 2 || dim == 0) throw InvalidInput("cosine params need >= 2 classes, d >= 1");
  if (!(scale > 0.0)) throw InvalidInput("cosine scale must be > 0");
  CosineParams p{num_classes, dim, std::vector<double>(num_classes * dim), scale};
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(dim + num_classes));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (auto& w : p.weights) w = u(rng);
  return p;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = norm2(m.row(i));
    if (!(n >= kMinNorm)) {
      throw DegenerateData("row " + std::to_string(i) + " has norm below 1e-12");
    }
    for (auto& v : out.row(i)) v /= n;
  }
  return out;
}

Matrix cosine_logits(const CosineParams& params, const Matrix& x) {
  if (x.cols() != params.dim) {
    throw InvalidInput("feature dimension " + std::to_string(x.cols()) +
                       " does not match cosine weights " + std::to_string(params.dim));
  }
  if (!(params.scale > 0.0)) throw InvalidInput("cosine scale must be > 0");
  const Matrix w = normalize_rows(Matrix(params.num_classes, params.dim, params.weights));
  const Matrix xn = normalize_rows(x);
  Matrix z(x.rows(), params.num_classes);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < params.num_classes; ++j)
      z(i, j) = params.scale * dot(w.row(j), xn.row(i));
  return z;
}

ProbMatrix cosine_probs(const CosineParams& params, const Matrix& x) {
  return softmax_rows(cosine_logits(params, x));
}

double cosine_firth_loss(const CosineParams& params, const FeatureSet& data, double lambda) {
  const ProbMatrix p = cosine_probs(params, data.features());
  double ce = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) ce -= safe_log(p(i, data.label(i)));
  ce /= static_cast<double>(data.size());
  return ce + lambda * kl_uniform(p);
}

std::vector<double> jacobian_block_check(std::span<const double> beta, std::span<const double> v) {
  if (beta.size() != v.size()) throw InvalidInput("beta and v differ in length");
  const double n = norm2(beta);
  if (!(n >= kMinNorm)) throw DegenerateData("beta has norm below 1e-12");
  const double proj = dot(beta, v) / (n * n);
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = (v[k] - proj * beta[k]) / n;
  return out;
}

}  // namespace firth
