#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "firth/matrix.hpp"

namespace firth {

// Labeled feature vectors: one row of `x` per sample.
class FeatureSet {
 public:
  FeatureSet() = default;
  // Throws InvalidInput on empty data, label/row count mismatch or a
  // label >= num_classes.
  FeatureSet(Matrix x, std::vector<std::uint32_t> labels, std::size_t num_classes);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return x_.cols(); }
  std::size_t num_classes() const noexcept { return num_classes_; }

  const Matrix& features() const noexcept { return x_; }
  const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }
  std::span<const double> row(std::size_t i) const { return x_.row(i); }
  std::uint32_t label(std::size_t i) const { return labels_[i]; }

  // Rows at `indices`, in that order.
  FeatureSet subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;

  bool operator==(const FeatureSet&) const = default;

 private:
  Matrix x_;
  std::vector<std::uint32_t> labels_;
  std::size_t num_classes_ = 0;
};

// Appends a constant-1 feature to every row (opt-in intercept).
FeatureSet with_intercept(const FeatureSet& data);
Matrix with_intercept(const Matrix& x);

// N x (J+1) class-assignment probabilities. Entries are floored at
// kProbFloor so that log() never sees zero.
class ProbMatrix {
 public:
  // Validates rows: entries in (0, 1] and sums within 1e-9 of one.
  explicit ProbMatrix(Matrix p);

  std::size_t rows() const noexcept { return p_.rows(); }
  std::size_t classes() const noexcept { return p_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return p_(i, j); }
  std::span<const double> row(std::size_t i) const { return p_.row(i); }
  const Matrix& matrix() const noexcept { return p_; }

 private:
  friend ProbMatrix softmax_rows(const Matrix& logits);
  struct Unchecked {};
  ProbMatrix(Matrix p, Unchecked) : p_(std::move(p)) {}
  Matrix p_;
};

inline constexpr double kProbFloor = 1e-300;

double safe_log(double p);

// Row-wise softmax with max-logit subtraction.
ProbMatrix softmax_rows(const Matrix& logits);

// Multinomial logistic weights with class 0 as the zero-weight reference.
struct LogisticParams {
  std::size_t num_free = 0;  // J
  std::size_t dim = 0;       // d
  std::vector<double> betas; // J x d row-major; row j-1 is beta_j

  static LogisticParams zeros(std::size_t num_free, std::size_t dim);
  std::size_t num_classes() const noexcept { return num_free + 1; }
  std::span<double> beta(std::size_t j) { return {betas.data() + (j - 1) * dim, dim}; }
  std::span<const double> beta(std::size_t j) const { return {betas.data() + (j - 1) * dim, dim}; }
  std::span<double> flat() noexcept { return betas; }
  std::span<const double> flat() const noexcept { return betas; }
};

// Logits with a leading zero column for the reference class.
Matrix logistic_logits(const LogisticParams& params, const Matrix& x);
ProbMatrix softmax_probs(const LogisticParams& params, const Matrix& x);
// Sum over samples of log P(y_i | x_i); always <= 0.
double log_likelihood(const LogisticParams& params, const FeatureSet& data);

// Argmax per row; ties go to the lowest class index.
std::vector<std::uint32_t> predict(const ProbMatrix& probs);
double accuracy(const ProbMatrix& probs, std::span<const std::uint32_t> labels);

struct MlpShape {
  std::size_t input = 0;
  std::size_t hidden1 = 100;
  std::size_t hidden2 = 50;
  std::size_t classes = 0;

  std::size_t param_count() const noexcept;
};

// Features -> hidden1 -> ReLU -> hidden2 -> ReLU -> classes -> softmax.
// All parameters live in one flat buffer: W1, b1, W2, b2, W3, b3, with
// weights stored row-major (out x in).
struct MlpParams {
  MlpShape shape;
  std::vector<double> values;

  static MlpParams zeros(const MlpShape& shape);
  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)); biases zero.
  static MlpParams glorot(const MlpShape& shape, std::uint64_t seed);

  std::span<double> flat() noexcept { return values; }
  std::span<const double> flat() const noexcept { return values; }

  struct Layer {
    std::size_t weight_offset, bias_offset, in, out;
  };
  std::array<Layer, 3> layers() const;
};

Matrix mlp_logits(const MlpParams& params, const Matrix& x);
ProbMatrix mlp_forward(const MlpParams& params, const Matrix& x);

}  // namespace firth
