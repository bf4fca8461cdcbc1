#include "firth/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "firth/error.hpp"

namespace firth {

FeatureSet::FeatureSet(Matrix x, std::vector<std::uint32_t> labels, std::size_t num_classes)
    : x_(std::move(x)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (labels_.empty()) throw InvalidInput("feature set needs at least one row");
  if (x_.rows() != labels_.size()) {
    throw InvalidInput("feature set has " + std::to_string(x_.rows()) + " rows but " +
                       std::to_string(labels_.size()) + " labels");
  }
  if (x_.cols() == 0) throw InvalidInput("feature dimension must be >= 1");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= num_classes_) {
      throw InvalidInput("row " + std::to_string(i) + " has label " +
                         std::to_string(labels_[i]) + " >= class count " +
                         std::to_string(num_classes_));
    }
  }
}

FeatureSet FeatureSet::subset(std::span<const std::size_t> indices) const {
  Matrix x(indices.size(), dim());
  std::vector<std::uint32_t> labels(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), x.row(r).begin());
    labels[r] = labels_[indices[r]];
  }
  return FeatureSet(std::move(x), std::move(labels), num_classes_);
}

std::vector<std::size_t> FeatureSet::class_counts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (auto y : labels_) ++counts[y];
  return counts;
}

Matrix with_intercept(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto src = x.row(i);
    std::copy(src.begin(), src.end(), out.row(i).begin());
    out(i, x.cols()) = 1.0;
  }
  return out;
}

FeatureSet with_intercept(const FeatureSet& data) {
  return FeatureSet(with_intercept(data.features()), data.labels(), data.num_classes());
}

ProbMatrix::ProbMatrix(Matrix p) : p_(std::move(p)) {
  for (std::size_t i = 0; i < p_.rows(); ++i) {
    double sum = 0.0;
    for (double v : p_.row(i)) {
      if (!(v > 0.0 && v <= 1.0)) {
        throw InvalidInput("probability row " + std::to_string(i) + " has entry outside (0, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidInput("probability row " + std::to_string(i) + " sums to " +
                         std::to_string(sum));
    }
  }
}

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

ProbMatrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    auto out = p.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      out[j] = std::exp(z[j] - zmax);
      sum += out[j];
    }
    for (auto& v : out) v = std::max(v / sum, kProbFloor);
  }
  return ProbMatrix(std::move(p), ProbMatrix::Unchecked{});
}

LogisticParams LogisticParams::zeros(std::size_t num_free, std::size_t dim) {
  if (num_free == 0 || dim == 0) throw InvalidInput("logistic params need J >= 1 and d >= 1");
  return LogisticParams{num_free, dim, std::vector<double>(num_free * dim, 0.0)};
}

Matrix logistic_logits(const LogisticParams& params, const Matrix& x) {
  if (x.cols() != params.dim) {
    throw InvalidInput("feature dimension " + std::to_string(x.cols()) +
                       " does not match parameter dimension " + std::to_string(params.dim));
  }
  if (params.betas.size() != params.num_free * params.dim) {
    throw InvalidInput("logistic params hold the wrong number of weights");
  }
  Matrix z(x.rows(), params.num_classes(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xi = x.row(i);
    for (std::size_t j = 1; j <= params.num_free; ++j) z(i, j) = dot(params.beta(j), xi);
  }
  return z;
}

ProbMatrix softmax_probs(const LogisticParams& params, const Matrix& x) {
  return softmax_rows(logistic_logits(params, x));
}

double log_likelihood(const LogisticParams& params, const FeatureSet& data) {
  if (data.num_classes() != params.num_classes()) {
    throw InvalidInput("data has " + std::to_string(data.num_classes()) +
                       " classes, params have " + std::to_string(params.num_classes()));
  }
  const ProbMatrix p = softmax_probs(params, data.features());
  double ll = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) ll += safe_log(p(i, data.label(i)));
  return ll;
}

std::vector<std::uint32_t> predict(const ProbMatrix& probs) {
  std::vector<std::uint32_t> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto r = probs.row(i);
    // max_element returns the first maximum: lowest index wins ties.
    out[i] = static_cast<std::uint32_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double accuracy(const ProbMatrix& probs, std::span<const std::uint32_t> labels) {
  if (labels.size() != probs.rows()) throw InvalidInput("label count does not match rows");
  const auto pred = predict(probs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::size_t MlpShape::param_count() const noexcept {
  return hidden1 * input + hidden1 + hidden2 * hidden1 + hidden2 + classes * hidden2 + classes;
}

std::array<MlpParams::Layer, 3> MlpParams::layers() const {
  const auto& s = shape;
  std::array<Layer, 3> l{};
  std::size_t off = 0;
  l[0] = {off, off + s.hidden1 * s.input, s.input, s.hidden1};
  off = l[0].bias_offset + s.hidden1;
  l[1] = {off, off + s.hidden2 * s.hidden1, s.hidden1, s.hidden2};
  off = l[1].bias_offset + s.hidden2;
  l[2] = {off, off + s.classes * s.hidden2, s.hidden2, s.classes};
  return l;
}

MlpParams MlpParams::zeros(const MlpShape& shape) {
  if (shape.input == 0 || shape.hidden1 == 0 || shape.hidden2 == 0 || shape.classes < 2) {
    throw InvalidInput("mlp shape needs positive widths and at least two classes");
  }
  return MlpParams{shape, std::vector<double>(shape.param_count(), 0.0)};
}

MlpParams MlpParams::glorot(const MlpShape& shape, std::uint64_t seed) {
  MlpParams p = zeros(shape);
  std::mt19937_64 rng(seed);
  for (const auto& layer : p.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t k = 0; k < layer.in * layer.out; ++k) p.values[layer.weight_offset + k] = u(rng);
  }
  return p;
}

namespace {

// y = W x + b, optionally followed by ReLU.
void dense_layer(const std::vector<double>& v, const MlpParams::Layer& l,
                 std::span<const double> in, std::span<double> out, bool relu) {
  for (std::size_t o = 0; o < l.out; ++o) {
    const double* w = v.data() + l.weight_offset + o * l.in;
    double s = v[l.bias_offset + o];
    for (std::size_t k = 0; k < l.in; ++k) s += w[k] * in[k];
    out[o] = relu ? std::max(s, 0.0) : s;
  }
}

}  // namespace

Matrix mlp_logits(const MlpParams& params, const Matrix& x) {
  const auto& s = params.shape;
  if (x.cols() != s.input) {
    throw InvalidInput("feature dimension " + std::to_string(x.cols()) +
                       " does not match mlp input " + std::to_string(s.input));
  }
  if (params.values.size() != s.param_count()) {
    throw InvalidInput("mlp params hold the wrong number of values");
  }
  const auto layers = params.layers();
  std::vector<double> h1(s.hidden1), h2(s.hidden2);
  Matrix z(x.rows(), s.classes);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    dense_layer(params.values, layers[0], x.row(i), h1, true);
    dense_layer(params.values, layers[1], h1, h2, true);
    dense_layer(params.values, layers[2], h2, z.row(i), false);
  }
  return z;
}

ProbMatrix mlp_forward(const MlpParams& params, const Matrix& x) {
  return softmax_rows(mlp_logits(params, x));
}

}  // namespace firth
