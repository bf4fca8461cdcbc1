#include "firth/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "firth/error.hpp"
#include "firth/rng.hpp"

namespace firth {

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

LogisticParams random_logistic(std::size_t j, std::size_t d, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  LogisticParams p = LogisticParams::zeros(j, d);
  for (double& v : p.betas) v = normal(rng);
  return p;
}

std::vector<double> random_prior(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> prior(k);
  for (double& v : prior) v = u(rng);
  const double total = std::accumulate(prior.begin(), prior.end(), 0.0);
  for (double& v : prior) v /= total;
  return prior;
}

// Sign pattern of every hidden pre-activation over the batch; central
// differences are only meaningful when a probe leaves it unchanged.
std::vector<bool> relu_pattern(const MlpParams& p, const FeatureSet& batch) {
  const auto layers = p.layers();
  std::vector<bool> pattern;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<double> in(batch.row(i).begin(), batch.row(i).end());
    for (std::size_t l = 0; l < 2; ++l) {
      const auto& L = layers[l];
      std::vector<double> out(L.out);
      for (std::size_t o = 0; o < L.out; ++o) {
        double z = p.values[L.bias_offset + o];
        for (std::size_t k = 0; k < L.in; ++k) z += p.values[L.weight_offset + o * L.in + k] * in[k];
        pattern.push_back(z > 0.0);
        out[o] = z > 0.0 ? z : 0.0;
      }
      in = std::move(out);
    }
  }
  return pattern;
}

template <class P>
bool crosses_kink(const P&, const P&, const P&, const FeatureSet&) {
  return false;
}

bool crosses_kink(const MlpParams& base, const MlpParams& up, const MlpParams& down,
                  const FeatureSet& batch) {
  const auto ref = relu_pattern(base, batch);
  return relu_pattern(up, batch) != ref || relu_pattern(down, batch) != ref;
}

template <class P>
void compare(const P& params, const FeatureSet& batch, const PenaltyConfig& penalty,
             const GradCheckOptions& options, std::mt19937_64& rng, GradCheckResult& result) {
  const auto analytic = loss_and_grad(params, batch, penalty).grad;
  const auto a = analytic.flat();
  std::vector<std::size_t> coords(a.size());
  std::iota(coords.begin(), coords.end(), 0);
  if (options.coordinates != 0 && options.coordinates < coords.size()) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.coordinates);
  }
  P probe_up = params;
  P probe_down = params;
  auto xu = probe_up.flat();
  auto xd = probe_down.flat();
  for (std::size_t k : coords) {
    const double orig = xu[k];
    xu[k] = orig + options.step;
    xd[k] = orig - options.step;
    const bool kink = crosses_kink(params, probe_up, probe_down, batch);
    const double up = loss_value(probe_up, batch, penalty);
    const double down = loss_value(probe_down, batch, penalty);
    xu[k] = orig;
    xd[k] = orig;
    if (kink) {
      ++result.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * options.step);
    const double denom = std::max({std::abs(a[k]), std::abs(numeric), kGradRelFloor});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(a[k] - numeric) / denom);
    ++result.compared;
  }
}

}  // namespace

FimCheckResult fim_check(const FimCheckOptions& options) {
  if (options.samples >= options.dim) throw InvalidInput("fim check needs samples < dim");
  if (options.free_classes.empty()) throw InvalidInput("fim check needs class counts");
  FimCheckResult result;
  for (std::size_t t = 0; t < options.instances; ++t) {
    std::mt19937_64 rng(derive_seed(options.seed, "fim-instance", t));
    const std::size_t j = options.free_classes[t % options.free_classes.size()];
    const Matrix x = gaussian_matrix(options.samples, options.dim, rng);
    const LogisticParams a = random_logistic(j, options.dim, options.param_scale, rng);
    const LogisticParams b = random_logistic(j, options.dim, options.param_scale, rng);
    const double r = penalty_oracle_residual(a, b, x);
    result.max_abs_residual = std::max(result.max_abs_residual, std::abs(r));
    ++result.instances;
  }
  return result;
}

GradCheckResult grad_check(const GradCheckOptions& options) {
  if (options.classes < 2 || options.batch < 1 || options.dim < 1) {
    throw InvalidInput("grad check needs >= 2 classes and non-empty batches");
  }
  if (!(options.step > 0.0)) throw InvalidInput("grad check step must be > 0");
  GradCheckResult result;
  std::uniform_real_distribution<double> lambda_dist(0.1, 2.0);
  std::normal_distribution<double> normal;
  for (std::size_t t = 0; t < options.triples; ++t) {
    std::mt19937_64 rng(derive_seed(options.seed, "grad-triple", t));
    std::uniform_int_distribution<std::uint32_t> label_dist(
        0, static_cast<std::uint32_t>(options.classes - 1));
    std::vector<std::uint32_t> labels(options.batch);
    for (auto& l : labels) l = label_dist(rng);
    FeatureSet batch(gaussian_matrix(options.batch, options.dim, rng), std::move(labels),
                     options.classes);

    PenaltyConfig penalty;
    penalty.kind = options.kind;
    penalty.lambda = options.kind == PenaltyKind::none ? 0.0 : lambda_dist(rng);
    if (options.kind == PenaltyKind::kl_prior) penalty.prior = random_prior(options.classes, rng);

    switch (options.arch) {
      case Arch::logistic:
        compare(random_logistic(options.classes - 1, options.dim, 0.5, rng), batch, penalty,
                options, rng, result);
        break;
      case Arch::mlp: {
        MlpShape shape{options.dim, options.hidden1, options.hidden2, options.classes};
        MlpParams p = MlpParams::glorot(shape, rng());
        // Non-zero biases so their gradients are exercised too.
        for (const auto& layer : p.layers())
          for (std::size_t k = 0; k < layer.out; ++k) p.values[layer.bias_offset + k] = 0.1 * normal(rng);
        compare(p, batch, penalty, options, rng, result);
        break;
      }
      case Arch::cosine:
        compare(CosineParams::glorot(options.classes, options.dim, rng()), batch, penalty, options,
                rng, result);
        break;
    }
  }
  return result;
}

}  // namespace firth
