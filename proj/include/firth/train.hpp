#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <variant>

#include "firth/cosine.hpp"
#include "firth/error.hpp"
#include "firth/model.hpp"
#include "firth/penalty.hpp"

namespace firth {

enum class Arch { logistic, mlp, cosine };

std::string_view to_string(Arch arch);
Arch parse_arch(std::string_view name);

inline constexpr double kDefaultLearningRate = 0.005;
inline constexpr std::size_t kDefaultBatchSize = 10;
inline constexpr std::size_t kDefaultEpochsOneLayer = 400;
inline constexpr std::size_t kDefaultEpochsMlp = 100;

struct TrainConfig {
  double learning_rate = kDefaultLearningRate;
  std::size_t batch_size = kDefaultBatchSize;
  std::size_t epochs = 0;  // 0 picks the per-architecture default
  PenaltyConfig penalty;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool intercept = false;  // append a constant-1 feature
  double cosine_scale = kDefaultCosineScale;
  std::size_t hidden1 = 100;
  std::size_t hidden2 = 50;

  void validate() const;
  std::size_t effective_epochs(Arch arch) const;
};

using Params = std::variant<LogisticParams, MlpParams, CosineParams>;

struct TrainedModel {
  Params params;
  bool intercept = false;

  // Class probabilities for raw (un-augmented) feature rows.
  ProbMatrix probs(const Matrix& x) const;
};

template <class P>
struct LossGrad {
  double loss = 0.0;
  P grad;
};

// loss = mean_i CE(y_i || P_i) + penalty_value, with the analytic gradient.
LossGrad<LogisticParams> loss_and_grad(const LogisticParams& params, const FeatureSet& batch,
                                       const PenaltyConfig& penalty);
LossGrad<MlpParams> loss_and_grad(const MlpParams& params, const FeatureSet& batch,
                                  const PenaltyConfig& penalty);
LossGrad<CosineParams> loss_and_grad(const CosineParams& params, const FeatureSet& batch,
                                     const PenaltyConfig& penalty);

double loss_value(const LogisticParams& params, const FeatureSet& batch, const PenaltyConfig& penalty);
double loss_value(const MlpParams& params, const FeatureSet& batch, const PenaltyConfig& penalty);
double loss_value(const CosineParams& params, const FeatureSet& batch, const PenaltyConfig& penalty);

// Central differences of loss_value, one coordinate at a time.
template <class P>
P finite_diff_grad(const P& params, const FeatureSet& batch, const PenaltyConfig& penalty,
                   double step) {
  if (!(step > 0.0)) throw InvalidInput("finite difference step must be > 0");
  P grad = params;
  P probe = params;
  auto g = grad.flat();
  auto x = probe.flat();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + step;
    const double up = loss_value(probe, batch, penalty);
    x[k] = orig - step;
    const double down = loss_value(probe, batch, penalty);
    x[k] = orig;
    g[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

// Plain mini-batch SGD. The shuffle stream and any random initialization
// derive from config.seed only, so identical inputs give bit-identical
// parameters. The last partial batch is used. Throws TrainingDiverged on a
// non-finite loss.
TrainedModel sgd_train(const FeatureSet& data, const TrainConfig& config, Arch arch);

}  // namespace firth
