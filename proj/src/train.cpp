#include "firth/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "firth/rng.hpp"

namespace firth {

std::string_view to_string(Arch arch) {
  switch (arch) {
    case Arch::logistic: return "logistic";
    case Arch::mlp: return "mlp";
    case Arch::cosine: return "cosine";
  }
  return "unknown";
}

Arch parse_arch(std::string_view name) {
  if (name == "logistic" || name == "logistic-1") return Arch::logistic;
  if (name == "mlp" || name == "mlp-3") return Arch::mlp;
  if (name == "cosine" || name == "cosine-1") return Arch::cosine;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be > 0");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cosine_scale > 0.0)) throw ConfigError("cosine scale must be > 0");
  if (hidden1 < 1 || hidden2 < 1) throw ConfigError("mlp hidden widths must be >= 1");
  penalty.validate();
}

std::size_t TrainConfig::effective_epochs(Arch arch) const {
  if (epochs > 0) return epochs;
  return arch == Arch::mlp ? kDefaultEpochsMlp : kDefaultEpochsOneLayer;
}

ProbMatrix TrainedModel::probs(const Matrix& x) const {
  const Matrix input = intercept ? with_intercept(x) : x;
  return std::visit(
      [&](const auto& p) -> ProbMatrix {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) return softmax_probs(p, input);
        else if constexpr (std::is_same_v<P, MlpParams>) return mlp_forward(p, input);
        else return cosine_probs(p, input);
      },
      params);
}

namespace {

void check_classes(std::size_t model_classes, const FeatureSet& batch) {
  if (batch.num_classes() != model_classes) {
    throw InvalidInput("batch has " + std::to_string(batch.num_classes()) +
                       " classes, model has " + std::to_string(model_classes));
  }
}

// Mean cross-entropy plus penalty, and d loss / d logits.
struct LogitLoss {
  double loss = 0.0;
  Matrix dz;
};

LogitLoss logit_loss(const ProbMatrix& probs, const FeatureSet& batch,
                     const PenaltyConfig& penalty, std::span<const double> params,
                     bool want_grad) {
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LogitLoss out;
  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) ce -= safe_log(probs(i, batch.label(i)));
  out.loss = ce * inv_n + penalty_value(penalty, probs, params);
  if (!want_grad) return out;
  out.dz = penalty_logit_grad(penalty, probs);
  for (std::size_t i = 0; i < n; ++i) {
    auto g = out.dz.row(i);
    auto p = probs.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += p[c] * inv_n;
    g[batch.label(i)] -= inv_n;
  }
  return out;
}

LossGrad<LogisticParams> logistic_impl(const LogisticParams& params, const FeatureSet& batch,
                                       const PenaltyConfig& penalty, bool want_grad) {
  check_classes(params.num_classes(), batch);
  const ProbMatrix probs = softmax_probs(params, batch.features());
  LogitLoss ll = logit_loss(probs, batch, penalty, params.flat(), want_grad);
  LossGrad<LogisticParams> out{ll.loss, {}};
  if (!want_grad) return out;
  out.grad = LogisticParams::zeros(params.num_free, params.dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto xi = batch.row(i);
    for (std::size_t j = 1; j <= params.num_free; ++j) {
      const double g = ll.dz(i, j);
      auto gj = out.grad.beta(j);
      for (std::size_t a = 0; a < params.dim; ++a) gj[a] += g * xi[a];
    }
  }
  add_l2_grad(penalty, params.flat(), out.grad.flat());
  return out;
}

LossGrad<CosineParams> cosine_impl(const CosineParams& params, const FeatureSet& batch,
                                   const PenaltyConfig& penalty, bool want_grad) {
  check_classes(params.num_classes, batch);
  const ProbMatrix probs = cosine_probs(params, batch.features());
  LogitLoss ll = logit_loss(probs, batch, penalty, params.flat(), want_grad);
  LossGrad<CosineParams> out{ll.loss, {}};
  if (!want_grad) return out;
  out.grad = params;
  std::fill(out.grad.weights.begin(), out.grad.weights.end(), 0.0);
  // d logit_ij / d beta_j = scale * A_jj * T(x_i), with A_jj the Jacobian
  // of the normalization at beta_j.
  const Matrix xn = normalize_rows(batch.features());
  std::vector<double> acc(params.dim);
  for (std::size_t j = 0; j < params.num_classes; ++j) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double g = ll.dz(i, j);
      auto xi = xn.row(i);
      for (std::size_t a = 0; a < params.dim; ++a) acc[a] += g * xi[a];
    }
    const auto projected = jacobian_block_check(params.weight(j), acc);
    auto gj = out.grad.weight(j);
    for (std::size_t a = 0; a < params.dim; ++a) gj[a] = params.scale * projected[a];
  }
  add_l2_grad(penalty, params.flat(), out.grad.flat());
  return out;
}

LossGrad<MlpParams> mlp_impl(const MlpParams& params, const FeatureSet& batch,
                             const PenaltyConfig& penalty, bool want_grad) {
  const auto& s = params.shape;
  check_classes(s.classes, batch);
  if (batch.dim() != s.input) throw InvalidInput("feature dimension does not match mlp input");
  if (params.values.size() != s.param_count()) throw InvalidInput("mlp params have wrong size");
  const auto layers = params.layers();
  const std::vector<double>& v = params.values;
  const std::size_t n = batch.size();

  // Forward pass keeping post-activation values for backprop.
  Matrix h1(n, s.hidden1), h2(n, s.hidden2), z(n, s.classes);
  auto dense = [&](const MlpParams::Layer& l, std::span<const double> in, std::span<double> out,
                   bool relu) {
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* w = v.data() + l.weight_offset + o * l.in;
      double acc = v[l.bias_offset + o];
      for (std::size_t k = 0; k < l.in; ++k) acc += w[k] * in[k];
      out[o] = relu ? std::max(acc, 0.0) : acc;
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    dense(layers[0], batch.row(i), h1.row(i), true);
    dense(layers[1], h1.row(i), h2.row(i), true);
    dense(layers[2], h2.row(i), z.row(i), false);
  }
  const ProbMatrix probs = softmax_rows(z);
  LogitLoss ll = logit_loss(probs, batch, penalty, params.flat(), want_grad);
  LossGrad<MlpParams> out{ll.loss, {}};
  if (!want_grad) return out;
  out.grad = MlpParams::zeros(s);
  std::vector<double>& g = out.grad.values;

  // Accumulates the layer's weight/bias gradient and returns d/d input.
  auto backward = [&](const MlpParams::Layer& l, std::span<const double> in,
                      std::span<const double> dout, std::span<double> din) {
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = dout[o];
      if (d == 0.0) continue;
      double* gw = g.data() + l.weight_offset + o * l.in;
      const double* w = v.data() + l.weight_offset + o * l.in;
      for (std::size_t k = 0; k < l.in; ++k) gw[k] += d * in[k];
      g[l.bias_offset + o] += d;
      if (!din.empty())
        for (std::size_t k = 0; k < l.in; ++k) din[k] += d * w[k];
    }
  };
  std::vector<double> d2(s.hidden2), d1(s.hidden1);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(d2.begin(), d2.end(), 0.0);
    std::fill(d1.begin(), d1.end(), 0.0);
    backward(layers[2], h2.row(i), ll.dz.row(i), d2);
    for (std::size_t k = 0; k < s.hidden2; ++k)
      if (h2(i, k) <= 0.0) d2[k] = 0.0;
    backward(layers[1], h1.row(i), d2, d1);
    for (std::size_t k = 0; k < s.hidden1; ++k)
      if (h1(i, k) <= 0.0) d1[k] = 0.0;
    backward(layers[0], batch.row(i), d1, {});
  }
  add_l2_grad(penalty, params.flat(), out.grad.flat());
  return out;
}

}  // namespace

LossGrad<LogisticParams> loss_and_grad(const LogisticParams& params, const FeatureSet& batch,
                                       const PenaltyConfig& penalty) {
  return logistic_impl(params, batch, penalty, true);
}
LossGrad<MlpParams> loss_and_grad(const MlpParams& params, const FeatureSet& batch,
                                  const PenaltyConfig& penalty) {
  return mlp_impl(params, batch, penalty, true);
}
LossGrad<CosineParams> loss_and_grad(const CosineParams& params, const FeatureSet& batch,
                                     const PenaltyConfig& penalty) {
  return cosine_impl(params, batch, penalty, true);
}

double loss_value(const LogisticParams& params, const FeatureSet& batch, const PenaltyConfig& penalty) {
  return logistic_impl(params, batch, penalty, false).loss;
}
double loss_value(const MlpParams& params, const FeatureSet& batch, const PenaltyConfig& penalty) {
  return mlp_impl(params, batch, penalty, false).loss;
}
double loss_value(const CosineParams& params, const FeatureSet& batch, const PenaltyConfig& penalty) {
  return cosine_impl(params, batch, penalty, false).loss;
}

namespace {

template <class P>
void run_sgd(P& params, const FeatureSet& data, const TrainConfig& config, std::size_t epochs) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(config.seed, "shuffle"));
  const std::size_t batch = std::min(config.batch_size, data.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, order.size());
      const FeatureSet b = data.subset(std::span(order).subspan(start, stop - start));
      const auto lg = loss_and_grad(params, b, config.penalty);
      if (!std::isfinite(lg.loss)) {
        throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch) +
                                          ": non-finite loss");
      }
      auto p = params.flat();
      auto g = lg.grad.flat();
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= config.learning_rate * g[k];
    }
  }
}

}  // namespace

TrainedModel sgd_train(const FeatureSet& raw, const TrainConfig& config, Arch arch) {
  config.validate();
  if (config.penalty.kind == PenaltyKind::kl_prior &&
      config.penalty.prior.size() != raw.num_classes()) {
    throw ConfigError("prior length does not match the class count");
  }
  const FeatureSet data = config.intercept ? with_intercept(raw) : raw;
  const std::size_t epochs = config.effective_epochs(arch);
  const std::size_t k = data.num_classes();
  if (k < 2) throw InvalidInput("training needs at least two classes");
  const std::uint64_t init_seed = derive_seed(config.seed, "init");

  TrainedModel model{LogisticParams{}, config.intercept};
  switch (arch) {
    case Arch::logistic: {
      auto p = LogisticParams::zeros(k - 1, data.dim());
      run_sgd(p, data, config, epochs);
      model.params = std::move(p);
      break;
    }
    case Arch::mlp: {
      auto p = MlpParams::glorot({data.dim(), config.hidden1, config.hidden2, k}, init_seed);
      run_sgd(p, data, config, epochs);
      model.params = std::move(p);
      break;
    }
    case Arch::cosine: {
      auto p = CosineParams::glorot(k, data.dim(), init_seed, config.cosine_scale);
      run_sgd(p, data, config, epochs);
      model.params = std::move(p);
      break;
    }
  }
  return model;
}

}  // namespace firth
