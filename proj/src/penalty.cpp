#include "firth/penalty.hpp"

#include <cmath>
#include <string>

#include "firth/error.hpp"

namespace firth {

std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::firth_simplified: return "firth_simplified";
    case PenaltyKind::kl_uniform: return "kl_uniform";
    case PenaltyKind::kl_prior: return "kl_prior";
    case PenaltyKind::confidence: return "confidence";
    case PenaltyKind::l2_mean_squared: return "l2_mean_squared";
  }
  return "unknown";
}

PenaltyKind parse_penalty_kind(std::string_view name) {
  if (name == "none" || name == "baseline") return PenaltyKind::none;
  if (name == "firth_simplified") return PenaltyKind::firth_simplified;
  if (name == "kl_uniform" || name == "firth") return PenaltyKind::kl_uniform;
  if (name == "kl_prior" || name == "unigram") return PenaltyKind::kl_prior;
  if (name == "confidence") return PenaltyKind::confidence;
  if (name == "l2_mean_squared" || name == "l2") return PenaltyKind::l2_mean_squared;
  throw ConfigError("unknown penalty kind '" + std::string(name) + "'");
}

void PenaltyConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("penalty lambda must be a finite value >= 0");
  }
  if (kind == PenaltyKind::kl_prior) {
    if (prior.empty()) throw ConfigError("kl_prior penalty requires a prior");
    double sum = 0.0;
    for (double a : prior) {
      if (!(a > 0.0)) throw ConfigError("prior entries must be > 0");
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("prior must sum to 1");
  } else if (!prior.empty()) {
    throw ConfigError("prior given for penalty kind " + std::string(to_string(kind)));
  }
}

double firth_simplified(const ProbMatrix& probs) {
  double s = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i)
    for (double p : probs.row(i)) s += safe_log(p);
  return s / static_cast<double>(probs.rows());
}

double kl_to_prior(const ProbMatrix& probs, std::span<const double> prior) {
  if (prior.size() != probs.classes()) {
    throw InvalidInput("prior has " + std::to_string(prior.size()) + " entries for " +
                       std::to_string(probs.classes()) + " classes");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto r = probs.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) s += prior[j] * (std::log(prior[j]) - safe_log(r[j]));
  }
  return s / static_cast<double>(probs.rows());
}

double kl_uniform(const ProbMatrix& probs) {
  const std::vector<double> u(probs.classes(), 1.0 / static_cast<double>(probs.classes()));
  return kl_to_prior(probs, u);
}

double confidence_penalty(const ProbMatrix& probs) {
  const double log_k = std::log(static_cast<double>(probs.classes()));
  double s = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i)
    for (double p : probs.row(i)) s += p * (safe_log(p) + log_k);
  return s / static_cast<double>(probs.rows());
}

double l2_mean_squared(std::span<const double> params) {
  if (params.empty()) return 0.0;
  double s = 0.0;
  for (double v : params) s += v * v;
  return s / static_cast<double>(params.size());
}

SymMatrix block_m(std::span<const double> prob_row) {
  if (prob_row.size() < 2) throw InvalidInput("probability row needs at least two classes");
  const std::size_t J = prob_row.size() - 1;
  SymMatrix m = SymMatrix::zeros(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double pj = prob_row[j + 1];
    m.set(j, j, pj * (1.0 - pj));
    for (std::size_t k = j + 1; k < J; ++k) m.set(j, k, -pj * prob_row[k + 1]);
  }
  return m;
}

SymMatrix build_fim(const LogisticParams& params, const Matrix& x) {
  const ProbMatrix probs = softmax_probs(params, x);
  const std::size_t J = params.num_free;
  const std::size_t d = params.dim;
  SymMatrix f = SymMatrix::zeros(J * d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const SymMatrix m = block_m(probs.row(i));
    auto xi = x.row(i);
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t k = j; k < J; ++k) {
        const double w = m(j, k);
        for (std::size_t a = 0; a < d; ++a) {
          // Diagonal blocks are themselves symmetric: fill the upper part only.
          for (std::size_t b = (j == k ? a : 0); b < d; ++b) {
            f.add(j * d + a, k * d + b, w * xi[a] * xi[b]);
          }
        }
      }
    }
  }
  return f;
}

double penalty_oracle_residual(const LogisticParams& params_a, const LogisticParams& params_b,
                               const Matrix& x, double rel_tol) {
  const std::size_t expected = x.rows() * params_a.num_free;
  auto logdet = [&](const LogisticParams& p) {
    const AmendedLogDet r = amended_log_det(build_fim(p, x), rel_tol);
    if (r.rank != expected) {
      throw DegenerateData("FIM rank " + std::to_string(r.rank) + " differs from N*J = " +
                           std::to_string(expected));
    }
    return r.log_det;
  };
  const double n = static_cast<double>(x.rows());
  const double lhs = logdet(params_a) - logdet(params_b);
  const double rhs = n * (firth_simplified(softmax_probs(params_a, x)) -
                          firth_simplified(softmax_probs(params_b, x)));
  return lhs - rhs;
}

double penalty_value(const PenaltyConfig& config, const ProbMatrix& probs,
                     std::span<const double> params) {
  config.validate();
  if (!config.active()) return 0.0;
  switch (config.kind) {
    case PenaltyKind::none: return 0.0;
    case PenaltyKind::firth_simplified: return -config.lambda * firth_simplified(probs);
    case PenaltyKind::kl_uniform: return config.lambda * kl_uniform(probs);
    case PenaltyKind::kl_prior: return config.lambda * kl_to_prior(probs, config.prior);
    case PenaltyKind::confidence: return config.lambda * confidence_penalty(probs);
    case PenaltyKind::l2_mean_squared: return config.lambda * l2_mean_squared(params);
  }
  return 0.0;
}

Matrix penalty_logit_grad(const PenaltyConfig& config, const ProbMatrix& probs) {
  const std::size_t n = probs.rows();
  const std::size_t k = probs.classes();
  Matrix g(n, k, 0.0);
  if (!config.active() || config.kind == PenaltyKind::l2_mean_squared) return g;
  if (config.kind == PenaltyKind::kl_prior && config.prior.size() != k) {
    throw InvalidInput("prior length does not match class count");
  }
  const double scale = config.lambda / static_cast<double>(n);
  const double kd = static_cast<double>(k);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = probs.row(i);
    auto gi = g.row(i);
    switch (config.kind) {
      case PenaltyKind::firth_simplified:
        // d/dz_c of -sum_j log P_j is (J+1) P_c - 1.
        for (std::size_t c = 0; c < k; ++c) gi[c] = scale * (kd * p[c] - 1.0);
        break;
      case PenaltyKind::kl_uniform:
        for (std::size_t c = 0; c < k; ++c) gi[c] = scale * (p[c] - 1.0 / kd);
        break;
      case PenaltyKind::kl_prior:
        for (std::size_t c = 0; c < k; ++c) gi[c] = scale * (p[c] - config.prior[c]);
        break;
      case PenaltyKind::confidence: {
        double mean_log = 0.0;
        for (std::size_t c = 0; c < k; ++c) mean_log += p[c] * safe_log(p[c]);
        for (std::size_t c = 0; c < k; ++c) gi[c] = scale * p[c] * (safe_log(p[c]) - mean_log);
        break;
      }
      default: break;
    }
  }
  return g;
}

void add_l2_grad(const PenaltyConfig& config, std::span<const double> params,
                 std::span<double> grad) {
  if (config.kind != PenaltyKind::l2_mean_squared || !config.active() || params.empty()) return;
  const double scale = 2.0 * config.lambda / static_cast<double>(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) grad[k] += scale * params[k];
}

}  // namespace firth
