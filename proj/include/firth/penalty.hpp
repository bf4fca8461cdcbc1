#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "firth/linalg.hpp"
#include "firth/model.hpp"

namespace firth {

enum class PenaltyKind {
  none,
  firth_simplified,  // -(1/N) sum_i sum_j log P_ij
  kl_uniform,        // (1/N) sum_i KL(U || P_i)
  kl_prior,          // (1/N) sum_i KL(prior || P_i)
  confidence,        // (1/N) sum_i KL(P_i || U)
  l2_mean_squared,   // mean of squared parameters
};

std::string_view to_string(PenaltyKind kind);
// Accepts the names above plus the aliases "firth" (= kl_uniform), "l2",
// "unigram" (= kl_prior) and "baseline" (= none).
PenaltyKind parse_penalty_kind(std::string_view name);

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::none;
  double lambda = 0.0;
  std::vector<double> prior;  // required iff kind == kl_prior

  // Throws ConfigError on lambda < 0, a missing/extra prior, or a prior
  // that is not a strictly positive probability vector.
  void validate() const;
  bool active() const noexcept { return kind != PenaltyKind::none && lambda != 0.0; }
};

// (1/N) sum_i sum_j log P_ij. Maximal (= -(J+1) log(J+1)) at uniform rows.
double firth_simplified(const ProbMatrix& probs);
// (1/N) sum_i KL(prior || P_i).
double kl_to_prior(const ProbMatrix& probs, std::span<const double> prior);
double kl_uniform(const ProbMatrix& probs);
// (1/N) sum_i KL(P_i || U).
double confidence_penalty(const ProbMatrix& probs);

double l2_mean_squared(std::span<const double> params);
inline double l2_mean_squared(const LogisticParams& p) { return l2_mean_squared(p.flat()); }
inline double l2_mean_squared(const MlpParams& p) { return l2_mean_squared(p.flat()); }

// J x J block of the multinomial FIM weight matrix for one sample:
// diag(P_1:J) - P_1:J P_1:J^T over the non-reference classes.
SymMatrix block_m(std::span<const double> prob_row);

// dJ x dJ Fisher information of the logistic model; block (j, k) is
// sum_i P_ij (delta_jk - P_ik) x_i x_i^T.
SymMatrix build_fim(const LogisticParams& params, const Matrix& x);

// Difference of amended log-determinants of the FIM at two parameter
// points minus N times the difference of firth_simplified at those points.
// The data-only term log det(S^2) cancels, so the result should be ~0.
// Throws DegenerateData when either FIM rank differs from N*J.
double penalty_oracle_residual(const LogisticParams& params_a, const LogisticParams& params_b,
                               const Matrix& x, double rel_tol = kDefaultRankTol);

// Loss contribution lambda * penalty (to be minimized). For
// firth_simplified this is -lambda * firth_simplified(probs).
double penalty_value(const PenaltyConfig& config, const ProbMatrix& probs,
                     std::span<const double> params);

// d penalty_value / d logits for the probability-based kinds (N x K);
// zeros for none and l2_mean_squared.
Matrix penalty_logit_grad(const PenaltyConfig& config, const ProbMatrix& probs);
// Adds d penalty_value / d params for l2_mean_squared to grad.
void add_l2_grad(const PenaltyConfig& config, std::span<const double> params,
                 std::span<double> grad);

}  // namespace firth
