#pragma once

#include <cstdint>
#include <vector>

#include "firth/penalty.hpp"
#include "firth/train.hpp"

namespace firth {

// Randomized self-checks shared by the CLI and the test suites.

struct FimCheckOptions {
  std::size_t instances = 24;
  std::size_t samples = 4;  // N, must stay below dim
  std::size_t dim = 9;
  std::vector<std::size_t> free_classes{1, 2, 3};  // J, cycled over instances
  double param_scale = 0.7;
  std::uint64_t seed = 0;
};

struct FimCheckResult {
  double max_abs_residual = 0.0;
  std::size_t instances = 0;
};

// penalty_oracle_residual between two random parameter points on random
// Gaussian features.
FimCheckResult fim_check(const FimCheckOptions& options);

struct GradCheckOptions {
  Arch arch = Arch::logistic;
  PenaltyKind kind = PenaltyKind::kl_uniform;
  std::size_t triples = 50;
  std::size_t batch = 6;
  std::size_t dim = 5;
  std::size_t classes = 4;
  std::size_t hidden1 = 6;
  std::size_t hidden2 = 5;
  // Coordinates compared per triple; 0 compares every parameter.
  std::size_t coordinates = 0;
  double step = 1e-5;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t compared = 0;
  // MLP coordinates whose +-step probe flips a ReLU; the loss is not
  // differentiable across the flip, so they are left out.
  std::size_t skipped = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3), maximized over
// the compared coordinates of every (params, batch, penalty) triple.
GradCheckResult grad_check(const GradCheckOptions& options);

inline constexpr double kGradRelFloor = 1e-3;

}  // namespace firth
