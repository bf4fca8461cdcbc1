#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "firth/episodes.hpp"
#include "firth/penalty.hpp"
#include "firth/train.hpp"

namespace firth {

// Firth coefficients for the KL(U || P) form, and L2 coefficients for the
// mean-squared normalization.
inline const std::vector<double> kDefaultFirthGrid{0, 0.01, 0.03, 0.1, 0.3, 1, 3, 10};
inline const std::vector<double> kDefaultL2Grid{0, 1, 3, 10, 30, 100, 300, 1000};

// One penalty configuration evaluated in every trial.
struct Arm {
  std::string label;
  PenaltyConfig penalty;
  // kl_prior toward the support set's empirical class frequencies
  // (unigram label smoothing); the prior is filled in per episode.
  bool prior_from_support = false;

  static Arm baseline();
  static Arm make(PenaltyKind kind, double lambda);
};

// "none", "firth:0.1", "kl_uniform:1", "l2:30", "unigram:0.3", ...
Arm parse_arm(std::string_view text);

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t episode_seed = 0;
  std::string arm;
  PenaltyKind kind = PenaltyKind::none;
  double lambda = 0.0;
  std::size_t way = 0;
  double shot = 0.0;  // mean support count per class
  double accuracy = 0.0;
  bool ok = true;
  std::string error;
};

struct TrialOptions {
  Arch arch = Arch::logistic;
  std::size_t workers = 0;  // 0 = hardware concurrency
};

// Trial t samples one episode from derive_seed(spec.seed, "trial", t) and
// trains every arm from the same derive_seed(train.seed, "trial", t), so
// arms differ only in their penalty. Per-trial failures are recorded in the
// results (ok = false), not thrown. Output order is (trial, arm) whatever
// the worker count.
std::vector<TrialResult> run_trials(const FeatureSet& source, const EpisodeSpec& spec,
                                    std::span<const Arm> arms, const TrainConfig& train,
                                    std::size_t n_trials, const TrialOptions& options = {});

struct PairedStats {
  double mean_delta = 0.0;
  double ci95 = 0.0;  // 1.96 * sd / sqrt(n)
  std::size_t pairs = 0;
};

// Paired acc_b - acc_a over episodes where both arms (and every other arm of
// that trial) succeeded. Throws InsufficientData below two pairs.
PairedStats paired_improvement(std::span<const TrialResult> results, std::string_view arm_a,
                               std::string_view arm_b);

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;
  std::size_t n = 0;
};
MeanCi mean_ci95(std::span<const double> values);

struct SweepOptions {
  PenaltyKind kind = PenaltyKind::kl_uniform;
  std::vector<double> grid = kDefaultFirthGrid;
  bool prior_from_support = false;
  EpisodeSpec spec;
  TrainConfig train;
  std::size_t val_trials = 100;
  std::size_t novel_trials = 400;
  TrialOptions trial_options;
};

struct SweepReport {
  PenaltyKind kind = PenaltyKind::kl_uniform;
  std::vector<double> lambdas;
  std::vector<double> val_accuracy;  // mean validation accuracy per lambda
  double selected_lambda = 0.0;
  // Novel-set results at the selected lambda, over paired trials.
  double before = 0.0, before_ci95 = 0.0;
  double after = 0.0, after_ci95 = 0.0;
  double improvement = 0.0, improvement_ci95 = 0.0;
  double relative_improvement = 0.0;  // improvement / before
  std::size_t pairs = 0;
  std::vector<TrialResult> val_results;
  std::vector<TrialResult> novel_results;
};

// Picks the lambda with the best mean validation accuracy (ties go to the
// smaller lambda), then compares it with the unpenalized baseline on the
// novel source.
SweepReport sweep_lambda(const FeatureSet& source_val, const FeatureSet& source_novel,
                         const SweepOptions& options);

// Exact way if tuned; else the largest tuned way below the request; else the
// largest tuned way.
double way_adoption_rule(const std::map<std::size_t, double>& tuned, std::size_t requested_way);

// CSV writers. `preamble` lines are emitted first, each prefixed by "# ".
void write_trials_csv(std::ostream& out, std::span<const TrialResult> results,
                      std::string_view preamble = {});
void write_sweep_csv(std::ostream& out, const SweepReport& report, std::string_view preamble = {});

}  // namespace firth
