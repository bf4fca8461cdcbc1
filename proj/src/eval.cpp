#include "firth/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <set>
#include <thread>
#include <unordered_map>

#include "firth/error.hpp"
#include "firth/rng.hpp"

namespace firth {

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_preamble(std::ostream& out, std::string_view preamble) {
  std::size_t start = 0;
  while (start < preamble.size()) {
    std::size_t end = preamble.find('\n', start);
    if (end == std::string_view::npos) end = preamble.size();
    const std::string_view line = preamble.substr(start, end - start);
    // lines that are already comments are kept as they are
    out << (line.starts_with('#') ? "" : "# ") << line << '\n';
    start = end + 1;
  }
}

std::size_t resolve_workers(std::size_t requested, std::size_t jobs) {
  std::size_t w = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(w, jobs));
}

}  // namespace

Arm Arm::baseline() { return Arm{"none", {}, false}; }

Arm Arm::make(PenaltyKind kind, double lambda) {
  if (kind == PenaltyKind::none) return baseline();
  Arm arm;
  arm.label = std::string(to_string(kind)) + ":" + format_number(lambda);
  arm.penalty.kind = kind;
  arm.penalty.lambda = lambda;
  arm.prior_from_support = kind == PenaltyKind::kl_prior;
  return arm;
}

Arm parse_arm(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const PenaltyKind kind = parse_penalty_kind(name);
  if (kind == PenaltyKind::none) {
    if (colon != std::string_view::npos) throw ConfigError("baseline arm takes no coefficient");
    return Arm::baseline();
  }
  if (colon == std::string_view::npos) {
    throw ConfigError("arm '" + std::string(text) + "' needs a coefficient, e.g. firth:0.1");
  }
  const std::string value(text.substr(colon + 1));
  double lambda = 0.0;
  try {
    std::size_t used = 0;
    lambda = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw ConfigError("arm '" + std::string(text) + "' has a malformed coefficient");
  }
  if (!(lambda >= 0.0)) throw ConfigError("arm coefficient must be >= 0");
  Arm arm = Arm::make(kind, lambda);
  // Keep the user's spelling of the kind so labels match the request.
  arm.label = std::string(name) + ":" + format_number(lambda);
  return arm;
}

std::vector<TrialResult> run_trials(const FeatureSet& source, const EpisodeSpec& spec,
                                    std::span<const Arm> arms, const TrainConfig& train,
                                    std::size_t n_trials, const TrialOptions& options) {
  if (arms.empty()) throw ConfigError("need at least one arm");
  if (n_trials < 1) throw ConfigError("need at least one trial");
  spec.validate();
  train.validate();
  {
    std::set<std::string> labels;
    for (const auto& arm : arms) {
      if (!labels.insert(arm.label).second) throw ConfigError("duplicate arm label " + arm.label);
      if (!arm.prior_from_support) arm.penalty.validate();
    }
  }

  std::vector<std::vector<TrialResult>> per_trial(n_trials);
  auto run_one = [&](std::size_t t) {
    EpisodeSpec trial_spec = spec;
    trial_spec.seed = derive_seed(spec.seed, "trial", t);
    TrainConfig trial_train = train;
    trial_train.seed = derive_seed(train.seed, "trial", t);

    std::vector<TrialResult>& out = per_trial[t];
    out.reserve(arms.size());
    for (const auto& arm : arms) {
      TrialResult r;
      r.trial = t;
      r.episode_seed = trial_spec.seed;
      r.arm = arm.label;
      r.kind = arm.penalty.kind;
      r.lambda = arm.penalty.lambda;
      r.way = spec.ways;
      r.shot = spec.mean_shots();
      out.push_back(std::move(r));
    }
    Episode episode;
    try {
      episode = sample_episode(source, trial_spec);
    } catch (const Error& e) {
      for (auto& r : out) {
        r.ok = false;
        r.error = e.what();
      }
      return;
    }
    for (std::size_t a = 0; a < arms.size(); ++a) {
      TrainConfig cfg = trial_train;
      cfg.penalty = arms[a].penalty;
      if (arms[a].prior_from_support) {
        cfg.penalty.prior = empirical_class_prior(episode.support.class_counts());
      }
      try {
        const TrainedModel model = sgd_train(episode.support, cfg, options.arch);
        out[a].accuracy =
            accuracy(model.probs(episode.evaluation.features()), episode.evaluation.labels());
      } catch (const Error& e) {
        out[a].ok = false;
        out[a].error = e.what();
      }
    }
  };

  const std::size_t workers = resolve_workers(options.workers, n_trials);
  if (workers == 1) {
    for (std::size_t t = 0; t < n_trials; ++t) run_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        (void)w;
        for (std::size_t t; !failed && (t = next++) < n_trials;) {
          try {
            run_one(t);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<TrialResult> results;
  results.reserve(n_trials * arms.size());
  for (auto& trial : per_trial)
    for (auto& r : trial) results.push_back(std::move(r));
  return results;
}

MeanCi mean_ci95(std::span<const double> values) {
  MeanCi out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double n = static_cast<double>(values.size());
  out.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

namespace {

// Accuracies of two arms on trials where every arm succeeded, in trial order.
struct Paired {
  std::vector<double> a, b;
};

Paired collect_pairs(std::span<const TrialResult> results, std::string_view arm_a,
                     std::string_view arm_b) {
  std::set<std::uint64_t> failed;
  for (const auto& r : results)
    if (!r.ok) failed.insert(r.episode_seed);
  std::map<std::pair<std::size_t, std::uint64_t>, std::pair<double, double>> rows;
  std::map<std::pair<std::size_t, std::uint64_t>, int> seen;
  for (const auto& r : results) {
    if (failed.count(r.episode_seed)) continue;
    const auto key = std::make_pair(r.trial, r.episode_seed);
    if (r.arm == arm_a) {
      rows[key].first = r.accuracy;
      seen[key] |= 1;
    }
    if (r.arm == arm_b) {
      rows[key].second = r.accuracy;
      seen[key] |= 2;
    }
  }
  Paired out;
  for (const auto& [key, acc] : rows) {
    if (seen[key] != 3) continue;
    out.a.push_back(acc.first);
    out.b.push_back(acc.second);
  }
  return out;
}

}  // namespace

PairedStats paired_improvement(std::span<const TrialResult> results, std::string_view arm_a,
                               std::string_view arm_b) {
  const Paired p = collect_pairs(results, arm_a, arm_b);
  if (p.a.size() < 2) {
    throw InsufficientData("arms '" + std::string(arm_a) + "' and '" + std::string(arm_b) +
                           "' share " + std::to_string(p.a.size()) + " episodes, need >= 2");
  }
  std::vector<double> deltas(p.a.size());
  for (std::size_t k = 0; k < deltas.size(); ++k) deltas[k] = p.b[k] - p.a[k];
  const MeanCi m = mean_ci95(deltas);
  return PairedStats{m.mean, m.ci95, m.n};
}

SweepReport sweep_lambda(const FeatureSet& source_val, const FeatureSet& source_novel,
                         const SweepOptions& options) {
  if (options.grid.empty()) throw ConfigError("lambda grid must not be empty");
  if (options.kind == PenaltyKind::none) throw ConfigError("sweep needs a penalty kind");
  SweepReport report;
  report.kind = options.kind;
  report.lambdas = options.grid;
  std::sort(report.lambdas.begin(), report.lambdas.end());
  report.lambdas.erase(std::unique(report.lambdas.begin(), report.lambdas.end()),
                       report.lambdas.end());

  auto arm_for = [&](double lambda) {
    if (lambda == 0.0) return Arm::baseline();
    Arm arm = Arm::make(options.kind, lambda);
    arm.prior_from_support = options.prior_from_support;
    return arm;
  };

  std::vector<Arm> val_arms;
  for (double lambda : report.lambdas) val_arms.push_back(arm_for(lambda));
  EpisodeSpec val_spec = options.spec;
  val_spec.seed = derive_seed(options.spec.seed, "validation");
  TrainConfig val_train = options.train;
  val_train.seed = derive_seed(options.train.seed, "validation");
  report.val_results = run_trials(source_val, val_spec, val_arms, val_train, options.val_trials,
                                  options.trial_options);

  std::set<std::uint64_t> failed;
  for (const auto& r : report.val_results)
    if (!r.ok) failed.insert(r.episode_seed);
  for (const auto& arm : val_arms) {
    std::vector<double> acc;
    for (const auto& r : report.val_results)
      if (r.arm == arm.label && !failed.count(r.episode_seed)) acc.push_back(r.accuracy);
    if (acc.empty()) throw InsufficientData("no successful validation trials");
    report.val_accuracy.push_back(mean_ci95(acc).mean);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < report.lambdas.size(); ++k)
    if (report.val_accuracy[k] > report.val_accuracy[best]) best = k;
  report.selected_lambda = report.lambdas[best];

  std::vector<Arm> novel_arms{Arm::baseline()};
  if (report.selected_lambda != 0.0) novel_arms.push_back(arm_for(report.selected_lambda));
  EpisodeSpec novel_spec = options.spec;
  novel_spec.seed = derive_seed(options.spec.seed, "novel");
  TrainConfig novel_train = options.train;
  novel_train.seed = derive_seed(options.train.seed, "novel");
  report.novel_results = run_trials(source_novel, novel_spec, novel_arms, novel_train,
                                    options.novel_trials, options.trial_options);

  const std::string& after_label = novel_arms.back().label;
  const Paired p = collect_pairs(report.novel_results, "none", after_label);
  if (p.a.empty()) throw InsufficientData("no successful novel trials");
  const MeanCi before = mean_ci95(p.a);
  const MeanCi after = mean_ci95(p.b);
  report.before = before.mean;
  report.before_ci95 = before.ci95;
  report.after = after.mean;
  report.after_ci95 = after.ci95;
  report.pairs = p.a.size();
  if (novel_arms.size() == 1) {
    report.improvement = 0.0;
    report.improvement_ci95 = 0.0;
  } else {
    const PairedStats delta = paired_improvement(report.novel_results, "none", after_label);
    report.improvement = delta.mean_delta;
    report.improvement_ci95 = delta.ci95;
  }
  report.relative_improvement = report.before > 0.0 ? report.improvement / report.before : 0.0;
  return report;
}

double way_adoption_rule(const std::map<std::size_t, double>& tuned, std::size_t requested_way) {
  if (tuned.empty()) throw InvalidInput("no tuned coefficients");
  auto it = tuned.upper_bound(requested_way);
  if (it == tuned.begin()) return tuned.rbegin()->second;
  return std::prev(it)->second;
}

void write_trials_csv(std::ostream& out, std::span<const TrialResult> results,
                      std::string_view preamble) {
  write_preamble(out, preamble);
  out << "trial,episode_seed,arm,way,shot,lambda,accuracy\n";
  for (const auto& r : results) {
    out << r.trial << ',' << r.episode_seed << ',' << r.arm << ',' << r.way << ','
        << format_number(r.shot) << ',' << format_number(r.lambda) << ','
        << (r.ok ? format_number(r.accuracy) : std::string("nan")) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const SweepReport& report, std::string_view preamble) {
  write_preamble(out, preamble);
  out << "row,kind,lambda,mean_val_accuracy,before,before_ci95,after,after_ci95,improvement,"
         "improvement_ci95,relative_improvement,pairs\n";
  const std::string kind(to_string(report.kind));
  for (std::size_t k = 0; k < report.lambdas.size(); ++k) {
    out << "validation," << kind << ',' << format_number(report.lambdas[k]) << ','
        << format_number(report.val_accuracy[k]) << ",,,,,,,,\n";
  }
  const auto selected = std::find(report.lambdas.begin(), report.lambdas.end(),
                                  report.selected_lambda) - report.lambdas.begin();
  out << "selected," << kind << ',' << format_number(report.selected_lambda) << ','
      << format_number(report.val_accuracy[static_cast<std::size_t>(selected)]) << ','
      << format_number(report.before) << ',' << format_number(report.before_ci95) << ','
      << format_number(report.after) << ',' << format_number(report.after_ci95) << ','
      << format_number(report.improvement) << ',' << format_number(report.improvement_ci95)
      << ',' << format_number(report.relative_improvement) << ',' << report.pairs << '\n';
}

}  // namespace firth
