// firthbr: Firth bias reduction experiments from the command line.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "firth/checks.hpp"
#include "firth/episodes.hpp"
#include "firth/error.hpp"
#include "firth/eval.hpp"
#include "firth/geom.hpp"
#include "firth/io.hpp"
#include "firth/train.hpp"

namespace {

using namespace firth;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  std::optional<std::size_t> workers;
};

// Config file (or defaults) with global flag overrides applied.
ExperimentConfig effective_config(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? parse_config("") : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  if (!g.out.empty()) cfg.output = g.out;
  cfg.sync();
  return cfg;
}

// Writes to --out when given, else standard output.
void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out_path, text);
    std::cerr << "wrote " << out_path << '\n';
  }
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

int run_geom(const Globals& g, double beta, const std::vector<std::size_t>& sizes,
             std::size_t trials) {
  geom::ExperimentConfig cfg;
  cfg.beta_star = beta;
  cfg.sample_sizes = sizes;
  cfg.trials_per_size = trials;
  cfg.seed = g.seed.value_or(0);
  cfg.validate();
  std::cerr << "geom-demo: " << sizes.size() << " sizes x " << trials << " trials\n";
  const geom::BiasCurve curve = geom::bias_curve(cfg);

  const std::string note = trials < 30 ? "few trials: high variance, bias estimates unreliable" : "";
  std::ostringstream csv;
  csv << "# " << kVersionString << "\n# beta=" << fmt(beta, "%.17g") << " trials=" << trials
      << " seed=" << cfg.seed << "\n";
  csv << "n,mean_mle,mean_firth,bias_mle,bias_firth,se_mle,se_firth,note\n";
  for (const auto& r : curve.rows) {
    csv << r.n << ',' << fmt(r.mean_mle, "%.10g") << ',' << fmt(r.mean_firth, "%.10g") << ','
        << fmt(r.bias_mle, "%.10g") << ',' << fmt(r.bias_firth, "%.10g") << ','
        << fmt(r.se_mle, "%.10g") << ',' << fmt(r.se_firth, "%.10g") << ',' << note << '\n';
  }
  emit(g.out, csv.str());

  std::cout << "# mle_bias_slope=" << fmt(curve.mle_slope) << '\n';
  for (const auto& r : curve.rows) {
    std::cout << "# N=" << r.n << " bias_mle=" << fmt(r.bias_mle) << " bias_firth=" << fmt(r.bias_firth)
              << '\n';
  }
  return 0;
}

int run_synth(const Globals& g, std::size_t classes, std::size_t dim, std::size_t per_class,
              double separation) {
  if (g.out.empty()) throw ConfigError("synth needs --out");
  const FeatureSet set = synth_features(classes, dim, per_class, separation, g.seed.value_or(0));
  write_features(set, g.out);
  std::cerr << "wrote " << set.size() << " rows x " << dim << " dims, " << classes << " classes to "
            << g.out << '\n';
  return 0;
}

struct EpisodeOverrides {
  std::string data;
  std::optional<std::size_t> shots;
  std::optional<std::size_t> ways;
  std::string imbalance;
  std::string arch;
};

void apply(const EpisodeOverrides& o, ExperimentConfig& cfg) {
  if (!o.data.empty()) cfg.source.val_path = cfg.source.novel_path = o.data;
  if (o.ways) cfg.episode.ways = *o.ways;
  if (!o.imbalance.empty()) {
    cfg.imbalance = parse_imbalance_scheme(o.imbalance);
    cfg.episode.counts = imbalanced_counts(*cfg.imbalance);
  } else if (o.shots || o.ways) {
    const std::size_t shots = o.shots.value_or(cfg.episode.counts.empty() ? 1 : cfg.episode.counts.front());
    cfg.imbalance.reset();
    cfg.episode.counts.assign(cfg.episode.ways, shots);
  }
  if (!o.arch.empty()) cfg.arch = parse_arch(o.arch);
  cfg.sync();
  cfg.validate();
}

int run_train(const Globals& g, const EpisodeOverrides& o, const std::string& arm_text) {
  ExperimentConfig cfg = effective_config(g);
  apply(o, cfg);
  const Arm arm = arm_text.empty() ? cfg.arms.front() : parse_arm(arm_text);
  const FeatureSet source = load_source(cfg, SourceSplit::novel);
  const Episode ep = sample_episode(source, cfg.episode);
  TrainConfig train = cfg.train;
  train.penalty = arm.penalty;
  if (arm.prior_from_support) train.penalty.prior = empirical_class_prior(ep.support.class_counts());
  std::cerr << "training " << to_string(cfg.arch) << " on " << ep.support.size() << " rows\n";
  const TrainedModel model = sgd_train(ep.support, train, cfg.arch);
  const double acc = accuracy(model.probs(ep.evaluation.features()), ep.evaluation.labels());
  std::cout << "arm=" << arm.label << " support=" << ep.support.size()
            << " heldout=" << ep.evaluation.size() << " accuracy=" << fmt(acc) << '\n';
  return 0;
}

int run_trials_cmd(const Globals& g, const EpisodeOverrides& o, const std::string& arms_text,
                   std::optional<std::size_t> trials) {
  ExperimentConfig cfg = effective_config(g);
  if (!arms_text.empty()) {
    std::string list = arms_text;
    std::istringstream in(list);
    cfg.arms.clear();
    for (std::string item; std::getline(in, item, ',');) cfg.arms.push_back(parse_arm(item));
  }
  if (trials) cfg.trials = *trials;
  apply(o, cfg);
  const FeatureSet source = load_source(cfg, SourceSplit::novel);
  std::cerr << "trials: " << cfg.trials << " x " << cfg.arms.size() << " arms\n";
  const auto results = run_trials(source, cfg.episode, cfg.arms, cfg.train, cfg.trials,
                                  TrialOptions{cfg.arch, cfg.workers});
  std::ostringstream csv;
  write_trials_csv(csv, results, echo_config(cfg));
  emit(cfg.output, csv.str());

  std::size_t failed = 0;
  for (const auto& r : results) failed += r.ok ? 0 : 1;
  if (failed) std::cerr << failed << " arm runs failed; their trials are excluded from pairing\n";
  for (std::size_t a = 1; a < cfg.arms.size(); ++a) {
    try {
      const PairedStats s = paired_improvement(results, cfg.arms[0].label, cfg.arms[a].label);
      std::cerr << cfg.arms[a].label << " vs " << cfg.arms[0].label << ": " << fmt(100 * s.mean_delta)
                << "% +- " << fmt(100 * s.ci95) << "% over " << s.pairs << " pairs\n";
    } catch (const InsufficientData& e) {
      std::cerr << cfg.arms[a].label << ": " << e.what() << '\n';
    }
  }
  return 0;
}

int run_sweep_cmd(const Globals& g, const EpisodeOverrides& o, const std::string& kind,
                  const std::string& grid, const std::string& val, const std::string& novel) {
  ExperimentConfig cfg = effective_config(g);
  if (!kind.empty()) {
    cfg.sweep.kind = parse_penalty_kind(kind);
    cfg.sweep.prior_from_support = cfg.sweep.kind == PenaltyKind::kl_prior;
    if (grid.empty()) {
      cfg.sweep.grid = cfg.sweep.kind == PenaltyKind::l2_mean_squared ? kDefaultL2Grid : kDefaultFirthGrid;
    }
  }
  if (!grid.empty()) cfg.sweep.grid = parse_double_list(grid);
  if (!val.empty() || !novel.empty()) {
    if (val.empty() || novel.empty()) throw ConfigError("--val and --novel go together");
    cfg.source.val_path = val;
    cfg.source.novel_path = novel;
  }
  apply(o, cfg);
  const FeatureSet source_val = load_source(cfg, SourceSplit::validation);
  const FeatureSet source_novel = load_source(cfg, SourceSplit::novel);
  std::cerr << "sweep: " << cfg.sweep.grid.size() << " coefficients, " << cfg.sweep.val_trials
            << " validation + " << cfg.sweep.novel_trials << " novel trials\n";
  const SweepReport report = sweep_lambda(source_val, source_novel, cfg.sweep);
  std::ostringstream csv;
  write_sweep_csv(csv, report, echo_config(cfg));
  emit(cfg.output, csv.str());
  std::cerr << "selected lambda=" << fmt(report.selected_lambda) << " before=" << fmt(100 * report.before)
            << "% after=" << fmt(100 * report.after) << "% improvement=" << fmt(100 * report.improvement)
            << "% +- " << fmt(100 * report.improvement_ci95) << "%\n";
  return 0;
}

int run_fim_check(const Globals& g, std::size_t instances, double tol) {
  FimCheckOptions opt;
  opt.instances = instances;
  opt.seed = g.seed.value_or(0);
  const FimCheckResult r = fim_check(opt);
  std::cout << "instances=" << r.instances << " max_abs_residual=" << fmt(r.max_abs_residual, "%.3e")
            << '\n';
  return r.max_abs_residual <= tol ? 0 : kExitRuntime;
}

int run_grad_check(const Globals& g, const std::string& arch, const std::string& kind,
                   std::size_t triples, double tol) {
  std::vector<Arch> arches{Arch::logistic, Arch::mlp, Arch::cosine};
  if (!arch.empty()) arches = {parse_arch(arch)};
  std::vector<PenaltyKind> kinds{PenaltyKind::none, PenaltyKind::firth_simplified, PenaltyKind::kl_uniform,
                                 PenaltyKind::kl_prior, PenaltyKind::confidence,
                                 PenaltyKind::l2_mean_squared};
  if (!kind.empty()) kinds = {parse_penalty_kind(kind)};
  double worst = 0.0;
  for (Arch a : arches) {
    for (PenaltyKind k : kinds) {
      GradCheckOptions opt;
      opt.arch = a;
      opt.kind = k;
      opt.triples = triples;
      opt.seed = g.seed.value_or(0);
      const GradCheckResult r = grad_check(opt);
      worst = std::max(worst, r.max_rel_error);
      std::cout << to_string(a) << ' ' << to_string(k) << " compared=" << r.compared
                << " skipped=" << r.skipped                << " max_rel_error=" << fmt(r.max_rel_error, "%.3e") << '\n';
    }
  }
  std::cout << "max_rel_error=" << fmt(worst, "%.3e") << '\n';
  return worst <= tol ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Firth bias reduction for few-shot classifiers"};
  app.set_version_flag("--version", std::string(firth::kVersionString));
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Root random seed")->expected(1);
  app.add_option("--out", g.out, "Output file (standard output when omitted)");
  app.add_option("--config", g.config, "Experiment config file")->check(CLI::ExistingFile);
  app.add_option("--workers", g.workers, "Trial worker threads (default: all cores)");

  double beta = 0.5;
  std::vector<std::size_t> sizes{4, 8, 16, 32, 64, 128};
  std::size_t geom_trials = 200000;
  auto* geom_cmd = app.add_subcommand("geom-demo", "Geometric MLE vs Firth bias curve");
  geom_cmd->add_option("--beta", beta, "True success probability")->check(CLI::Range(0.0, 1.0));
  geom_cmd->add_option("--sizes", sizes, "Sample sizes")->delimiter(',');
  geom_cmd->add_option("--trials", geom_trials, "Trials per sample size");

  std::size_t s_classes = 20, s_dim = 32, s_per_class = 100;
  double s_sep = 3.0;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic Gaussian feature set");
  synth_cmd->add_option("--classes", s_classes);
  synth_cmd->add_option("--dim", s_dim);
  synth_cmd->add_option("--per-class", s_per_class);
  synth_cmd->add_option("--separation", s_sep);

  EpisodeOverrides eo;
  auto add_episode_flags = [&](CLI::App* cmd) {
    cmd->add_option("--data", eo.data, "Feature file (.csv or FSF1)")->check(CLI::ExistingFile);
    cmd->add_option("--shots", eo.shots, "Support rows per class");
    cmd->add_option("--ways", eo.ways, "Classes per episode");
    cmd->add_option("--imbalance", eo.imbalance, "avg7_5 or avg15");
    cmd->add_option("--arch", eo.arch, "logistic, mlp or cosine");
  };

  std::string arm;
  auto* train_cmd = app.add_subcommand("train", "Train one classifier on one episode");
  add_episode_flags(train_cmd);
  train_cmd->add_option("--arm", arm, "Penalty arm, e.g. firth:0.1");

  std::string arms;
  std::optional<std::size_t> n_trials;
  auto* trials_cmd = app.add_subcommand("trials", "Matched trials over penalty arms");
  add_episode_flags(trials_cmd);
  trials_cmd->add_option("--arms", arms, "Comma list, e.g. none,firth:0.1,l2:30");
  trials_cmd->add_option("--trials", n_trials);

  std::string kind, grid, val, novel;
  auto* sweep_cmd = app.add_subcommand("sweep", "Validate a coefficient grid, report on novel classes");
  add_episode_flags(sweep_cmd);
  sweep_cmd->add_option("--kind", kind, "Penalty kind");
  sweep_cmd->add_option("--grid", grid, "Comma list of coefficients");
  sweep_cmd->add_option("--val", val, "Validation-class features")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--novel", novel, "Novel-class features")->check(CLI::ExistingFile);

  std::size_t instances = 24;
  double fim_tol = 1e-6;
  auto* fim_cmd = app.add_subcommand("fim-check", "Check the simplified penalty against the FIM");
  fim_cmd->add_option("--instances", instances);
  fim_cmd->add_option("--tol", fim_tol);

  std::string gc_arch, gc_kind;
  std::size_t triples = 50;
  double grad_tol = 1e-5;
  auto* grad_cmd = app.add_subcommand("grad-check", "Analytic vs finite-difference gradients");
  grad_cmd->add_option("--arch", gc_arch);
  grad_cmd->add_option("--kind", gc_kind);
  grad_cmd->add_option("--triples", triples);
  grad_cmd->add_option("--tol", grad_tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*geom_cmd) return run_geom(g, beta, sizes, geom_trials);
    if (*synth_cmd) return run_synth(g, s_classes, s_dim, s_per_class, s_sep);
    if (*train_cmd) return run_train(g, eo, arm);
    if (*trials_cmd) return run_trials_cmd(g, eo, arms, n_trials);
    if (*sweep_cmd) return run_sweep_cmd(g, eo, kind, grid, val, novel);
    if (*fim_cmd) return run_fim_check(g, instances, fim_tol);
    if (*grad_cmd) return run_grad_check(g, gc_arch, gc_kind, triples, grad_tol);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
