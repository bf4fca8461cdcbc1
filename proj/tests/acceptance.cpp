// Acceptance suite: one PASS/FAIL line per criterion, exit 1 on any FAIL.
// Usage: acceptance [criterion ...]   (default: all seven)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "firth/checks.hpp"
#include "firth/cosine.hpp"
#include "firth/episodes.hpp"
#include "firth/eval.hpp"
#include "firth/geom.hpp"
#include "firth/penalty.hpp"
#include "firth/rng.hpp"
#include "firth/train.hpp"

using namespace firth;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// Determinant by Gaussian elimination with partial pivoting.
double lu_determinant(std::vector<double> a, std::size_t n) {
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (a[piv * n + c] == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      det = -det;
    }
    det *= a[c * n + c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
    }
  }
  return det;
}

void geometric_bias_law(Outcome& out) {
  geom::ExperimentConfig cfg;
  cfg.trials_per_size = 200000;
  cfg.seed = 2024;
  const geom::BiasCurve curve = geom::bias_curve(cfg);
  out.detail << "beta*=" << cfg.beta_star << " trials/N=" << cfg.trials_per_size
             << " slope=" << curve.mle_slope;
  out.require(curve.mle_slope >= -1.15 && curve.mle_slope <= -0.85, "slope in [-1.15, -0.85]");
  for (const auto& row : curve.rows) {
    if (row.n > 16) continue;
    const double ratio = std::abs(row.bias_firth) / std::abs(row.bias_mle);
    out.detail << " N=" << row.n << ":|firth|/|mle|=" << ratio;
    out.require(ratio < 0.3, "|firth bias| < 0.3 |mle bias| at N=" + std::to_string(row.n));
  }
}

void penalty_identity(Outcome& out) {
  FimCheckOptions o;
  o.instances = 24;
  o.samples = 4;
  o.dim = 9;
  o.free_classes = {1, 2, 3};
  o.seed = 7;
  const FimCheckResult r = fim_check(o);
  out.detail << "instances=" << r.instances << " (N=4, d=9, J=1..3) max|residual|="
             << r.max_abs_residual;
  out.require(r.instances >= 20, ">= 20 instances");
  out.require(r.max_abs_residual <= 1e-6, "residual <= 1e-6");

  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 0.8);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng() % 6);
    std::vector<double> p(k);
    double total = 0.0;
    for (double& v : p) total += (v = std::exp(normal(rng)));
    for (double& v : p) v /= total;
    const SymMatrix m = block_m(p);
    const double prod = std::accumulate(p.begin(), p.end(), 1.0, std::multiplies<>());
    worst = std::max(worst, std::abs(lu_determinant(m.entries(), m.size()) - prod));
  }
  out.detail << " rows=1000 max|det(M)-prod(P)|=" << worst;
  out.require(worst <= 1e-12, "det lemma within 1e-12");
}

void gradient_correctness(Outcome& out) {
  const std::vector<PenaltyKind> kinds{PenaltyKind::none, PenaltyKind::firth_simplified,
                                       PenaltyKind::kl_uniform, PenaltyKind::kl_prior,
                                       PenaltyKind::confidence, PenaltyKind::l2_mean_squared};
  for (Arch arch : {Arch::logistic, Arch::mlp, Arch::cosine}) {
    double worst = 0.0;
    std::size_t compared = 0, skipped = 0;
    for (PenaltyKind kind : kinds) {
      GradCheckOptions o;
      o.arch = arch;
      o.kind = kind;
      o.triples = 50;
      o.seed = derive_seed(11, std::string(to_string(arch)) + "/" + std::string(to_string(kind)));
      const GradCheckResult r = grad_check(o);
      worst = std::max(worst, r.max_rel_error);
      compared += r.compared;
      skipped += r.skipped;
      out.require(r.max_rel_error <= 1e-5, std::string(to_string(arch)) + "/" + std::string(to_string(kind)));
    }
    out.detail << to_string(arch) << ": max_rel=" << worst << " compared=" << compared
               << " kink_skipped=" << skipped << "; ";
  }
  out.detail << "50 triples x 6 kinds each";
}

void kl_firth_equivalence(Outcome& out) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  Matrix x(12, 3);
  std::vector<std::uint32_t> labels(12);
  for (std::size_t i = 0; i < 12; ++i) {
    labels[i] = static_cast<std::uint32_t>(i % 3);
    for (std::size_t a = 0; a < 3; ++a) x(i, a) = normal(rng) + (a == labels[i] ? 1.5 : 0.0);
  }
  const FeatureSet toy(std::move(x), std::move(labels), 3);
  double worst = 0.0;
  for (double lambda : {0.01, 0.1, 1.0}) {
    TrainConfig c;
    c.seed = 17;
    c.penalty.kind = PenaltyKind::firth_simplified;
    c.penalty.lambda = lambda;
    const auto a = std::get<LogisticParams>(sgd_train(toy, c, Arch::logistic).params);
    c.penalty.kind = PenaltyKind::kl_uniform;
    c.penalty.lambda = lambda * 3.0;
    const auto b = std::get<LogisticParams>(sgd_train(toy, c, Arch::logistic).params);
    for (std::size_t k = 0; k < a.betas.size(); ++k) worst = std::max(worst, std::abs(a.betas[k] - b.betas[k]));
  }
  out.detail << "3-class toy, lambda in {0.01,0.1,1}, 400 epochs: max|diff|=" << worst;
  out.require(worst <= 1e-6, "max-abs <= 1e-6");
}

void cosine_invariance(Outcome& out) {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> normal;
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng() % (hi - lo + 1)); };
  double worst_p = 0.0;
  bool argmax_same = true;
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = pick(2, 8), d = pick(2, 16), n = pick(1, 8);
    CosineParams p;
    p.num_classes = k;
    p.dim = d;
    p.scale = 0.5 + 20.0 * std::uniform_real_distribution<double>()(rng);
    p.weights.resize(k * d);
    for (double& v : p.weights) v = normal(rng);
    Matrix x(n, d);
    for (double& v : x.values()) v = normal(rng);
    CosineParams q = p;
    for (std::size_t j = 0; j < k; ++j) {
      const double c = std::exp(2.0 * normal(rng));
      for (double& v : q.weight(j)) v *= c;
    }
    Matrix y = x;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = std::exp(2.0 * normal(rng));
      for (double& v : y.row(i)) v *= c;
    }
    const ProbMatrix base = cosine_probs(p, x);
    for (const ProbMatrix& other : {cosine_probs(q, x), cosine_probs(p, y), cosine_probs(q, y)}) {
      for (std::size_t e = 0; e < base.matrix().values().size(); ++e)
        worst_p = std::max(worst_p, std::abs(base.matrix().values()[e] - other.matrix().values()[e]));
      argmax_same = argmax_same && predict(base) == predict(other);
    }
  }
  out.detail << "200 instances: max|dP|=" << worst_p << " argmax " << (argmax_same ? "unchanged" : "changed");
  out.require(worst_p <= 1e-12, "probabilities within 1e-12");
  out.require(argmax_same, "argmax unchanged");

  double worst_j = 0.0;
  const double h = 1e-6;
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = pick(2, 12);
    std::vector<double> beta(d), v(d);
    for (double& b : beta) b = normal(rng);
    for (double& a : v) a = normal(rng);
    const auto analytic = jacobian_block_check(beta, v);
    std::vector<double> up(beta), down(beta);
    for (std::size_t a = 0; a < d; ++a) {
      up[a] += h * v[a];
      down[a] -= h * v[a];
    }
    const double nu = norm2(up), nd = norm2(down);
    for (std::size_t a = 0; a < d; ++a) {
      const double fd = (up[a] / nu - down[a] / nd) / (2.0 * h);
      worst_j = std::max(worst_j, std::abs(fd - analytic[a]));
    }
  }
  out.detail << "; jacobian vs central differences (200 vectors): max|diff|=" << worst_j;
  out.require(worst_j <= 1e-6, "jacobian within 1e-6");
}

void protocol_fidelity(Outcome& out) {
  const auto a = imbalanced_counts(ImbalanceScheme::avg7_5);
  const auto b = imbalanced_counts(ImbalanceScheme::avg15);
  out.require(a == std::vector<std::size_t>{2, 2, 2, 2, 4, 4, 4, 4, 8, 8, 8, 8, 16, 16, 16, 16},
              "avg7_5 vector");
  out.require(b == std::vector<std::size_t>{1, 1, 5, 5, 9, 9, 13, 13, 17, 17, 21, 21, 25, 25, 29, 29},
              "avg15 vector");
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  out.detail << "imbalance means " << ma << "/" << mb;
  out.require(ma == 7.5 && mb == 15.0, "means 7.5 and 15");

  const TrainConfig t;
  const EpisodeSpec spec;
  out.require(t.learning_rate == 0.005, "lr 0.005");
  out.require(t.batch_size == 10, "batch 10");
  out.require(t.effective_epochs(Arch::logistic) == 400 && t.effective_epochs(Arch::cosine) == 400,
              "400 epochs for one-layer models");
  out.require(t.effective_epochs(Arch::mlp) == 100, "100 epochs for mlp");
  out.require(spec.heldout_fraction && *spec.heldout_fraction == 0.10, "90/10 split");
  out.require(kDefaultFirthGrid == std::vector<double>{0, 0.01, 0.03, 0.1, 0.3, 1, 3, 10}, "firth grid");
  out.require(kDefaultL2Grid == std::vector<double>{0, 1, 3, 10, 30, 100, 300, 1000}, "l2 grid");
  out.detail << "; lr=" << t.learning_rate << " batch=" << t.batch_size << " epochs="
             << t.effective_epochs(Arch::logistic) << "/" << t.effective_epochs(Arch::mlp)
             << " heldout=" << *spec.heldout_fraction;

  const FeatureSet source = synth_features(20, 32, 60, 3.0, 99);
  EpisodeSpec es = EpisodeSpec::balanced(16, 5, 5);
  Arm first = Arm::make(PenaltyKind::kl_uniform, 0.1);
  Arm second = first;
  first.label = "self-a";
  second.label = "self-b";
  const std::vector<Arm> arms{first, second};
  TrainConfig tc;
  tc.seed = 6;
  const auto results = run_trials(source, es, arms, tc, 100);
  const PairedStats self = paired_improvement(results, "self-a", "self-b");
  bool identical = true;
  for (std::size_t i = 0; i + 1 < results.size(); i += 2)
    identical = identical && results[i].accuracy == results[i + 1].accuracy;
  out.detail << "; arm-vs-itself over " << self.pairs << " trials: delta=" << self.mean_delta
             << " ci=" << self.ci95;
  out.require(self.pairs == 100, "100 paired trials");
  out.require(self.mean_delta == 0.0 && self.ci95 == 0.0 && identical, "delta exactly 0");
}

void synthetic_never_hurts(Outcome& out) {
  // (a) 16-way, dim 32, separation 3, validation-selected lambda.
  const FeatureSet val = synth_features(20, 32, 100, 3.0, derive_seed(31, "synth-val"));
  const FeatureSet novel = synth_features(20, 32, 100, 3.0, derive_seed(31, "synth-novel"));
  for (std::size_t shots : {10, 15, 20, 25}) {
    SweepOptions o;
    o.kind = PenaltyKind::kl_uniform;
    o.spec = EpisodeSpec::balanced(16, shots, derive_seed(32, "episodes", shots));
    o.train.seed = derive_seed(32, "train", shots);
    o.val_trials = 50;
    o.novel_trials = 400;
    const SweepReport r = sweep_lambda(val, novel, o);
    const double lower = r.improvement - r.improvement_ci95;
    out.detail << shots << "-shot: lambda*=" << r.selected_lambda << " before=" << r.before
               << " delta=" << r.improvement << " ci_lo=" << lower << " pairs=" << r.pairs << "; ";
    out.require(r.pairs >= 400, std::to_string(shots) + "-shot >= 400 pairs");
    out.require(r.improvement >= 0.0, std::to_string(shots) + "-shot delta >= 0");
    out.require(lower >= -0.001, std::to_string(shots) + "-shot CI lower >= -0.1%");
  }

  // (b) overfitting regime: 2 shots in 128 dimensions.
  const FeatureSet oval = synth_features(20, 128, 40, 6.0, derive_seed(33, "synth-val"));
  const FeatureSet onovel = synth_features(20, 128, 40, 6.0, derive_seed(33, "synth-novel"));
  SweepOptions o;
  o.kind = PenaltyKind::kl_uniform;
  o.spec = EpisodeSpec::balanced(16, 2, derive_seed(34, "episodes"));
  o.train.seed = derive_seed(34, "train");
  o.val_trials = 100;
  o.novel_trials = 400;
  const SweepReport r = sweep_lambda(oval, onovel, o);
  out.detail << "overfit (2-shot, dim 128, sep 6): val acc";
  for (std::size_t k = 0; k < r.lambdas.size(); ++k) out.detail << " " << r.lambdas[k] << ":" << r.val_accuracy[k];
  out.detail << " -> lambda*=" << r.selected_lambda << " novel delta=" << r.improvement << " +- "
             << r.improvement_ci95;
  out.require(r.selected_lambda > 0.0, "lambda > 0 selected in the overfitting regime");
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "geometric bias law", geometric_bias_law},
      {2, "firth penalty identity", penalty_identity},
      {3, "gradient correctness", gradient_correctness},
      {4, "kl/firth equivalence", kl_firth_equivalence},
      {5, "cosine invariance", cosine_invariance},
      {6, "protocol fidelity", protocol_fidelity},
      {7, "synthetic never-hurts and lambda selection", synthetic_never_hurts},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  bool all_pass = true;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all_pass = all_pass && out.pass;
    std::printf("%s %d %s (%.1fs): %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                out.detail.str().c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
