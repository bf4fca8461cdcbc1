#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "firth/episodes.hpp"
#include "firth/error.hpp"
#include "firth/train.hpp"
#include "support.hpp"

using namespace firth;

namespace {

// Feature 0 holds the source row index, so episode rows can be traced back.
FeatureSet indexed_source(std::size_t classes, std::size_t per_class, std::size_t dim = 3) {
  Matrix x(classes * per_class, dim);
  std::vector<std::uint32_t> labels(classes * per_class);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    labels[i] = static_cast<std::uint32_t>(i % classes);
    x(i, 0) = static_cast<double>(i);
    for (std::size_t a = 1; a < dim; ++a) x(i, a) = static_cast<double>(labels[i]);
  }
  return FeatureSet(std::move(x), std::move(labels), classes);
}

std::set<std::size_t> source_rows(const FeatureSet& part) {
  std::set<std::size_t> rows;
  for (std::size_t i = 0; i < part.size(); ++i) rows.insert(static_cast<std::size_t>(part.row(i)[0]));
  return rows;
}

}  // namespace

TEST_CASE("spec validation") {
  auto s = EpisodeSpec::balanced(16, 5);
  CHECK(s.counts == std::vector<std::size_t>(16, 5));
  CHECK(s.heldout_fraction == kDefaultHeldoutFraction);
  CHECK(s.mean_shots() == 5.0);
  CHECK_NOTHROW(s.validate());
  s.ways = 1;
  s.counts = {1};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = EpisodeSpec::balanced(4, 5);
  s.counts[2] = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = EpisodeSpec::balanced(4, 5);
  s.counts.pop_back();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = EpisodeSpec::balanced(4, 5);
  s.query_per_class = 3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.heldout_fraction.reset();
  CHECK_NOTHROW(s.validate());
  s = EpisodeSpec::balanced(4, 5);
  s.heldout_fraction = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("full-take episode keeps ninety percent per class as support") {
  const FeatureSet source = indexed_source(5, 40);
  EpisodeSpec spec = EpisodeSpec::balanced(5, 36, 3);
  const Episode ep = sample_episode(source, spec);
  CHECK(ep.support.size() == 5 * 36);
  CHECK(ep.evaluation.size() == 5 * 4);
  CHECK(ep.support.class_counts() == std::vector<std::size_t>(5, 36));
  CHECK(ep.evaluation.class_counts() == std::vector<std::size_t>(5, 4));

  spec.counts.assign(5, 40);
  try {
    sample_episode(source, spec);
    FAIL("expected an infeasible episode");
  } catch (const InfeasibleEpisode& e) {
    CHECK(std::string(e.what()).find("source class") != std::string::npos);
  }
}

TEST_CASE("episode structure invariants") {
  const FeatureSet source = indexed_source(20, 30);
  const FeatureSet copy = source;
  testgen::Gen gen(71);
  for (int t = 0; t < 50; ++t) {
    const std::size_t ways = gen.index(2, 20);
    EpisodeSpec spec = EpisodeSpec::balanced(ways, 1, gen.bits());
    for (auto& c : spec.counts) c = gen.index(1, 20);
    if (t % 2) {
      spec.heldout_fraction.reset();
      spec.query_per_class = gen.index(1, 5);
    }
    const Episode ep = sample_episode(source, spec);
    INFO("trial " << t);
    const auto s = source_rows(ep.support), e = source_rows(ep.evaluation);
    CHECK(s.size() == ep.support.size());
    for (auto r : s) CHECK(e.count(r) == 0);
    CHECK(ep.support.class_counts() == spec.counts);
    CHECK(ep.support.num_classes() == ways);
    CHECK(ep.class_map.size() == ways);
    CHECK(std::set<std::uint32_t>(ep.class_map.begin(), ep.class_map.end()).size() == ways);
    for (std::size_t i = 0; i < ep.support.size(); ++i) {
      const auto row = static_cast<std::size_t>(ep.support.row(i)[0]);
      CHECK(source.label(row) == ep.class_map[ep.support.label(i)]);
    }
    const auto eval_counts = ep.evaluation.class_counts();
    const std::size_t expected_eval = spec.query_per_class ? *spec.query_per_class : 3;
    CHECK(eval_counts == std::vector<std::size_t>(ways, expected_eval));
    CHECK(ep.seed == spec.seed);
  }
  CHECK(source == copy);
}

TEST_CASE("episodes are reproducible and seed-sensitive") {
  const FeatureSet source = indexed_source(20, 600, 2);
  const EpisodeSpec spec = EpisodeSpec::balanced(16, 5, 1234);
  CHECK(sample_episode(source, spec) == sample_episode(source, spec));

  std::size_t collisions = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    EpisodeSpec a = EpisodeSpec::balanced(16, 5, 2 * k);
    EpisodeSpec b = EpisodeSpec::balanced(16, 5, 2 * k + 1);
    if (source_rows(sample_episode(source, a).support) == source_rows(sample_episode(source, b).support)) {
      ++collisions;
    }
  }
  CHECK(collisions == 0);
}

TEST_CASE("fixed class subset") {
  const FeatureSet source = indexed_source(10, 20);
  EpisodeSpec spec = EpisodeSpec::balanced(3, 2, 9);
  spec.fixed_classes = {7, 2, 5};
  const Episode ep = sample_episode(source, spec);
  CHECK(ep.class_map == std::vector<std::uint32_t>{7, 2, 5});
  spec.fixed_classes = {7, 2, 12};
  CHECK_THROWS_AS(sample_episode(source, spec), InfeasibleEpisode);
  spec.fixed_classes = {7, 2};
  CHECK_THROWS_AS(sample_episode(source, spec), ConfigError);
  CHECK_THROWS_AS(sample_episode(source, EpisodeSpec::balanced(11, 1)), InfeasibleEpisode);
}

TEST_CASE("imbalanced count vectors") {
  const auto a = imbalanced_counts(ImbalanceScheme::avg7_5);
  const auto b = imbalanced_counts(ImbalanceScheme::avg15);
  CHECK(a == std::vector<std::size_t>{2, 2, 2, 2, 4, 4, 4, 4, 8, 8, 8, 8, 16, 16, 16, 16});
  CHECK(b == std::vector<std::size_t>{1, 1, 5, 5, 9, 9, 13, 13, 17, 17, 21, 21, 25, 25, 29, 29});
  CHECK(std::accumulate(a.begin(), a.end(), 0.0) / 16 == 7.5);
  CHECK(std::accumulate(b.begin(), b.end(), 0.0) / 16 == 15.0);
  CHECK(parse_imbalance_scheme("avg7_5") == ImbalanceScheme::avg7_5);
  CHECK(parse_imbalance_scheme("avg15") == ImbalanceScheme::avg15);
  CHECK_THROWS_AS(parse_imbalance_scheme("avg3"), ConfigError);

  // evaluation stays balanced under imbalanced support
  const FeatureSet source = indexed_source(16, 60);
  EpisodeSpec spec = EpisodeSpec::balanced(16, 1, 3);
  spec.counts = b;
  const Episode ep = sample_episode(source, spec);
  CHECK(ep.support.class_counts() == b);
  CHECK(ep.evaluation.class_counts() == std::vector<std::size_t>(16, 6));
}

TEST_CASE("empirical class prior") {
  const std::vector<std::size_t> balanced(5, 3);
  for (double p : empirical_class_prior(balanced)) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  const auto counts = imbalanced_counts(ImbalanceScheme::avg7_5);
  const auto prior = empirical_class_prior(counts);
  for (std::size_t k = 0; k < 16; ++k) CHECK(prior[k] == doctest::Approx(counts[k] / 120.0).epsilon(1e-15));
  testgen::Gen gen(72);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::size_t> c(gen.index(1, 30));
    for (auto& v : c) v = gen.index(1, 100);
    const auto p = empirical_class_prior(c);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
  }
}

TEST_CASE("synthetic features") {
  const FeatureSet a = synth_features(4, 8, 10, 2.0, 5);
  CHECK(a.size() == 40);
  CHECK(a.dim() == 8);
  CHECK(a.class_counts() == std::vector<std::size_t>(4, 10));
  CHECK(a == synth_features(4, 8, 10, 2.0, 5));
  CHECK(!(a == synth_features(4, 8, 10, 2.0, 6)));
  CHECK_THROWS_AS(synth_features(0, 8, 10, 2.0, 5), InvalidInput);
  CHECK_THROWS_AS(synth_features(4, 8, 10, -1.0, 5), InvalidInput);
}

TEST_CASE("synthetic separation controls difficulty") {
  TrainConfig train;
  train.epochs = 100;

  // no separation: held-out accuracy near chance over many evaluation rows
  const FeatureSet flat = synth_features(16, 32, 400, 0.0, 8);
  EpisodeSpec spec = EpisodeSpec::balanced(16, 25, 4);
  const Episode ep0 = sample_episode(flat, spec);
  const TrainedModel m0 = sgd_train(ep0.support, train, Arch::logistic);
  const double acc0 = accuracy(m0.probs(ep0.evaluation.features()), ep0.evaluation.labels());
  const double n = static_cast<double>(ep0.evaluation.size());
  const double sigma = std::sqrt((1.0 / 16) * (15.0 / 16) / n);
  CHECK(std::abs(acc0 - 1.0 / 16) <= 3 * sigma);

  // wide separation: easy
  train.epochs = 0;
  const FeatureSet wide = synth_features(16, 32, 100, 20.0, 9);
  const Episode ep1 = sample_episode(wide, spec);
  const TrainedModel m1 = sgd_train(ep1.support, train, Arch::logistic);
  CHECK(accuracy(m1.probs(ep1.evaluation.features()), ep1.evaluation.labels()) > 0.95);
}
