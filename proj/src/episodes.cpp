#include "firth/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "firth/error.hpp"
#include "firth/rng.hpp"

namespace firth {

EpisodeSpec EpisodeSpec::balanced(std::size_t ways, std::size_t shots, std::uint64_t seed) {
  EpisodeSpec spec;
  spec.ways = ways;
  spec.counts.assign(ways, shots);
  spec.seed = seed;
  return spec;
}

void EpisodeSpec::validate() const {
  if (ways < 2) throw ConfigError("episode needs ways >= 2");
  if (counts.size() != ways) {
    throw ConfigError("episode has " + std::to_string(ways) + " ways but " +
                      std::to_string(counts.size()) + " support counts");
  }
  for (auto c : counts)
    if (c < 1) throw ConfigError("every support count must be >= 1");
  if (heldout_fraction.has_value() == query_per_class.has_value()) {
    throw ConfigError("set exactly one of heldout_fraction and query_per_class");
  }
  if (heldout_fraction && !(*heldout_fraction > 0.0 && *heldout_fraction < 1.0)) {
    throw ConfigError("heldout_fraction must lie in (0, 1)");
  }
  if (query_per_class && *query_per_class < 1) throw ConfigError("query_per_class must be >= 1");
  if (!fixed_classes.empty() && fixed_classes.size() != ways) {
    throw ConfigError("fixed class subset must list exactly `ways` classes");
  }
}

double EpisodeSpec::mean_shots() const {
  if (counts.empty()) return 0.0;
  return static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0})) /
         static_cast<double>(counts.size());
}

Episode sample_episode(const FeatureSet& source, const EpisodeSpec& spec) {
  spec.validate();
  std::vector<std::vector<std::size_t>> by_class(source.num_classes());
  for (std::size_t i = 0; i < source.size(); ++i) by_class[source.label(i)].push_back(i);

  std::mt19937_64 rng(derive_seed(spec.seed, "episode"));

  std::vector<std::uint32_t> classes;
  if (!spec.fixed_classes.empty()) {
    for (auto c : spec.fixed_classes) {
      if (c >= source.num_classes()) {
        throw InfeasibleEpisode("fixed class " + std::to_string(c) + " not in source");
      }
    }
    classes = spec.fixed_classes;
  } else {
    std::vector<std::uint32_t> present;
    for (std::uint32_t c = 0; c < by_class.size(); ++c)
      if (!by_class[c].empty()) present.push_back(c);
    if (present.size() < spec.ways) {
      throw InfeasibleEpisode("source has " + std::to_string(present.size()) +
                              " populated classes, episode needs " + std::to_string(spec.ways));
    }
    std::shuffle(present.begin(), present.end(), rng);
    classes.assign(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(spec.ways));
  }

  std::vector<std::size_t> support_rows, eval_rows;
  std::vector<std::uint32_t> support_labels, eval_labels;
  for (std::size_t e = 0; e < spec.ways; ++e) {
    std::vector<std::size_t> pool = by_class[classes[e]];
    std::size_t n_eval = 0;
    if (spec.query_per_class) {
      n_eval = *spec.query_per_class;
    } else {
      n_eval = static_cast<std::size_t>(
          std::llround(*spec.heldout_fraction * static_cast<double>(pool.size())));
      n_eval = std::max<std::size_t>(n_eval, 1);
    }
    const std::size_t need = n_eval + spec.counts[e];
    if (pool.size() < need) {
      throw InfeasibleEpisode("source class " + std::to_string(classes[e]) + " has " +
                              std::to_string(pool.size()) + " rows, episode needs " +
                              std::to_string(need) + " (" + std::to_string(spec.counts[e]) +
                              " support + " + std::to_string(n_eval) + " evaluation)");
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t k = 0; k < n_eval; ++k) {
      eval_rows.push_back(pool[k]);
      eval_labels.push_back(static_cast<std::uint32_t>(e));
    }
    for (std::size_t k = n_eval; k < need; ++k) {
      support_rows.push_back(pool[k]);
      support_labels.push_back(static_cast<std::uint32_t>(e));
    }
  }

  auto gather = [&](const std::vector<std::size_t>& rows, std::vector<std::uint32_t> labels) {
    Matrix x(rows.size(), source.dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto src = source.row(rows[r]);
      std::copy(src.begin(), src.end(), x.row(r).begin());
    }
    return FeatureSet(std::move(x), std::move(labels), spec.ways);
  };
  return Episode{gather(support_rows, std::move(support_labels)),
                 gather(eval_rows, std::move(eval_labels)), std::move(classes), spec.seed};
}

ImbalanceScheme parse_imbalance_scheme(std::string_view name) {
  if (name == "avg7_5" || name == "7.5") return ImbalanceScheme::avg7_5;
  if (name == "avg15" || name == "15") return ImbalanceScheme::avg15;
  throw ConfigError("unknown imbalance scheme '" + std::string(name) + "'");
}

std::vector<std::size_t> imbalanced_counts(ImbalanceScheme scheme) {
  std::vector<std::size_t> counts;
  switch (scheme) {
    case ImbalanceScheme::avg7_5:
      // Four classes at each of 2, 4, 8, 16.
      for (std::size_t c : {2, 4, 8, 16}) counts.insert(counts.end(), 4, c);
      break;
    case ImbalanceScheme::avg15:
      // Two classes at each of 1, 5, ..., 29.
      for (std::size_t c = 1; c <= 29; c += 4) counts.insert(counts.end(), 2, c);
      break;
  }
  return counts;
}

std::vector<double> empirical_class_prior(std::span<const std::size_t> counts) {
  if (counts.empty()) throw InvalidInput("need at least one class count");
  double total = 0.0;
  for (auto c : counts) {
    if (c < 1) throw InvalidInput("class counts must be >= 1");
    total += static_cast<double>(c);
  }
  std::vector<double> prior(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) prior[j] = static_cast<double>(counts[j]) / total;
  return prior;
}

FeatureSet synth_features(std::size_t classes, std::size_t dim, std::size_t per_class,
                          double separation, std::uint64_t seed) {
  if (classes < 1 || dim < 1 || per_class < 1) throw InvalidInput("synth counts must be >= 1");
  if (!(separation >= 0.0)) throw InvalidInput("separation must be >= 0");
  std::mt19937_64 mean_rng(derive_seed(seed, "synth-means"));
  std::mt19937_64 noise_rng(derive_seed(seed, "synth-noise"));
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix means(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    auto m = means.row(c);
    double n = 0.0;
    while (n < 1e-12) {
      for (auto& v : m) v = normal(mean_rng);
      n = norm2(m);
    }
    for (auto& v : m) v *= separation / n;
  }

  Matrix x(classes * per_class, dim);
  std::vector<std::uint32_t> labels(classes * per_class);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t r = 0; r < per_class; ++r) {
      const std::size_t i = c * per_class + r;
      labels[i] = static_cast<std::uint32_t>(c);
      auto row = x.row(i);
      for (std::size_t a = 0; a < dim; ++a) row[a] = means(c, a) + normal(noise_rng);
    }
  }
  return FeatureSet(std::move(x), std::move(labels), classes);
}

}  // namespace firth
