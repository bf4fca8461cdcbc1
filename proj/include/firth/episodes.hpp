#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "firth/model.hpp"

namespace firth {

inline constexpr double kDefaultHeldoutFraction = 0.10;
inline constexpr std::size_t kDefaultWays = 16;

struct EpisodeSpec {
  std::size_t ways = kDefaultWays;
  std::vector<std::size_t> counts;  // support rows per episode class
  // Exactly one of these is set.
  std::optional<double> heldout_fraction = kDefaultHeldoutFraction;
  std::optional<std::size_t> query_per_class;
  // When non-empty, these source classes are used (in order) instead of a
  // random draw of `ways` classes.
  std::vector<std::uint32_t> fixed_classes;
  std::uint64_t seed = 0;

  static EpisodeSpec balanced(std::size_t ways, std::size_t shots, std::uint64_t seed = 0);
  void validate() const;
  double mean_shots() const;
};

struct Episode {
  FeatureSet support;
  FeatureSet evaluation;
  std::vector<std::uint32_t> class_map;  // episode class -> source class
  std::uint64_t seed = 0;

  bool operator==(const Episode&) const = default;
};

// Per class: shuffle the class's rows, reserve the evaluation rows first
// (round(heldout_fraction * class size), at least one, or query_per_class),
// then take `counts[e]` support rows from the remainder. Throws
// InfeasibleEpisode naming the class when its rows do not suffice.
Episode sample_episode(const FeatureSet& source, const EpisodeSpec& spec);

enum class ImbalanceScheme { avg7_5, avg15 };
ImbalanceScheme parse_imbalance_scheme(std::string_view name);

std::vector<std::size_t> imbalanced_counts(ImbalanceScheme scheme);
std::vector<double> empirical_class_prior(std::span<const std::size_t> counts);

// Class means drawn uniformly on the sphere of radius `separation`; each row
// is its class mean plus standard Gaussian noise. Rows are grouped by class.
FeatureSet synth_features(std::size_t classes, std::size_t dim, std::size_t per_class,
                          double separation, std::uint64_t seed);

}  // namespace firth
