#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "firth/episodes.hpp"
#include "firth/eval.hpp"
#include "firth/model.hpp"
#include "firth/train.hpp"

namespace firth {

inline constexpr std::string_view kVersionString = "firthbr 0.1.0";

// FSF1: "FSF1", then u32 version, rows, dim, classes (little-endian), then
// `rows` u32 labels, then rows*dim float32 features, row-major.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 20;

// Dispatches on extension: ".csv" is text, anything else FSF1.
FeatureSet read_features(const std::filesystem::path& path);
void write_features(const FeatureSet& set, const std::filesystem::path& path);

FeatureSet parse_features_binary(std::string_view bytes);
std::string features_binary(const FeatureSet& set);

// "# classes=K" (optional), header "label,f0,...", then one row per line.
// Without the classes line, K is one more than the largest label.
FeatureSet parse_features_csv(std::string_view text);
std::string features_csv(const FeatureSet& set);

// Writes to a sibling temp file, then renames over the target. The parent
// directory must already exist.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

struct SourceConfig {
  // Feature files for validation and novel classes. When both are empty the
  // synthetic generator is used, with disjoint seeds for the two splits.
  std::string val_path;
  std::string novel_path;
  std::size_t synth_classes = 20;
  std::size_t synth_dim = 32;
  std::size_t synth_per_class = 100;
  double synth_separation = 3.0;

  bool synthetic() const { return val_path.empty() && novel_path.empty(); }
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  SourceConfig source;
  EpisodeSpec episode = EpisodeSpec::balanced(kDefaultWays, 1);
  // Set when the config asked for an imbalanced scheme instead of `shots`.
  std::optional<ImbalanceScheme> imbalance;
  Arch arch = Arch::logistic;
  TrainConfig train;
  std::vector<Arm> arms{Arm::baseline()};
  std::size_t trials = 100;
  SweepOptions sweep;
  std::string output;

  void validate() const;
  // Re-derives the episode and training seeds from `seed` and copies the
  // shared settings into `sweep`. Call after editing fields.
  void sync();
};

enum class SourceSplit { validation, novel };
FeatureSet load_source(const ExperimentConfig& config, SourceSplit split);

// Sectioned "key = value" text; '#' and ';' start comments. Absent keys keep
// their defaults; unknown keys and bad values are errors naming key and line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Effective configuration in the same format; parse_config(echo) reproduces
// it. Every line is prefixed with `prefix` (e.g. "# " inside result files).
std::string echo_config(const ExperimentConfig& config, std::string_view prefix = {});

std::vector<double> parse_double_list(std::string_view text);

}  // namespace firth
