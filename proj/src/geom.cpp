#include "firth/geom.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "firth/error.hpp"

namespace firth::geom {

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw InvalidInput("geometric success probability must lie in (0, 1), got " +
                       std::to_string(beta));
  }
}

double sample_mean(std::span<const std::uint64_t> samples) {
  if (samples.empty()) throw InvalidInput("need at least one sample");
  long double s = 0;
  for (auto y : samples) s += static_cast<long double>(y);
  return static_cast<double>(s / static_cast<long double>(samples.size()));
}

}  // namespace

std::vector<std::uint64_t> sample_geometric(double beta, std::size_t n, std::uint64_t seed) {
  check_beta(beta);
  SplitMix64 rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& y : out) y = draw_geometric(beta, rng);
  return out;
}

double mle_geometric(std::span<const std::uint64_t> samples) {
  return 1.0 / sample_mean(samples);
}

double firth_geometric(std::span<const std::uint64_t> samples) {
  if (samples.size() < 2) throw InvalidInput("Firth geometric estimator needs N >= 2");
  const double n = static_cast<double>(samples.size());
  return (n - 1.0) / (n * sample_mean(samples) - 1.0);
}

void ExperimentConfig::validate() const {
  if (!(beta_star > 0.0 && beta_star < 1.0)) {
    throw ConfigError("beta must lie in (0, 1), got " + std::to_string(beta_star));
  }
  if (sample_sizes.empty()) throw ConfigError("need at least one sample size");
  for (auto n : sample_sizes)
    if (n < 2) throw ConfigError("sample sizes must be >= 2");
  if (trials_per_size < 1) throw ConfigError("trials per size must be >= 1");
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("slope fit needs >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

BiasCurve bias_curve(const ExperimentConfig& config) {
  config.validate();
  BiasCurve curve;
  for (std::size_t n : config.sample_sizes) {
    const std::uint64_t size_seed = derive_seed(config.seed, "geom", n);
    const double nd = static_cast<double>(n);
    double sum_mle = 0.0, sum_firth = 0.0, sq_mle = 0.0, sq_firth = 0.0;
    for (std::size_t t = 0; t < config.trials_per_size; ++t) {
      SplitMix64 rng(derive_seed(size_seed, "trial", t));
      std::uint64_t total = 0;
      for (std::size_t k = 0; k < n; ++k) total += draw_geometric(config.beta_star, rng);
      const double sum = static_cast<double>(total);
      const double mle = nd / sum;
      const double firth = (nd - 1.0) / (sum - 1.0);
      sum_mle += mle;
      sum_firth += firth;
      sq_mle += mle * mle;
      sq_firth += firth * firth;
    }
    const double trials = static_cast<double>(config.trials_per_size);
    BiasRow row;
    row.n = n;
    row.mean_mle = sum_mle / trials;
    row.mean_firth = sum_firth / trials;
    row.bias_mle = row.mean_mle - config.beta_star;
    row.bias_firth = row.mean_firth - config.beta_star;
    if (config.trials_per_size > 1) {
      const double var_mle = (sq_mle - trials * row.mean_mle * row.mean_mle) / (trials - 1.0);
      const double var_firth = (sq_firth - trials * row.mean_firth * row.mean_firth) / (trials - 1.0);
      row.se_mle = std::sqrt(std::max(var_mle, 0.0) / trials);
      row.se_firth = std::sqrt(std::max(var_firth, 0.0) / trials);
    } else {
      row.se_mle = row.se_firth = std::numeric_limits<double>::quiet_NaN();
    }
    curve.rows.push_back(row);
  }
  std::vector<double> lx, ly;
  for (const auto& r : curve.rows) {
    lx.push_back(std::log(static_cast<double>(r.n)));
    ly.push_back(std::log(std::abs(r.bias_mle)));
  }
  curve.mle_slope = curve.rows.size() >= 2 ? least_squares_slope(lx, ly)
                                           : std::numeric_limits<double>::quiet_NaN();
  return curve;
}

}  // namespace firth::geom
