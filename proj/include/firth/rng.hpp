#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace firth {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Child seed for (parent, purpose, index). Adding new purposes or indices
// never changes the seeds already handed out for existing ones.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view purpose,
                          std::uint64_t index = 0) noexcept;

// Small-state generator for streams that are created in large numbers
// (one per Monte Carlo trial). Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix64(state_);
  }

 private:
  std::uint64_t state_;
};

// Uniform double in the open interval (0, 1) from 53 random bits.
template <class Rng>
double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace firth
