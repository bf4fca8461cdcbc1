#include "firth/rng.hpp"

namespace firth {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view purpose,
                          std::uint64_t index) noexcept {
  // FNV-1a over the purpose tag.
  std::uint64_t tag = 0xCBF29CE484222325ULL;
  for (unsigned char c : purpose) {
    tag ^= c;
    tag *= 0x100000001B3ULL;
  }
  std::uint64_t h = splitmix64(parent + 0x9E3779B97F4A7C15ULL);
  h = splitmix64(h ^ tag);
  return splitmix64(h + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

}  // namespace firth
