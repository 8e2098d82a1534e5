#include "penseg/rng.hpp"

namespace penseg {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index) noexcept {
  // FNV-1a over the tag keeps derivation independent of std::hash.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return mix64(mix64(parent ^ h) + index);
}

double truncated_normal(Rng& rng, double limit) {
  std::normal_distribution<double> n(0.0, 1.0);
  while (true) {
    const double v = n(rng);
    if (v >= -limit && v <= limit) return v;
  }
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace penseg
