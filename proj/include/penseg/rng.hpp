#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace penseg {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent child seed from a parent seed and a stream tag.
/// Children with different tags (or indices) are decorrelated.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index = 0) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

/// Standard normal truncated to [-limit, limit] by resampling.
double truncated_normal(Rng& rng, double limit);

double uniform(Rng& rng, double lo, double hi);

}  // namespace penseg
