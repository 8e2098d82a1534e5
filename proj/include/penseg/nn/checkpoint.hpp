#pragma once

#include <filesystem>
#include <iosfwd>

#include "penseg/nn/network.hpp"

namespace penseg::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container; layout in docs/checkpoint_format.md.
void save_network(std::ostream& out, const Network& net);
/// Throws CheckpointError on bad magic, version mismatch or truncation.
Network load_network(std::istream& in);

void save_network(const std::filesystem::path& file, const Network& net);
Network load_network(const std::filesystem::path& file);

}  // namespace penseg::nn
