#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "csda/tensor.hpp"

namespace csda {

// Parameter checkpoint container. On disk: magic "CSDA", format version,
// block count, then per block the UTF-8 name, rank, extents and raw
// little-endian 64-bit reals. Load followed by save reproduces the file
// byte for byte.
struct CheckpointBlock {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointBlock>& blocks);
std::vector<CheckpointBlock> load_checkpoint(const std::filesystem::path& path);

}  // namespace csda
